use qasrl::annotation::AnnotationError;
use qasrl::corpus::CorpusError;
use qasrl::expand::ExpandError;
use qasrl::metrics::MetricsError;
use qasrl::nn::NnError;
use qasrl::parser::ParseError;
use qasrl::qgen::QgenError;
use qasrl::spandet::SpanDetError;

/// Bad input (exit 2) or a failure of the toolkit itself (exit 1).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Internal(m) => m,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation(message.into())
    }

    fn classify(validation: bool, message: String) -> Self {
        if validation {
            CliError::Validation(message)
        } else {
            CliError::Internal(message)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn nn_is_validation(e: &NnError) -> bool {
    !matches!(e, NnError::Io(_) | NnError::NonFinite(_) | NnError::DuplicateParameter(_))
}

fn corpus_is_validation(e: &CorpusError) -> bool {
    !matches!(e, CorpusError::Io(_))
}

fn spans_is_validation(e: &SpanDetError) -> bool {
    match e {
        SpanDetError::Nn(e) => nn_is_validation(e),
        _ => true,
    }
}

fn qgen_is_validation(e: &QgenError) -> bool {
    match e {
        QgenError::Nn(e) => nn_is_validation(e),
        _ => true,
    }
}

fn parse_is_validation(e: &ParseError) -> bool {
    match e {
        ParseError::Corpus(e) => corpus_is_validation(e),
        ParseError::Spans(e) => spans_is_validation(e),
        ParseError::Questions(e) => qgen_is_validation(e),
        ParseError::Io(_) => false,
        ParseError::Threshold(_) | ParseError::Json { .. } => true,
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::classify(nn_is_validation(&e), e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::classify(corpus_is_validation(&e), e.to_string())
    }
}

impl From<SpanDetError> for CliError {
    fn from(e: SpanDetError) -> Self {
        CliError::classify(spans_is_validation(&e), e.to_string())
    }
}

impl From<QgenError> for CliError {
    fn from(e: QgenError) -> Self {
        CliError::classify(qgen_is_validation(&e), e.to_string())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::classify(parse_is_validation(&e), e.to_string())
    }
}

impl From<ExpandError> for CliError {
    fn from(e: ExpandError) -> Self {
        let validation = match &e {
            ExpandError::Parse(e) => parse_is_validation(e),
            ExpandError::Corpus(e) => corpus_is_validation(e),
            _ => true,
        };
        CliError::classify(validation, e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnnotationError> for CliError {
    fn from(e: AnnotationError) -> Self {
        CliError::classify(e.code() != "internal", e.to_string())
    }
}
