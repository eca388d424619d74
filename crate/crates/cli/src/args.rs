use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qasrl::annotation::ValidityRule;
use qasrl::corpus::Domain;

#[derive(Debug, Parser)]
#[command(name = "qasrl", version, about = "QA-SRL annotation, parsing and evaluation toolkit")]
pub struct Cli {
    /// Print a machine-readable JSON report to stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Directory that relative input paths are resolved against.
    #[arg(long, global = true, env = "QASRL_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a span detector.
    TrainSpan {
        #[command(flatten)]
        model: SpanModel,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train a question generator.
    TrainQgen {
        #[command(flatten)]
        model: QgenModel,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Parse sentences into question-answer tuples.
    Parse {
        #[command(flatten)]
        models: ModelPaths,
        /// Corpus of sentences to parse.
        #[arg(long)]
        input: PathBuf,
        /// Span probability threshold.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Parse the annotated verbs instead of identifying verbs from POS tags.
        #[arg(long)]
        gold_verbs: bool,
        /// Prediction file (JSON lines); printed to stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Score predictions against a gold corpus.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[command(flatten)]
        matcher: MatcherArgs,
        /// Also score (question, span) pairs.
        #[arg(long)]
        joint: bool,
        #[command(flatten)]
        filter: CorpusFilter,
    },
    /// Pick the span threshold maximizing F1 on a development corpus.
    TuneTau {
        #[arg(long)]
        span_model: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[command(flatten)]
        matcher: MatcherArgs,
        /// Grid spacing; the grid runs from 0 to 1 inclusive.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[command(flatten)]
        filter: CorpusFilter,
    },
    /// Over-generate candidate questions for annotated verbs and drop those
    /// overlapping existing answers.
    Expand {
        #[command(flatten)]
        models: ModelPaths,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        tau: f64,
        /// Candidate file (JSON lines).
        #[arg(long, short)]
        output: PathBuf,
        /// Model identifier recorded with each candidate; defaults to the
        /// span model's file stem.
        #[arg(long)]
        model_id: Option<String>,
        /// Jackknife fold the models were trained without.
        #[arg(long)]
        fold: Option<usize>,
        #[command(flatten)]
        filter: CorpusFilter,
    },
    /// Split a corpus into sentence-level folds.
    Jackknife {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        /// Directory receiving fold<i>.train.jsonl and fold<i>.heldout.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Merge validated candidates into a corpus.
    Merge {
        #[arg(long)]
        corpus: PathBuf,
        /// Judged candidates (JSON lines of {candidate, judgments}).
        #[arg(long)]
        judged: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Where rejected candidates are written.
        #[arg(long)]
        negatives: Option<PathBuf>,
        /// Drop merged questions that paraphrase an original question.
        #[arg(long)]
        paraphrase_filter: bool,
    },
    /// Corpus counts and annotation cost.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        filter: CorpusFilter,
    },
    /// Run the annotation HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Event log and snapshot directory.
        #[arg(long)]
        state_dir: PathBuf,
        /// Sentences to queue for annotation; existing ones are skipped.
        #[arg(long)]
        load: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        lease_minutes: u64,
        /// Validators per generated verb; all must accept a question.
        #[arg(long, default_value_t = 2)]
        validators: usize,
    },
    /// Finite-difference gradient checks of every model head.
    GradCheck {
        /// Random micro-instances per head.
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SpanModel {
    /// Per-token B/I/O tagger.
    #[arg(long)]
    pub bio: bool,
    /// Independent per-span scorer.
    #[arg(long)]
    pub span: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct QgenModel {
    /// Independent per-slot classifiers.
    #[arg(long)]
    pub local: bool,
    /// Slot-by-slot recurrent decoder.
    #[arg(long)]
    pub seq: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct MatcherFlag {
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub iou: bool,
}

#[derive(Debug, Args)]
pub struct MatcherArgs {
    #[command(flatten)]
    pub flag: MatcherFlag,
    /// Minimum intersection over union for --iou.
    #[arg(long, default_value_t = 0.5)]
    pub iou_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ModelPaths {
    #[arg(long)]
    pub span_model: PathBuf,
    #[arg(long)]
    pub qgen_model: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Size {
    /// Small networks with mini-batches of 5.
    Toy,
    Full,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Early-stopping corpus; training loss is used when omitted.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Size::Full)]
    pub size: Size,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Pretrained word vectors (`word v1 ... vd` per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub filter: CorpusFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Wikipedia,
    Wikinews,
    Science,
    Other,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Domain {
        match d {
            DomainArg::Wikipedia => Domain::Wikipedia,
            DomainArg::Wikinews => Domain::Wikinews,
            DomainArg::Science => Domain::Science,
            DomainArg::Other => Domain::Other,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusFilter {
    /// Keep only sentences from these domains (repeatable).
    #[arg(long = "domain", value_enum)]
    pub domains: Vec<DomainArg>,
    /// Validity rule for crowd-generated questions: all-of-N or K-of-N.
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<ValidityRule>,
}

pub fn parse_rule(s: &str) -> Result<ValidityRule, String> {
    let bad = || format!("expected all-of-N or K-of-N, got {s:?}");
    let (k, n) = s.split_once("-of-").ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    if k == "all" {
        return Ok(ValidityRule::all_of(n));
    }
    let k: usize = k.parse().map_err(|_| bad())?;
    if k == 0 || k > n {
        return Err(bad());
    }
    Ok(ValidityRule::KOfN { k, n })
}
