use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use qasrl::annotation::{corpus_cost, AnnotationService, ServiceConfig, SystemClock};
use qasrl::corpus::{corpus_stats, identify_verbs, load_corpus, save_corpus, Domain, SentenceRecord, ValidityPolicy};
use qasrl::dataset::{verb_instances, VerbInstance};
use qasrl::expand::{
    filter_candidates, jackknife_folds, merge_validated, overgenerate, paraphrase_filter, CandidateQa,
    JudgedCandidate, Provenance,
};
use qasrl::gradsuite::check_all_heads;
use qasrl::grammar::QuestionSlots;
use qasrl::metrics::{
    gold_questions, joint_counts, span_detection_counts, GoldQuestion, Matcher, PrfCounts,
};
use qasrl::nn::{load_embeddings, TrainConfig, TrainReport, Vocab};
use qasrl::parser::{read_predictions, write_predictions, Parser, Prediction};
use qasrl::qgen::{QgenConfig, QgenKind, QuestionGenerator};
use qasrl::spandet::{threshold_grid_with_step, tune_threshold_on_grid, DetectorConfig, DetectorKind, SpanDetector};
use qasrl::synthetic::{toy_detector_config, toy_qgen_config, toy_train_config};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Cli, Command, CorpusFilter, MatcherArgs, Size, TrainArgs};
use crate::error::CliError;

/// A command's JSON report and its human-readable rendering.
pub struct Output {
    pub json: Value,
    pub text: String,
}

type Result<T> = std::result::Result<T, CliError>;

struct Ctx {
    seed: u64,
    data_dir: Option<PathBuf>,
}

impl Ctx {
    /// Resolves a relative input path against the data directory and checks
    /// that it exists.
    fn input(&self, path: &Path) -> Result<PathBuf> {
        let resolved = match &self.data_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        };
        if !resolved.is_file() {
            return Err(CliError::validation(format!("input file {} not found", resolved.display())));
        }
        Ok(resolved)
    }
}

fn check_output(path: &Path) -> Result<()> {
    if path.is_dir() {
        return Err(CliError::validation(format!("output {} is a directory", path.display())));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(CliError::validation(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(CliError::validation(format!("--tau {tau} outside [0, 1]")))
    }
}

fn matcher(args: &MatcherArgs) -> Result<(Matcher, &'static str)> {
    if args.flag.iou {
        Ok((Matcher::iou(args.iou_threshold)?, "iou"))
    } else {
        Ok((Matcher::exact(), "exact"))
    }
}

fn policy(filter: &CorpusFilter) -> ValidityPolicy {
    let mut policy = ValidityPolicy::default();
    if let Some(rule) = filter.rule {
        policy.generation = rule;
    }
    policy
}

fn load_filtered(path: &Path, filter: &CorpusFilter) -> Result<Vec<SentenceRecord>> {
    let corpus = load_corpus(path)?;
    if filter.domains.is_empty() {
        return Ok(corpus);
    }
    let keep: BTreeSet<Domain> = filter.domains.iter().map(|&d| d.into()).collect();
    Ok(corpus.into_iter().filter(|r| keep.contains(&r.domain)).collect())
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_judged(path: &Path) -> Result<Vec<JudgedCandidate>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| CliError::validation(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

fn prf_json(counts: PrfCounts) -> Value {
    let prf = counts.prf();
    json!({ "precision": prf.precision, "recall": prf.recall, "f1": prf.f1, "counts": counts })
}

pub fn run(cli: Cli) -> Result<Output> {
    let ctx = Ctx { seed: cli.seed, data_dir: cli.data_dir };
    match cli.command {
        Command::TrainSpan { model, train } => {
            let kind = if model.bio { DetectorKind::Bio } else { DetectorKind::Span };
            train_span(&ctx, kind, &train)
        }
        Command::TrainQgen { model, train } => {
            let kind = if model.local { QgenKind::Local } else { QgenKind::Sequential };
            train_qgen(&ctx, kind, &train)
        }
        Command::Parse { models, input, tau, gold_verbs, output } => {
            check_tau(tau)?;
            let input = ctx.input(&input)?;
            let span_model = ctx.input(&models.span_model)?;
            let qgen_model = ctx.input(&models.qgen_model)?;
            if let Some(o) = &output {
                check_output(o)?;
            }
            parse(&input, &span_model, &qgen_model, tau, gold_verbs, output.as_deref())
        }
        Command::Evaluate { gold, predictions, matcher: m, joint, filter } => {
            let gold = ctx.input(&gold)?;
            let predictions = ctx.input(&predictions)?;
            evaluate(&gold, &predictions, &m, joint, &filter)
        }
        Command::TuneTau { span_model, dev, matcher: m, step, filter } => {
            let span_model = ctx.input(&span_model)?;
            let dev = ctx.input(&dev)?;
            tune_tau(&span_model, &dev, &m, step, &filter)
        }
        Command::Expand { models, corpus, tau, output, model_id, fold, filter } => {
            check_tau(tau)?;
            let corpus = ctx.input(&corpus)?;
            let span_model = ctx.input(&models.span_model)?;
            let qgen_model = ctx.input(&models.qgen_model)?;
            check_output(&output)?;
            let model_id = model_id.unwrap_or_else(|| {
                span_model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
            });
            expand(&corpus, &span_model, &qgen_model, tau, &output, Provenance { model_id, fold }, &filter)
        }
        Command::Jackknife { corpus, k, out_dir } => {
            let corpus = ctx.input(&corpus)?;
            jackknife(&corpus, k, &out_dir, ctx.seed)
        }
        Command::Merge { corpus, judged, output, negatives, paraphrase_filter } => {
            let corpus = ctx.input(&corpus)?;
            let judged = ctx.input(&judged)?;
            check_output(&output)?;
            if let Some(n) = &negatives {
                check_output(n)?;
            }
            merge(&corpus, &judged, &output, negatives.as_deref(), paraphrase_filter)
        }
        Command::Stats { corpus, filter } => {
            let corpus = ctx.input(&corpus)?;
            stats(&corpus, &filter)
        }
        Command::Serve { host, port, state_dir, load, lease_minutes, validators } => {
            let load = load.map(|p| ctx.input(&p)).transpose()?;
            serve(&host, port, &state_dir, load.as_deref(), lease_minutes, validators)
        }
        Command::GradCheck { instances } => grad_check(instances, ctx.seed),
    }
}

struct TrainData {
    train: Vec<VerbInstance>,
    dev: Vec<VerbInstance>,
    vocab: Vocab,
    config: TrainConfig,
}

fn train_data(ctx: &Ctx, args: &TrainArgs) -> Result<TrainData> {
    let train_path = ctx.input(&args.train)?;
    let dev_path = args.dev.as_ref().map(|d| ctx.input(d)).transpose()?;
    check_output(&args.out)?;
    let policy = policy(&args.filter);
    let train_corpus = load_filtered(&train_path, &args.filter)?;
    let train = verb_instances(&train_corpus, &policy);
    if train.is_empty() {
        return Err(CliError::validation("training corpus has no annotated verbs"));
    }
    let dev = match &dev_path {
        Some(p) => verb_instances(&load_filtered(p, &args.filter)?, &policy),
        None => Vec::new(),
    };
    let vocab = Vocab::from_tokens(train_corpus.iter().flat_map(|r| r.tokens.iter().map(String::as_str)));
    let mut config = match args.size {
        Size::Toy => toy_train_config(ctx.seed),
        Size::Full => TrainConfig { seed: ctx.seed, ..TrainConfig::default() },
    };
    if let Some(e) = args.epochs {
        config.max_epochs = e;
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    if let Some(p) = args.patience {
        config.patience = p;
    }
    if config.max_epochs == 0 || config.batch_size == 0 {
        return Err(CliError::validation("--epochs and --batch-size must be positive"));
    }
    Ok(TrainData { train, dev, vocab, config })
}

fn report_json(report: &TrainReport) -> Value {
    json!({
        "epochs": report.epochs.len(),
        "bestEpoch": report.best_epoch,
        "stoppedEarly": report.stopped_early,
        "finalTrainLoss": report.epochs.last().map(|e| e.train_loss),
        "history": report.epochs,
    })
}

fn train_span(ctx: &Ctx, kind: DetectorKind, args: &TrainArgs) -> Result<Output> {
    let embeddings = args.embeddings.as_ref().map(|e| ctx.input(e)).transpose()?;
    let data = train_data(ctx, args)?;
    let config = match args.size {
        Size::Toy => toy_detector_config(data.vocab.len()),
        Size::Full => DetectorConfig::full_size(data.vocab.len()),
    };
    let mut detector = SpanDetector::new(kind, config, data.vocab, ctx.seed)?;
    let applied = match &embeddings {
        Some(path) => {
            let vectors = load_embeddings(path, detector.config.encoder.word_dim, |w| {
                detector.vocab.id(w) != detector.vocab.id(qasrl::nn::UNK)
            })?;
            let encoder = detector.encoder().clone();
            let vocab = detector.vocab.clone();
            vocab.apply_embeddings(&vectors, &encoder, &mut detector.params)?
        }
        None => 0,
    };
    let report = detector.train(&data.train, &data.dev, &data.config)?;
    detector.save(&args.out)?;
    let train_f1 = detector.evaluate(&data.train, 0.5, &Matcher::exact())?.f1;
    let dev_f1 = if data.dev.is_empty() { None } else { Some(detector.evaluate(&data.dev, 0.5, &Matcher::exact())?.f1) };
    let model = match kind {
        DetectorKind::Bio => "bio",
        DetectorKind::Span => "span",
    };
    let mut json = json!({
        "command": "train-span",
        "model": model,
        "checkpoint": args.out.display().to_string(),
        "trainInstances": data.train.len(),
        "devInstances": data.dev.len(),
        "embeddingsApplied": applied,
        "trainF1": train_f1,
        "devF1": dev_f1,
    });
    merge_objects(&mut json, report_json(&report));
    let text = format!(
        "trained {model} span detector for {} epochs (best {}); train F1 {:.4}{}\ncheckpoint: {}",
        report.epochs.len(),
        report.best_epoch,
        train_f1,
        dev_f1.map(|f| format!(", dev F1 {f:.4}")).unwrap_or_default(),
        args.out.display()
    );
    Ok(Output { json, text })
}

fn train_qgen(ctx: &Ctx, kind: QgenKind, args: &TrainArgs) -> Result<Output> {
    let embeddings = args.embeddings.as_ref().map(|e| ctx.input(e)).transpose()?;
    let data = train_data(ctx, args)?;
    let config = match args.size {
        Size::Toy => toy_qgen_config(data.vocab.len()),
        Size::Full => QgenConfig::full_size(data.vocab.len()),
    };
    let mut generator = QuestionGenerator::new(kind, config, data.vocab, ctx.seed)?;
    let applied = match &embeddings {
        Some(path) => {
            let vectors = load_embeddings(path, generator.config.encoder.word_dim, |w| {
                generator.vocab.id(w) != generator.vocab.id(qasrl::nn::UNK)
            })?;
            let encoder = generator.encoder().clone();
            let vocab = generator.vocab.clone();
            vocab.apply_embeddings(&vectors, &encoder, &mut generator.params)?
        }
        None => 0,
    };
    let report = generator.train(&data.train, &data.dev, &data.config)?;
    generator.save(&args.out)?;
    let train_scores = generator.evaluate(&data.train)?;
    let dev_scores = if data.dev.is_empty() { None } else { Some(generator.evaluate(&data.dev)?) };
    let model = match kind {
        QgenKind::Local => "local",
        QgenKind::Sequential => "seq",
    };
    let mut json = json!({
        "command": "train-qgen",
        "model": model,
        "checkpoint": args.out.display().to_string(),
        "trainInstances": data.train.len(),
        "devInstances": data.dev.len(),
        "embeddingsApplied": applied,
        "train": train_scores,
        "dev": dev_scores,
    });
    merge_objects(&mut json, report_json(&report));
    let text = format!(
        "trained {model} question generator for {} epochs (best {}); train exact match {:.4}{}\ncheckpoint: {}",
        report.epochs.len(),
        report.best_epoch,
        train_scores.exact_match,
        dev_scores.map(|s| format!(", dev exact match {:.4}", s.exact_match)).unwrap_or_default(),
        args.out.display()
    );
    Ok(Output { json, text })
}

fn merge_objects(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn load_models(span_model: &Path, qgen_model: &Path) -> Result<(SpanDetector, QuestionGenerator)> {
    Ok((SpanDetector::load(span_model)?, QuestionGenerator::load(qgen_model)?))
}

fn parse(
    input: &Path,
    span_model: &Path,
    qgen_model: &Path,
    tau: f64,
    gold_verbs: bool,
    output: Option<&Path>,
) -> Result<Output> {
    let corpus = load_corpus(input)?;
    let (detector, generator) = load_models(span_model, qgen_model)?;
    let parser = Parser::new(&detector, &generator);
    let mut predictions = Vec::new();
    let (mut verbs, mut dropped) = (0, 0);
    for record in &corpus {
        let indices = if gold_verbs {
            record.verb_entries.iter().map(|e| e.verb_index).collect()
        } else {
            identify_verbs(&record.tokens, &record.pos_tags)?
        };
        verbs += indices.len();
        let out = parser.parse_verbs(&record.tokens, &indices, tau)?;
        dropped += out.dropped.len();
        predictions.extend(out.tuples.iter().map(|t| Prediction::from_tuple(&record.sentence_id, t)));
    }
    let mut json = json!({
        "command": "parse",
        "tau": tau,
        "sentences": corpus.len(),
        "verbs": verbs,
        "tuples": predictions.len(),
        "dropped": dropped,
        "output": output.map(|p| p.display().to_string()),
    });
    let text = match output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_predictions(&mut w, &predictions)?;
            w.flush()?;
            format!(
                "{} sentences, {verbs} verbs: {} tuples ({dropped} ungrammatical dropped)\npredictions: {}",
                corpus.len(),
                predictions.len(),
                path.display()
            )
        }
        None => {
            json["predictions"] = to_value(&predictions)?;
            let mut buf = Vec::new();
            write_predictions(&mut buf, &predictions)?;
            String::from_utf8(buf).expect("JSON is UTF-8").trim_end().to_string()
        }
    };
    Ok(Output { json, text })
}

type VerbKey = (String, usize);

fn evaluate(gold: &Path, predictions: &Path, m: &MatcherArgs, joint: bool, filter: &CorpusFilter) -> Result<Output> {
    let (matcher, matcher_name) = matcher(m)?;
    let policy = policy(filter);
    let corpus = load_filtered(gold, filter)?;
    let predictions = read_predictions(BufReader::new(File::open(predictions)?))?;
    let mut gold_by_verb: BTreeMap<VerbKey, Vec<GoldQuestion>> = BTreeMap::new();
    for r in &corpus {
        for e in &r.verb_entries {
            gold_by_verb.insert((r.sentence_id.clone(), e.verb_index), gold_questions(e, &policy));
        }
    }
    let sentences: BTreeSet<&str> = corpus.iter().map(|r| r.sentence_id.as_str()).collect();
    let mut pred_by_verb: BTreeMap<VerbKey, Vec<&Prediction>> = BTreeMap::new();
    for p in predictions.iter().filter(|p| sentences.contains(p.sentence_id.as_str())) {
        pred_by_verb.entry((p.sentence_id.clone(), p.verb_index)).or_default().push(p);
    }
    let keys: BTreeSet<&VerbKey> = gold_by_verb.keys().chain(pred_by_verb.keys()).collect();
    let (mut span_counts, mut joint_total) = (PrfCounts::default(), PrfCounts::default());
    for key in &keys {
        let gold = gold_by_verb.get(*key).map(Vec::as_slice).unwrap_or(&[]);
        let preds = pred_by_verb.get(*key).map(Vec::as_slice).unwrap_or(&[]);
        let mut spans: Vec<_> = preds.iter().flat_map(|p| p.spans.iter().copied()).collect();
        spans.sort();
        spans.dedup();
        span_counts.add(span_detection_counts(&spans, gold, &matcher));
        if joint {
            let mut pairs: Vec<(QuestionSlots, _)> =
                preds.iter().flat_map(|p| p.spans.iter().map(|s| (p.slots.clone(), *s))).collect();
            pairs.sort();
            pairs.dedup();
            joint_total.add(joint_counts(&pairs, gold, &matcher));
        }
    }
    let span = prf_json(span_counts);
    let joint_json = if joint { prf_json(joint_total) } else { Value::Null };
    let mut text = format!(
        "{} verbs, {matcher_name} match\nspans: P {:.4} R {:.4} F1 {:.4}",
        keys.len(),
        span["precision"].as_f64().unwrap_or(0.0),
        span["recall"].as_f64().unwrap_or(0.0),
        span["f1"].as_f64().unwrap_or(0.0)
    );
    if joint {
        let p = joint_total.prf();
        text.push_str(&format!("\njoint: P {:.4} R {:.4} F1 {:.4}", p.precision, p.recall, p.f1));
    }
    let json = json!({
        "command": "evaluate",
        "matcher": matcher_name,
        "verbs": keys.len(),
        "span": span,
        "joint": joint_json,
    });
    Ok(Output { json, text })
}

fn tune_tau(span_model: &Path, dev: &Path, m: &MatcherArgs, step: f64, filter: &CorpusFilter) -> Result<Output> {
    let (matcher, matcher_name) = matcher(m)?;
    let grid = threshold_grid_with_step(step).map_err(|e| CliError::validation(format!("--step: {e}")))?;
    let detector = SpanDetector::load(span_model)?;
    let instances = verb_instances(&load_filtered(dev, filter)?, &policy(filter));
    let scored = instances
        .iter()
        .map(|inst| Ok((detector.score(&inst.tokens, inst.verb_index)?, inst)))
        .collect::<Result<Vec<_>>>()?;
    let (tau, prf) = tune_threshold_on_grid(&scored, &matcher, &grid)?;
    let json = json!({
        "command": "tune-tau",
        "matcher": matcher_name,
        "step": step,
        "gridPoints": grid.len(),
        "instances": instances.len(),
        "tau": tau,
        "precision": prf.precision,
        "recall": prf.recall,
        "f1": prf.f1,
    });
    let text = format!(
        "tau* = {tau:.4} over {} grid points ({matcher_name} match): P {:.4} R {:.4} F1 {:.4}",
        grid.len(),
        prf.precision,
        prf.recall,
        prf.f1
    );
    Ok(Output { json, text })
}

fn expand(
    corpus: &Path,
    span_model: &Path,
    qgen_model: &Path,
    tau: f64,
    output: &Path,
    provenance: Provenance,
    filter: &CorpusFilter,
) -> Result<Output> {
    let corpus = load_filtered(corpus, filter)?;
    let (detector, generator) = load_models(span_model, qgen_model)?;
    let parser = Parser::new(&detector, &generator);
    let generated = overgenerate(&parser, &corpus, tau, &provenance)?;
    let kept: Vec<CandidateQa> = filter_candidates(&generated, &corpus, &policy(filter));
    write_jsonl(output, &kept)?;
    let json = json!({
        "command": "expand",
        "tau": tau,
        "modelId": provenance.model_id,
        "fold": provenance.fold,
        "sentences": corpus.len(),
        "generated": generated.len(),
        "kept": kept.len(),
        "output": output.display().to_string(),
    });
    let text = format!(
        "{} candidates generated at tau {tau}, {} kept after filtering\ncandidates: {}",
        generated.len(),
        kept.len(),
        output.display()
    );
    Ok(Output { json, text })
}

fn jackknife(corpus: &Path, k: usize, out_dir: &Path, seed: u64) -> Result<Output> {
    let records = load_corpus(corpus)?;
    let folds = jackknife_folds(records.len(), k, seed)?;
    fs::create_dir_all(out_dir)?;
    let mut reports = Vec::new();
    for fold in &folds {
        let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
        let train_path = out_dir.join(format!("fold{}.train.jsonl", fold.index));
        let heldout_path = out_dir.join(format!("fold{}.heldout.jsonl", fold.index));
        save_corpus(&train_path, &pick(&fold.train))?;
        save_corpus(&heldout_path, &pick(&fold.heldout))?;
        reports.push(json!({
            "index": fold.index,
            "train": fold.train.len(),
            "heldout": fold.heldout.len(),
            "trainPath": train_path.display().to_string(),
            "heldoutPath": heldout_path.display().to_string(),
        }));
    }
    let text = format!("{} sentences split into {k} folds under {}", records.len(), out_dir.display());
    let json = json!({ "command": "jackknife", "k": k, "sentences": records.len(), "folds": reports });
    Ok(Output { json, text })
}

fn merge(corpus: &Path, judged: &Path, output: &Path, negatives: Option<&Path>, paraphrases: bool) -> Result<Output> {
    let original = load_corpus(corpus)?;
    let judged: Vec<(CandidateQa, _)> = read_judged(judged)?.into_iter().map(|j| (j.candidate, j.judgments)).collect();
    let result = merge_validated(&original, &judged)?;
    let count = |c: &[SentenceRecord]| c.iter().flat_map(|r| &r.verb_entries).map(|e| e.qa_pairs.len()).sum::<usize>();
    let (merged_corpus, removed) = if paraphrases {
        let filtered = paraphrase_filter(&result.corpus, &original);
        let removed = count(&result.corpus) - count(&filtered);
        (filtered, removed)
    } else {
        (result.corpus, 0)
    };
    save_corpus(output, &merged_corpus)?;
    if let Some(path) = negatives {
        save_corpus(path, &result.negatives)?;
    }
    let rejected = count(&result.negatives);
    let json = json!({
        "command": "merge",
        "candidates": judged.len(),
        "merged": result.merged - removed,
        "rejected": rejected,
        "paraphrasesRemoved": removed,
        "output": output.display().to_string(),
        "negatives": negatives.map(|p| p.display().to_string()),
    });
    let text = format!(
        "{} candidates: {} merged, {rejected} rejected, {removed} paraphrases removed\ncorpus: {}",
        judged.len(),
        result.merged - removed,
        output.display()
    );
    Ok(Output { json, text })
}

fn stats(corpus: &Path, filter: &CorpusFilter) -> Result<Output> {
    let records = load_filtered(corpus, filter)?;
    let policy = policy(filter);
    let stats = corpus_stats(&records, &policy);
    let cost = corpus_cost(&records, &policy)?;
    let t = &stats.total;
    let mut text = format!(
        "{} sentences, {} verbs, {} questions ({} valid)\n{:.2} questions/verb, {:.2} valid/verb",
        t.sentences, t.verbs, t.questions, t.valid_questions, t.questions_per_verb, t.valid_per_verb
    );
    for (domain, c) in &stats.by_domain {
        text.push_str(&format!(
            "\n  {}: {} sentences, {} verbs, {} valid questions",
            serde_json::to_value(domain)?.as_str().unwrap_or("?"),
            c.sentences,
            c.verbs,
            c.valid_questions
        ));
    }
    text.push_str(&format!(
        "\ncost: {} cents ({:.2} per verb, {:.2} per valid question)",
        cost.total_cents, cost.cents_per_verb, cost.cents_per_valid_question
    ));
    let json = json!({ "command": "stats", "stats": stats, "cost": cost });
    Ok(Output { json, text })
}

fn serve(
    host: &str,
    port: u16,
    state_dir: &Path,
    load: Option<&Path>,
    lease_minutes: u64,
    validators: usize,
) -> Result<Output> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::validation(format!("--host/--port: {e}")))?;
    if validators == 0 || lease_minutes == 0 {
        return Err(CliError::validation("--validators and --lease-minutes must be positive"));
    }
    let config = ServiceConfig { lease_ms: lease_minutes * 60 * 1000, validators, ..ServiceConfig::default() };
    let service = AnnotationService::open(state_dir, config, Arc::new(SystemClock))?;
    let mut added = 0;
    if let Some(path) = load {
        let existing: BTreeSet<String> = service.state().sentences.keys().cloned().collect();
        for mut record in load_corpus(path)? {
            if existing.contains(&record.sentence_id) {
                continue;
            }
            for e in &mut record.verb_entries {
                e.qa_pairs.clear();
            }
            service.add_sentence(record)?;
            added += 1;
        }
    }
    eprintln!("serving on http://{addr} ({added} sentences added)");
    let service = Arc::new(service);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(qasrl_server::serve(service.clone(), addr))?;
    let stats = service.stats();
    let text = format!("server stopped after {} events", stats.events);
    let json = json!({ "command": "serve", "address": addr.to_string(), "added": added, "stats": stats });
    Ok(Output { json, text })
}

fn grad_check(instances: usize, seed: u64) -> Result<Output> {
    if instances == 0 {
        return Err(CliError::validation("--instances must be positive"));
    }
    let checks = check_all_heads(instances, seed)?;
    let passed = checks.iter().all(|c| c.passed);
    let text = checks
        .iter()
        .map(|c| {
            format!(
                "{} {:?}: {} instances, {} coordinates, {} at ReLU kinks, max relative error {:.2e} at {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.head,
                c.instances,
                c.checked,
                c.kinks,
                c.max_relative_error,
                c.worst.as_deref().unwrap_or("-")
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let json = json!({ "command": "grad-check", "instances": instances, "passed": passed, "heads": checks });
    if !passed {
        return Err(CliError::Internal(format!("gradient check failed\n{text}")));
    }
    Ok(Output { json, text })
}
