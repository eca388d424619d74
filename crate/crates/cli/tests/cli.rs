use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use qasrl::annotation::corpus_cost;
use qasrl::corpus::{load_corpus, save_corpus, Judgment, SentenceRecord, ValidityPolicy};
use qasrl::dataset::verb_instances;
use qasrl::expand::{CandidateQa, JudgedCandidate};
use qasrl::metrics::gold_questions;
use qasrl::parser::{read_predictions, write_predictions, Prediction};
use qasrl::spandet::SpanDetector;
use qasrl::synthetic::toy_corpus;
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qasrl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qasrl"));
    c.env_remove("QASRL_DATA_DIR");
    c
}

fn run_with(mut cmd: Command, args: &[&str]) -> Run {
    let out = cmd.args(args).output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with(qasrl(), args)
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn assert_schema(name: &str, report: &Value) {
    let text = fs::read_to_string(schema_dir().join(format!("{name}.schema.json"))).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} report violates its schema: {errors:?}\n{report:#}");
}

/// Runs with `--json`, requires exit 0 and a report matching the command's schema.
fn run_json(args: &[&str]) -> Value {
    let r = run(&[args, &["--json"]].concat());
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    let report: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_schema(args[0], &report);
    report
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixtures {
    dir: TempDir,
    train_report: Value,
    qgen_report: Value,
}

impl Fixtures {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// A toy training corpus, a held-out dev corpus and models trained on the
/// former through the CLI.
fn fixtures() -> &'static Fixtures {
    static F: OnceLock<Fixtures> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        save_corpus(dir.path().join("train.jsonl"), &toy_corpus(30, 7)).unwrap();
        save_corpus(dir.path().join("dev.jsonl"), &toy_corpus(15, 11)).unwrap();
        let train = dir.path().join("train.jsonl");
        let span = dir.path().join("span.ckpt");
        let qgen = dir.path().join("qgen.ckpt");
        let train_report = run_json(&[
            "train-span", "--span", "--size", "toy", "--train", p(&train), "--out", p(&span), "--seed", "3",
        ]);
        let qgen_report = run_json(&[
            "train-qgen", "--seq", "--size", "toy", "--train", p(&train), "--dev", p(&train), "--out", p(&qgen),
            "--seed", "5",
        ]);
        Fixtures { dir, train_report, qgen_report }
    })
}

fn gold_predictions(corpus: &[SentenceRecord], keep: impl Fn(usize) -> bool) -> Vec<Prediction> {
    let policy = ValidityPolicy::default();
    let mut out = Vec::new();
    for r in corpus {
        for e in &r.verb_entries {
            for (i, q) in gold_questions(e, &policy).into_iter().enumerate() {
                if keep(i) {
                    out.push(Prediction {
                        sentence_id: r.sentence_id.clone(),
                        verb_index: e.verb_index,
                        slots: q.slots,
                        spans: q.spans,
                        prob: 1.0,
                    });
                }
            }
        }
    }
    out
}

#[test]
fn training_reports_describe_fitted_models() {
    let f = fixtures();
    assert_eq!(f.train_report["model"], "span");
    assert_eq!(f.train_report["trainInstances"], 30);
    assert!(f.train_report["trainF1"].as_f64().unwrap() > 0.9, "{:#}", f.train_report);
    assert_eq!(f.qgen_report["model"], "seq");
    assert!(f.qgen_report["dev"]["exactMatch"].as_f64().unwrap() > 0.8, "{:#}", f.qgen_report);
    assert!(f.path("span.ckpt").is_file() && f.path("qgen.ckpt").is_file());
}

#[test]
fn training_is_deterministic_under_a_seed() {
    let f = fixtures();
    let train = f.path("train.jsonl");
    let mut outputs = Vec::new();
    for (name, seed) in [("a.ckpt", "9"), ("b.ckpt", "9"), ("c.ckpt", "10")] {
        let out = f.dir.path().join(format!("det-{name}"));
        let r = run(&[
            "train-span", "--bio", "--size", "toy", "--epochs", "2", "--train", p(&train), "--out", p(&out),
            "--seed", seed,
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0], outputs[2]);
}

#[test]
fn evaluate_exact_on_gold_predictions_is_perfect() {
    let f = fixtures();
    let corpus = load_corpus(f.path("train.jsonl")).unwrap();
    let preds = f.path("gold-preds.jsonl");
    write_predictions(File::create(&preds).unwrap(), &gold_predictions(&corpus, |_| true)).unwrap();
    let report = run_json(&[
        "evaluate", "--exact", "--joint", "--gold", p(&f.path("train.jsonl")), "--predictions", p(&preds),
    ]);
    assert_eq!(report["span"]["f1"], 1.0);
    assert_eq!(report["joint"]["f1"], 1.0);
    assert_eq!(report["verbs"], 30);
}

#[test]
fn evaluate_partial_predictions_lose_recall_only() {
    let f = fixtures();
    let corpus = load_corpus(f.path("train.jsonl")).unwrap();
    let preds = f.path("first-preds.jsonl");
    write_predictions(File::create(&preds).unwrap(), &gold_predictions(&corpus, |i| i == 0)).unwrap();
    let report =
        run_json(&["evaluate", "--iou", "--gold", p(&f.path("train.jsonl")), "--predictions", p(&preds)]);
    let gold: usize = corpus.iter().flat_map(|r| &r.verb_entries).map(|e| e.qa_pairs.len()).sum();
    assert_eq!(report["matcher"], "iou");
    assert_eq!(report["span"]["precision"], 1.0);
    assert!((report["span"]["recall"].as_f64().unwrap() - 30.0 / gold as f64).abs() < 1e-12);
    assert_eq!(report["joint"], Value::Null);
}

#[test]
fn parse_at_tau_one_yields_no_tuples() {
    let f = fixtures();
    let out = f.path("parse-1.jsonl");
    let report = run_json(&[
        "parse", "--span-model", p(&f.path("span.ckpt")), "--qgen-model", p(&f.path("qgen.ckpt")), "--input",
        p(&f.path("dev.jsonl")), "--tau", "1.0", "--output", p(&out),
    ]);
    assert_eq!(report["tuples"], 0);
    assert_eq!(report["verbs"], 15);
    assert!(read_predictions(BufReader::new(File::open(&out).unwrap())).unwrap().is_empty());
}

#[test]
fn parse_output_is_deterministic_and_scores_well_on_training_data() {
    let f = fixtures();
    let args = |out: &Path| {
        vec![
            "parse".to_string(),
            "--span-model".into(),
            p(&f.path("span.ckpt")).into(),
            "--qgen-model".into(),
            p(&f.path("qgen.ckpt")).into(),
            "--input".into(),
            p(&f.path("train.jsonl")).into(),
            "--output".into(),
            p(out).into(),
        ]
    };
    let (a, b) = (f.path("parse-a.jsonl"), f.path("parse-b.jsonl"));
    for out in [&a, &b] {
        let r = run(&args(out).iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let report =
        run_json(&["evaluate", "--exact", "--joint", "--gold", p(&f.path("train.jsonl")), "--predictions", p(&a)]);
    assert!(report["joint"]["f1"].as_f64().unwrap() > 0.9, "{report:#}");

    let stdout = run(&args(&a)[..7].iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(stdout.code, 0);
    assert_eq!(stdout.stdout, fs::read_to_string(&a).unwrap());
}

/// Exhaustive grid evaluation with exact matching, written independently of
/// the library's metric code: a predicted span is correct if it equals any
/// gold answer; recall is the largest number of gold questions that can each
/// be paired with a distinct predicted span equal to one of its answers.
fn grid_oracle(detector: &SpanDetector, dev: &[SentenceRecord], step_count: usize) -> (f64, f64) {
    fn best_pairing(gold: &[Vec<(usize, usize)>], predicted: &[(usize, usize)], used: &mut Vec<bool>) -> usize {
        let Some((first, rest)) = gold.split_first() else { return 0 };
        let mut best = best_pairing(rest, predicted, used);
        for (i, p) in predicted.iter().enumerate() {
            if !used[i] && first.contains(p) {
                used[i] = true;
                best = best.max(1 + best_pairing(rest, predicted, used));
                used[i] = false;
            }
        }
        best
    }
    let instances = verb_instances(dev, &ValidityPolicy::default());
    let scored: Vec<_> = instances.iter().map(|i| detector.score(&i.tokens, i.verb_index).unwrap()).collect();
    let mut best = (f64::NAN, -1.0);
    for k in 0..=step_count {
        let tau = k as f64 / step_count as f64;
        let (mut predicted, mut correct, mut gold_total, mut matched) = (0usize, 0usize, 0usize, 0usize);
        for (inst, spans) in instances.iter().zip(&scored) {
            let chosen: Vec<(usize, usize)> =
                spans.iter().filter(|s| s.probability > tau).map(|s| (s.span.start, s.span.end)).collect();
            let gold: Vec<Vec<(usize, usize)>> =
                inst.gold.iter().map(|q| q.spans.iter().map(|s| (s.start, s.end)).collect()).collect();
            predicted += chosen.len();
            correct += chosen.iter().filter(|c| gold.iter().any(|g| g.contains(c))).count();
            gold_total += gold.len();
            matched += best_pairing(&gold, &chosen, &mut vec![false; chosen.len()]);
        }
        let (precision, recall) = if predicted == 0 {
            (1.0, 0.0)
        } else {
            (correct as f64 / predicted as f64, if gold_total == 0 { 1.0 } else { matched as f64 / gold_total as f64 })
        };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        if f1 > best.1 {
            best = (tau, f1);
        }
    }
    best
}

#[test]
fn tune_tau_matches_exhaustive_grid_search() {
    let f = fixtures();
    let detector = SpanDetector::load(f.path("span.ckpt")).unwrap();
    let dev = load_corpus(f.path("dev.jsonl")).unwrap();
    for (step, count) in [("0.01", 100), ("0.25", 4)] {
        let report = run_json(&[
            "tune-tau", "--exact", "--span-model", p(&f.path("span.ckpt")), "--dev", p(&f.path("dev.jsonl")),
            "--step", step,
        ]);
        let (tau, f1) = grid_oracle(&detector, &dev, count);
        assert_eq!(report["gridPoints"], count + 1);
        assert!((report["tau"].as_f64().unwrap() - tau).abs() < 1e-12, "step {step}: {report:#} vs oracle {tau}");
        assert!((report["f1"].as_f64().unwrap() - f1).abs() < 1e-12);
    }
}

#[test]
fn expand_merge_and_stats_pipeline() {
    let f = fixtures();
    let mut bare = load_corpus(f.path("dev.jsonl")).unwrap();
    let original = bare.clone();
    for r in &mut bare[..5] {
        for e in &mut r.verb_entries {
            e.qa_pairs.clear();
        }
    }
    let corpus = f.path("expand-corpus.jsonl");
    save_corpus(&corpus, &bare).unwrap();
    let candidates = f.path("candidates.jsonl");
    let report = run_json(&[
        "expand", "--span-model", p(&f.path("span.ckpt")), "--qgen-model", p(&f.path("qgen.ckpt")), "--corpus",
        p(&corpus), "--output", p(&candidates), "--fold", "2",
    ]);
    assert_eq!(report["tau"], 0.2);
    assert_eq!(report["modelId"], "span");
    let kept: Vec<CandidateQa> = fs::read_to_string(&candidates)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(report["kept"], kept.len());
    assert!(kept.len() >= 5, "{report:#}");
    assert!(report["generated"].as_u64().unwrap() >= kept.len() as u64);
    let bare_ids: BTreeSet<&str> = bare[..5].iter().map(|r| r.sentence_id.as_str()).collect();
    assert!(kept.iter().all(|c| bare_ids.contains(c.sentence_id.as_str()) && c.provenance.fold == Some(2)));

    let judged = f.path("judged.jsonl");
    let mut w = File::create(&judged).unwrap();
    for (i, c) in kept.iter().enumerate() {
        let mut judgments: Vec<Judgment> =
            ["e1", "e2", "e3"].iter().map(|w| Judgment::valid(*w, c.spans.clone())).collect();
        if i % 2 == 1 {
            judgments[2] = Judgment::invalid("e3");
        }
        let line = JudgedCandidate { candidate: c.clone(), judgments };
        writeln!(w, "{}", serde_json::to_string(&line).unwrap()).unwrap();
    }
    drop(w);
    let (merged_path, negatives) = (f.path("merged.jsonl"), f.path("negatives.jsonl"));
    let report = run_json(&[
        "merge", "--corpus", p(&corpus), "--judged", p(&judged), "--output", p(&merged_path), "--negatives",
        p(&negatives),
    ]);
    let accepted = kept.len().div_ceil(2);
    assert_eq!(report["merged"], accepted);
    assert_eq!(report["rejected"], kept.len() - accepted);
    let merged = load_corpus(&merged_path).unwrap();
    let count = |c: &[SentenceRecord]| c.iter().flat_map(|r| &r.verb_entries).map(|e| e.qa_pairs.len()).sum::<usize>();
    assert_eq!(count(&merged), count(&bare) + accepted);
    assert_eq!(count(&load_corpus(&negatives).unwrap()), kept.len() - accepted);

    let stats = run_json(&["stats", "--corpus", p(&merged_path)]);
    let cost = corpus_cost(&merged, &ValidityPolicy::default()).unwrap();
    assert_eq!(stats["cost"]["totalCents"], cost.total_cents);
    assert_eq!(stats["cost"]["expansionCents"], cost.expansion_cents);
    assert_eq!(stats["stats"]["total"]["sentences"], original.len());
}

#[test]
fn jackknife_partitions_sentences() {
    let f = fixtures();
    let out = f.path("folds");
    let report = run_json(&["jackknife", "--corpus", p(&f.path("train.jsonl")), "-k", "5", "--out-dir", p(&out)]);
    let corpus = load_corpus(f.path("train.jsonl")).unwrap();
    let all: BTreeSet<String> = corpus.iter().map(|r| r.sentence_id.clone()).collect();
    let mut held: Vec<String> = Vec::new();
    for fold in report["folds"].as_array().unwrap() {
        let train: BTreeSet<String> =
            load_corpus(fold["trainPath"].as_str().unwrap()).unwrap().into_iter().map(|r| r.sentence_id).collect();
        let heldout: Vec<String> =
            load_corpus(fold["heldoutPath"].as_str().unwrap()).unwrap().into_iter().map(|r| r.sentence_id).collect();
        assert_eq!(heldout.len(), 6);
        assert!(heldout.iter().all(|h| !train.contains(h)));
        assert_eq!(train.len() + heldout.len(), all.len());
        held.extend(heldout);
    }
    held.sort();
    assert_eq!(held, all.into_iter().collect::<Vec<_>>());

    let again = run_json(&["jackknife", "--corpus", p(&f.path("train.jsonl")), "-k", "5", "--out-dir", p(&out)]);
    assert_eq!(again, report);
    let other = f.path("folds-seed");
    run_json(&["jackknife", "--corpus", p(&f.path("train.jsonl")), "--out-dir", p(&other), "--seed", "8"]);
    assert_ne!(
        fs::read(out.join("fold0.heldout.jsonl")).unwrap(),
        fs::read(other.join("fold0.heldout.jsonl")).unwrap()
    );
}

#[test]
fn stats_respects_data_dir_and_filters() {
    let f = fixtures();
    let mut cmd = qasrl();
    cmd.env("QASRL_DATA_DIR", f.dir.path()).current_dir(std::env::temp_dir());
    let r = run_with(cmd, &["stats", "--corpus", "train.jsonl", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_schema("stats", &report);
    assert_eq!(report["stats"]["total"]["sentences"], 30);
    assert_eq!(report["stats"]["total"]["validQuestions"], report["stats"]["total"]["questions"]);

    let science = run_json(&["stats", "--corpus", p(&f.path("train.jsonl")), "--domain", "science"]);
    assert_eq!(science["stats"]["total"]["sentences"], 0);
    let strict = run_json(&["stats", "--corpus", p(&f.path("train.jsonl")), "--rule", "all-of-3"]);
    assert_eq!(strict["stats"]["total"]["validQuestions"], 0);
}

#[test]
fn grad_check_passes() {
    let report = run_json(&["grad-check", "--instances", "2"]);
    assert_eq!(report["passed"], true);
    assert_eq!(report["heads"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_input_exits_with_2() {
    let f = fixtures();
    let train = f.path("train.jsonl");
    let missing = run(&["stats", "--corpus", "/nonexistent/corpus.jsonl", "--json"]);
    assert_eq!(missing.code, 2);
    let report: Value = serde_json::from_str(&missing.stdout).unwrap();
    assert_schema("error", &report);
    assert_eq!(report["error"]["kind"], "validation");

    let unknown = run(&["stats", "--corpus", p(&train), "--bogus"]);
    assert_eq!(unknown.code, 2);
    assert!(unknown.stderr.contains("--bogus") && unknown.stderr.contains("Usage"), "{}", unknown.stderr);
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["evaluate", "--exact", "--iou", "--gold", p(&train), "--predictions", p(&train)]).code, 2);
    assert_eq!(run(&["train-span", "--train", p(&train), "--out", "x.ckpt"]).code, 2);
    assert_eq!(run(&["stats", "--corpus", p(&train), "--rule", "3-of-2"]).code, 2);
    let (span, qgen) = (f.path("span.ckpt"), f.path("qgen.ckpt"));
    let models = ["--span-model", p(&span), "--qgen-model", p(&qgen)];
    assert_eq!(run(&[&["parse", "--input", p(&train), "--tau", "1.5"][..], &models].concat()).code, 2);
    let wrong_model = ["--span-model", p(&qgen), "--qgen-model", p(&qgen)];
    assert_eq!(run(&[&["parse", "--input", p(&train)][..], &wrong_model].concat()).code, 2);
    assert_eq!(
        run(&["tune-tau", "--exact", "--span-model", p(&f.path("span.ckpt")), "--dev", p(&train), "--step", "0"]).code,
        2
    );
    assert_eq!(run(&["jackknife", "--corpus", p(&f.path("dev.jsonl")), "-k", "16", "--out-dir", p(&f.path("j"))]).code, 2);

    let broken = f.path("broken.jsonl");
    fs::write(&broken, "{\"sentenceId\": 1}\n").unwrap();
    let r = run(&["stats", "--corpus", p(&broken)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 1"), "{}", r.stderr);
    assert_eq!(run(&["merge", "--corpus", p(&train), "--judged", p(&broken), "--output", p(&f.path("m.jsonl"))]).code, 2);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut body = String::new();
    stream.read_to_string(&mut body).ok()?;
    Some(body)
}

#[test]
fn serve_answers_requests_and_reports_on_shutdown() {
    let f = fixtures();
    let port = free_port();
    let state = f.path("service-state");
    let mut child = qasrl()
        .args([
            "serve", "--port", &port.to_string(), "--state-dir", p(&state), "--load", p(&f.path("dev.jsonl")), "--json",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let response = loop {
        if let Some(r) = http_get(port, "/api/task/next?worker=w1&kind=generation") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let mut stdout = String::new();
    child.stdout.take().unwrap().read_to_string(&mut stdout).unwrap();
    assert!(child.wait().unwrap().success());
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_schema("serve", &report);
    assert_eq!(report["added"], 15);
    assert_eq!(report["stats"]["sentences"], 15);
    assert_eq!(report["stats"]["tasks"]["generation"]["assigned"], 1);
}
