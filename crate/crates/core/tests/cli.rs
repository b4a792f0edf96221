// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::Command;

use ics_ensemble::dataset::{load_csv, make_paper_splits, write_csv, LabeledSet, LABEL_COLUMN};
use ics_ensemble::ensemble::{fit_ensemble, predict_ensemble, DetectorParams, EnsembleModel, VotingStrategy};
use ics_ensemble::WeightLearner;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_ics-ensemble"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn ics-ensemble");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn head(set: &LabeledSet, n: usize) -> LabeledSet {
    let idx: Vec<usize> = (0..n).collect();
    LabeledSet::new(set.features.select_rows(&idx), set.labels[..n].to_vec(), vec![None; n]).unwrap()
}

/// A temp dir holding a small all-normal `train.csv` (with an all-zero
/// label column) and a labeled `test.csv`.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let splits = make_paper_splits(5);
    write_csv(&head(&splits.train, 2000), dir.path().join("train.csv"), true).unwrap();
    write_csv(&head(&splits.tests[0], 1500), dir.path().join("test.csv"), true).unwrap();
    dir
}

fn train(dir: &Path, strategy: &str, out: &str, extra: &[&str]) -> Run {
    let mut args = vec!["train", "--seed", "3", "--train", "train.csv", "--strategy", strategy, "--out", out];
    args.extend_from_slice(extra);
    run(dir, &args)
}

#[test]
fn simulate_writes_table_sizes_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // default invocation writes into the working directory
    assert_eq!(run(a.path(), &["simulate", "--seed", "7"]).code, 0);
    assert_eq!(run(b.path(), &["simulate", "--seed", "7", "--out", "data"]).code, 0);
    for name in ["train.csv", "test1.csv", "test2.csv", "test3.csv", "test4.csv", "test5.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join("data").join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let test5 = std::fs::read_to_string(a.path().join("test5.csv")).unwrap();
    assert_eq!(test5.lines().count(), 18270 + 1);
    assert!(test5.lines().next().unwrap().ends_with(LABEL_COLUMN));
}

#[test]
fn simulate_into_unwritable_location_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "a file, not a directory").unwrap();
    let r = run(dir.path(), &["simulate", "--out", "blocker/sub"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("error"), "{}", r.stderr);
}

#[test]
fn train_stacking_embeds_meta_defaults() {
    let dir = workspace();
    let r = train(dir.path(), "stacking", "m.json", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("STACKING"));
    assert!(r.stdout.contains("score range"));
    let model = EnsembleModel::load(dir.path().join("m.json")).unwrap();
    match model.strategy {
        VotingStrategy::Stacking { meta } => {
            assert_eq!((meta.n_estimators, meta.max_samples, meta.contamination), (100, 256, 0.007));
        }
        other => panic!("unexpected strategy {other:?}"),
    }
}

#[test]
fn train_weighted_knn_stores_unit_interval_weights() {
    let dir = workspace();
    let r = train(dir.path(), "weighted", "m.json", &["--learner", "knn"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("weights:"));
    let model = EnsembleModel::load(dir.path().join("m.json")).unwrap();
    let w = model.weights().unwrap();
    assert_eq!(w.len(), 3);
    assert!(w.iter().all(|x| (0.0..=1.0).contains(x)), "{w:?}");
}

#[test]
fn anomaly_labels_in_training_file_are_ignored_with_warning() {
    let dir = workspace();
    let r = run(dir.path(), &["train", "--train", "test.csv", "--strategy", "soft", "--out", "m.json"]);
    assert_eq!(r.code, 0);
    assert!(r.stderr.contains("labels") && r.stderr.contains("ignored"), "{}", r.stderr);
}

#[test]
fn flags_override_config_file_and_unknown_keys_are_rejected() {
    let dir = workspace();
    std::fs::write(dir.path().join("run.cfg"), "strategy = weighted\nlearner = ridge\nseed = 3\n").unwrap();
    let r = run(dir.path(), &["train", "--config", "run.cfg", "--train", "train.csv", "--learner", "ols", "--out", "m.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let model = EnsembleModel::load(dir.path().join("m.json")).unwrap();
    assert_eq!(model.strategy, VotingStrategy::Weighted { learner: WeightLearner::Ols });

    std::fs::write(dir.path().join("bad.cfg"), "strategy = soft\nfancy_option = 1\n").unwrap();
    let r = run(dir.path(), &["train", "--config", "bad.cfg", "--train", "train.csv", "--out", "m.json"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("fancy_option"));

    let r = train(dir.path(), "soft", "m.json", &["--ocnn-nu", "2"]);
    assert_eq!(r.code, 2);
    let r = train(dir.path(), "soft", "m.json", &["--iforest-n-estimators", "many"]);
    assert_eq!(r.code, 2);
    assert_eq!(run(dir.path(), &["train", "--config", "missing.cfg"]).code, 3);
}

#[test]
fn predictions_match_in_memory_model_bit_for_bit() {
    let dir = workspace();
    assert_eq!(train(dir.path(), "stacking", "a.json", &[]).code, 0);
    assert_eq!(train(dir.path(), "stacking", "b.json", &[]).code, 0);
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert!(a == std::fs::read(dir.path().join("b.json")).unwrap(), "training is not deterministic");

    let train_set = load_csv(dir.path().join("train.csv"), Some(LABEL_COLUMN)).unwrap();
    let (model, _) = fit_ensemble(&train_set.features, &VotingStrategy::stacking(3), &DetectorParams::seeded(3)).unwrap();
    let expected = predict_ensemble(&model, &train_set.features).unwrap();

    let r = run(dir.path(), &["predict", "--model", "a.json", "--input", "train.csv", "--out", "p.csv"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("score,label"));
    let mut n = 0;
    for (line, (score, label)) in lines.zip(expected.scores.iter().zip(&expected.labels)) {
        let (s, l) = line.split_once(',').unwrap();
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), score.to_bits());
        assert_eq!(l.parse::<u8>().unwrap(), label.as_bit());
        n += 1;
    }
    assert_eq!(n, train_set.len());
}

fn fn_rate(stdout: &str) -> f64 {
    let line = stdout.lines().find(|l| l.contains("FN rate")).expect("FN rate line");
    line.split_whitespace().last().unwrap().parse().unwrap()
}

#[test]
fn evaluate_on_own_training_data_respects_contamination() {
    let dir = workspace();
    assert_eq!(train(dir.path(), "stacking", "m.json", &[]).code, 0);
    let r = run(dir.path(), &["evaluate", "--model", "m.json", "--test", "train.csv"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // the meta forest thresholds its own training rows at the 0.007 quantile
    let rate = fn_rate(&r.stdout);
    assert!(rate <= 0.007 + 1.0 / 2000.0, "{rate}");
}

#[test]
fn evaluate_writes_histogram_streams() {
    let dir = workspace();
    assert_eq!(train(dir.path(), "soft", "m.json", &[]).code, 0);
    let r = run(dir.path(), &["evaluate", "--model", "m.json", "--test", "test.csv", "--hist", "h.csv", "--bins", "10"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for key in ["accuracy", "precision", "recall", "f1", "TP="] {
        assert!(r.stdout.contains(key), "missing {key}");
    }
    let text = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "outcome,bin,lower,upper,percent");
    assert_eq!(lines.len(), 1 + 4 * 10);
    for outcome in ["TP", "TN", "FP", "FN"] {
        let pct: Vec<f64> = lines[1..]
            .iter()
            .filter(|l| l.starts_with(&format!("{outcome},")))
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(pct.len(), 10);
        let total: f64 = pct.iter().sum();
        assert!(total == 0.0 || (total - 100.0).abs() < 1e-9, "{outcome}: {total}");
    }
}

#[test]
fn data_errors_exit_4_and_file_errors_exit_3() {
    let dir = workspace();
    assert_eq!(train(dir.path(), "majority", "m.json", &[]).code, 0);
    std::fs::write(dir.path().join("narrow.csv"), "a,b,label\n0,1,0\n1,0,1\n").unwrap();
    let r = run(dir.path(), &["evaluate", "--model", "m.json", "--test", "narrow.csv"]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert_eq!(run(dir.path(), &["predict", "--model", "m.json", "--input", "narrow.csv"]).code, 4);

    assert_eq!(run(dir.path(), &["evaluate", "--model", "nope.json", "--test", "test.csv"]).code, 3);
    std::fs::write(dir.path().join("junk.json"), "{\"format\": \"something else\"}").unwrap();
    assert_eq!(run(dir.path(), &["evaluate", "--model", "junk.json", "--test", "test.csv"]).code, 3);
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(run(dir.path(), &["predict", "--model", "m.json", "--input", "empty.csv"]).code, 3);
}

#[test]
fn compare_needs_two_models() {
    let dir = workspace();
    assert_eq!(train(dir.path(), "soft", "m.json", &[]).code, 0);
    let r = run(dir.path(), &["compare", "--models", "m.json"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("at least 2"));
    assert_eq!(run(dir.path(), &["compare", "--models", "m.json", "m.json", "--resamples", "1"]).code, 2);
}

#[test]
fn compare_prints_table_and_anova_line() {
    let dir = workspace();
    assert_eq!(train(dir.path(), "stacking", "stack.json", &[]).code, 0);
    assert_eq!(train(dir.path(), "majority", "maj.json", &[]).code, 0);
    let r = run(dir.path(), &["compare", "--models", "stack.json", "maj.json", "--resamples", "2", "--out", "c.csv"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("F1 mean/std"));
    assert!(r.stdout.contains("stack (STACKING)") && r.stdout.contains("maj (MAJORITY)"));
    assert!(r.stdout.contains("replicates: 2 per spec x 5 specs"));
    assert!(r.stdout.lines().any(|l| l.starts_with("F=") && l.contains(", p=")));
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
