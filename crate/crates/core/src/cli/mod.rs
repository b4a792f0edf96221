// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Every setting can come from a flag or from a `key=value` file given with
//! `--config`; keys are the long flag names without the dashes and flags win
//! over the file. All randomness is derived from `--seed`.
//!
//! Exit codes: 0 success, 2 usage or invalid configuration, 3 file or I/O
//! problems (including unreadable CSV or model documents), 4 data that does
//! not fit the model (wrong column count and the like).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{load_csv, make_paper_splits, paper_test_specs, write_csv, LABEL_COLUMN};
use crate::detectors::DetectorKind;
use crate::ensemble::{
    fit_ensemble, predict_ensemble, DetectorParams, EnsembleModel, VotingStrategy, WeightLearner,
    DEFAULT_KNN_K, DEFAULT_RIDGE_LAMBDA,
};
use crate::error::Error;
use crate::eval::{compare_models, evaluate_labels, histogram_export, DEFAULT_BINS};
use crate::kvconfig::KvMap;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;

pub const DEFAULT_RESAMPLES: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "ics-ensemble", version, about = "Unsupervised ensemble anomaly detection for PLC process logs")]
struct Cli {
    /// Master seed; per-component seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Flat key=value file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (directory for `simulate`, default the current one).
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write train.csv and test1.csv ... test5.csv.
    Simulate,
    /// Fit the base detectors and a voting strategy on an all-normal CSV.
    Train(Box<TrainArgs>),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Metrics of a saved model on a labeled CSV.
    Evaluate(EvaluateArgs),
    /// Compare saved models on regenerated test replicates.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training CSV.
    #[arg(long)]
    train: Option<String>,
    /// majority | maxscore | soft | weighted | stacking
    #[arg(long)]
    strategy: Option<String>,
    /// Weight learner for `weighted`: rmse | ols | ridge | knn
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    ridge_lambda: Option<String>,
    #[arg(long)]
    knn_k: Option<String>,
    #[arg(long)]
    ocsvm_nu: Option<String>,
    #[arg(long)]
    ocsvm_gamma: Option<String>,
    #[arg(long)]
    ocsvm_tolerance: Option<String>,
    #[arg(long)]
    ocsvm_max_passes: Option<String>,
    #[arg(long)]
    ocnn_hidden_units: Option<String>,
    #[arg(long)]
    ocnn_nu: Option<String>,
    #[arg(long)]
    ocnn_learning_rate: Option<String>,
    #[arg(long)]
    ocnn_epochs: Option<String>,
    #[arg(long)]
    ocnn_quantile_update_every: Option<String>,
    #[arg(long)]
    iforest_n_estimators: Option<String>,
    #[arg(long)]
    iforest_max_samples: Option<String>,
    #[arg(long)]
    iforest_contamination: Option<String>,
    #[arg(long)]
    meta_n_estimators: Option<String>,
    #[arg(long)]
    meta_max_samples: Option<String>,
    #[arg(long)]
    meta_contamination: Option<String>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<String>,
    /// CSV to score; a `label` column, if present, is ignored.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<String>,
    /// Labeled CSV.
    #[arg(long)]
    test: Option<String>,
    /// Write the outcome histogram to this CSV.
    #[arg(long)]
    hist: Option<String>,
    #[arg(long)]
    bins: Option<String>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Two or more model files.
    #[arg(long, num_args = 1..)]
    models: Vec<String>,
    /// Replicates per test-set spec.
    #[arg(long)]
    resamples: Option<String>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::InvalidParams(_) | Error::DegenerateGroups(_) => EXIT_USAGE,
            Error::Io(_) | Error::EmptyFile | Error::MalformedCsv(_) | Error::ModelFormat(_) => EXIT_IO,
            Error::DimensionMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::InvalidData(_)
            | Error::DegenerateMatrix(_) => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

/// Flag values layered over the config file.
struct Settings {
    map: KvMap,
}

impl Settings {
    fn new(file: Option<&Path>, flags: &[(&str, &Option<String>)], allowed: &[&str]) -> Result<Self, CliError> {
        let mut map = match file {
            Some(path) => KvMap::load(path).map_err(|e| match e {
                Error::Io(io) => io_error(path, io),
                other => other.into(),
            })?,
            None => KvMap::default(),
        };
        if let Some(key) = map.keys().find(|k| !allowed.contains(k)) {
            return Err(CliError::usage(format!("unknown config key {key:?}")));
        }
        for (key, value) in flags {
            if let Some(v) = value {
                map.insert(*key, v.clone());
            }
        }
        Ok(Self { map })
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.map.get_parsed(key)?)
    }

    fn or<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<String, CliError> {
        self.map
            .get(key)
            .map(str::to_string)
            .ok_or_else(|| CliError::usage(format!("missing --{}", key.replace('_', "-"))))
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.or("seed", 0)
    }
}

const COMMON_KEYS: [&str; 2] = ["seed", "out"];

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let common = [("seed", &cli.seed), ("out", &cli.out)];
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Simulate => cmd_simulate(&Settings::new(config, &common, &COMMON_KEYS)?),
        Command::Train(a) => {
            let flags = [
                ("train", &a.train),
                ("strategy", &a.strategy),
                ("learner", &a.learner),
                ("ridge_lambda", &a.ridge_lambda),
                ("knn_k", &a.knn_k),
                ("ocsvm_nu", &a.ocsvm_nu),
                ("ocsvm_gamma", &a.ocsvm_gamma),
                ("ocsvm_tolerance", &a.ocsvm_tolerance),
                ("ocsvm_max_passes", &a.ocsvm_max_passes),
                ("ocnn_hidden_units", &a.ocnn_hidden_units),
                ("ocnn_nu", &a.ocnn_nu),
                ("ocnn_learning_rate", &a.ocnn_learning_rate),
                ("ocnn_epochs", &a.ocnn_epochs),
                ("ocnn_quantile_update_every", &a.ocnn_quantile_update_every),
                ("iforest_n_estimators", &a.iforest_n_estimators),
                ("iforest_max_samples", &a.iforest_max_samples),
                ("iforest_contamination", &a.iforest_contamination),
                ("meta_n_estimators", &a.meta_n_estimators),
                ("meta_max_samples", &a.meta_max_samples),
                ("meta_contamination", &a.meta_contamination),
            ];
            let settings = layered(config, &common, &flags)?;
            cmd_train(&settings)
        }
        Command::Predict(a) => {
            let flags = [("model", &a.model), ("input", &a.input)];
            cmd_predict(&layered(config, &common, &flags)?)
        }
        Command::Evaluate(a) => {
            let flags = [("model", &a.model), ("test", &a.test), ("hist", &a.hist), ("bins", &a.bins)];
            cmd_evaluate(&layered(config, &common, &flags)?)
        }
        Command::Compare(a) => {
            let models = (!a.models.is_empty()).then(|| a.models.join(","));
            let flags = [("models", &models), ("resamples", &a.resamples)];
            cmd_compare(&layered(config, &common, &flags)?)
        }
    }
}

fn layered(
    config: Option<&Path>,
    common: &[(&str, &Option<String>)],
    flags: &[(&str, &Option<String>)],
) -> Result<Settings, CliError> {
    let all: Vec<(&str, &Option<String>)> = common.iter().chain(flags).copied().collect();
    let allowed: Vec<&str> = all.iter().map(|(k, _)| *k).collect();
    Settings::new(config, &all, &allowed)
}

fn cmd_simulate(s: &Settings) -> Result<(), CliError> {
    let dir = PathBuf::from(s.or("out", ".".to_string())?);
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let splits = make_paper_splits(s.seed()?);
    let write = |name: &str, set| {
        let path = dir.join(name);
        write_csv(set, &path, true).map_err(|e| match e {
            Error::Io(io) => io_error(&path, io),
            other => other.into(),
        })?;
        println!("wrote {} ({} rows)", path.display(), splits_len(set));
        Ok::<_, CliError>(())
    };
    write("train.csv", &splits.train)?;
    for (i, set) in splits.tests.iter().enumerate() {
        write(&format!("test{}.csv", i + 1), set)?;
    }
    Ok(())
}

fn splits_len(set: &crate::dataset::LabeledSet) -> usize {
    set.len()
}

fn parse_strategy(s: &Settings, seed: u64) -> Result<VotingStrategy, CliError> {
    let strategy = s.required("strategy")?.to_ascii_lowercase();
    let strategy = match strategy.as_str() {
        "majority" => VotingStrategy::Majority,
        "maxscore" | "max" => VotingStrategy::MaxScore,
        "soft" => VotingStrategy::Soft,
        "weighted" => {
            let learner = match s.or("learner", "ols".to_string())?.to_ascii_lowercase().as_str() {
                "rmse" => WeightLearner::Rmse,
                "ols" => WeightLearner::Ols,
                "ridge" => WeightLearner::Ridge { lambda: s.or("ridge_lambda", DEFAULT_RIDGE_LAMBDA)? },
                "knn" => WeightLearner::Knn { k: s.or("knn_k", DEFAULT_KNN_K)? },
                other => return Err(CliError::usage(format!("unknown learner {other:?}"))),
            };
            VotingStrategy::Weighted { learner }
        }
        "stacking" => {
            let mut strategy = VotingStrategy::stacking(seed);
            if let VotingStrategy::Stacking { meta } = &mut strategy {
                meta.n_estimators = s.or("meta_n_estimators", meta.n_estimators)?;
                meta.max_samples = s.or("meta_max_samples", meta.max_samples)?;
                meta.contamination = s.or("meta_contamination", meta.contamination)?;
            }
            strategy
        }
        other => return Err(CliError::usage(format!("unknown strategy {other:?}"))),
    };
    strategy.validate()?;
    Ok(strategy)
}

fn detector_params(s: &Settings, seed: u64) -> Result<DetectorParams, CliError> {
    let mut p = DetectorParams::seeded(seed);
    p.ocsvm.nu = s.or("ocsvm_nu", p.ocsvm.nu)?;
    if let Some(g) = s.get::<f64>("ocsvm_gamma")? {
        p.ocsvm.rbf_gamma = Some(g);
    }
    p.ocsvm.tolerance = s.or("ocsvm_tolerance", p.ocsvm.tolerance)?;
    p.ocsvm.max_passes = s.or("ocsvm_max_passes", p.ocsvm.max_passes)?;
    p.ocnn.hidden_units = s.or("ocnn_hidden_units", p.ocnn.hidden_units)?;
    p.ocnn.nu = s.or("ocnn_nu", p.ocnn.nu)?;
    p.ocnn.learning_rate = s.or("ocnn_learning_rate", p.ocnn.learning_rate)?;
    p.ocnn.epochs = s.or("ocnn_epochs", p.ocnn.epochs)?;
    p.ocnn.quantile_update_every = s.or("ocnn_quantile_update_every", p.ocnn.quantile_update_every)?;
    p.iforest.n_estimators = s.or("iforest_n_estimators", p.iforest.n_estimators)?;
    p.iforest.max_samples = s.or("iforest_max_samples", p.iforest.max_samples)?;
    p.iforest.contamination = s.or("iforest_contamination", p.iforest.contamination)?;
    p.ocsvm.validate()?;
    p.ocnn.validate()?;
    p.iforest.validate()?;
    Ok(p)
}

fn load_set(path: &str, label_column: Option<&str>) -> Result<crate::dataset::LabeledSet, CliError> {
    load_csv(path, label_column).map_err(|e| match e {
        Error::Io(io) => io_error(Path::new(path), io),
        other => CliError::from(other),
    })
}

/// Loads a CSV, taking the `label` column as labels when present.
fn load_maybe_labeled(path: &str) -> Result<(crate::dataset::LabeledSet, bool), CliError> {
    let header = std::fs::read_to_string(path).map_err(|e| io_error(Path::new(path), e))?;
    let has_label = header
        .lines()
        .next()
        .is_some_and(|h| h.split(',').any(|c| c.trim() == LABEL_COLUMN));
    let set = load_set(path, has_label.then_some(LABEL_COLUMN))?;
    Ok((set, has_label))
}

fn load_model(path: &str) -> Result<EnsembleModel, CliError> {
    EnsembleModel::load(path).map_err(|e| match e {
        Error::Io(io) => io_error(Path::new(path), io),
        other => CliError::from(other),
    })
}

fn cmd_train(s: &Settings) -> Result<(), CliError> {
    let seed = s.seed()?;
    let strategy = parse_strategy(s, seed)?;
    let params = detector_params(s, seed)?;
    let out = PathBuf::from(s.required("out")?);
    let (train, labeled) = load_maybe_labeled(&s.required("train")?)?;
    if labeled {
        let note = if train.n_anomalies() > 0 { " (including anomaly labels)" } else { "" };
        eprintln!("warning: training labels{note} are ignored; the fit is unsupervised");
    }

    let (model, warnings) = fit_ensemble(&train.features, &strategy, &params)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    model.save(&out).map_err(|e| match e {
        Error::Io(io) => io_error(&out, io),
        other => other.into(),
    })?;

    println!("strategy: {}", strategy.label());
    println!("training rows: {}", train.len());
    for (kind, range) in DetectorKind::ALL.iter().zip(&model.ranges) {
        println!("{:<8} score range [{:.6e}, {:.6e}]", kind.name(), range.min, range.max);
    }
    if let Some(w) = model.weights() {
        println!("weights: {}", w.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" "));
    }
    if let VotingStrategy::Stacking { meta } = &model.strategy {
        println!(
            "meta-detector: isolation forest, {} trees, max_samples {}, contamination {}",
            meta.n_estimators, meta.max_samples, meta.contamination
        );
    }
    println!("model written to {}", out.display());
    Ok(())
}

fn open_out(path: Option<String>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            let file = File::create(&p).map_err(|e| io_error(Path::new(&p), e))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn cmd_predict(s: &Settings) -> Result<(), CliError> {
    let model = load_model(&s.required("model")?)?;
    let (set, _) = load_maybe_labeled(&s.required("input")?)?;
    let pred = predict_ensemble(&model, &set.features)?;
    let out_path = s.map.get("out").map(str::to_string);
    let mut out = open_out(out_path.clone())?;
    let write = |out: &mut Box<dyn Write>| -> std::io::Result<()> {
        writeln!(out, "score,label")?;
        for (score, label) in pred.scores.iter().zip(&pred.labels) {
            writeln!(out, "{score},{}", label.as_bit())?;
        }
        out.flush()
    };
    match write(&mut out) {
        // A closed downstream pipe (`| head`) is not a failure.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe && out_path.is_none() => Ok(()),
        r => r.map_err(|e| io_error(Path::new(out_path.as_deref().unwrap_or("<stdout>")), e)),
    }
}

fn cmd_evaluate(s: &Settings) -> Result<(), CliError> {
    let model = load_model(&s.required("model")?)?;
    let test_path = s.required("test")?;
    let (set, labeled) = load_maybe_labeled(&test_path)?;
    if !labeled {
        eprintln!("warning: {test_path} has no {LABEL_COLUMN} column; every row is treated as normal");
    }
    let pred = predict_ensemble(&model, &set.features)?;
    let report = evaluate_labels(&set.labels, &pred.labels)?;
    let c = report.counts;
    let normals = c.tp + c.fn_;
    let mut text = format!(
        "strategy: {}\nrows: {}\nTP={} TN={} FP={} FN={}\naccuracy  {:.6}\nprecision {:.6}\nrecall    {:.6}\nf1        {:.6}\n",
        model.strategy.label(),
        set.len(),
        c.tp,
        c.tn,
        c.fp,
        c.fn_,
        report.accuracy,
        report.precision,
        report.recall,
        report.f1,
    );
    if normals > 0 {
        text += &format!("normal rows flagged (FN rate) {:.6}\n", c.fn_ as f64 / normals as f64);
    }
    if report.undefined {
        text += "note: some ratios had a zero denominator and are reported as 0\n";
    }
    print!("{text}");
    if let Some(out) = s.map.get("out") {
        std::fs::write(out, &text).map_err(|e| io_error(Path::new(out), e))?;
    }
    if let Some(hist_path) = s.map.get("hist") {
        let bins = s.or("bins", DEFAULT_BINS)?;
        let hist = histogram_export(&pred.scores, &set.labels, &pred.labels, bins)?;
        let file = File::create(hist_path).map_err(|e| io_error(Path::new(hist_path), e))?;
        hist.write_csv(BufWriter::new(file))?;
        println!("histogram written to {hist_path}");
    }
    Ok(())
}

fn cmd_compare(s: &Settings) -> Result<(), CliError> {
    let paths: Vec<String> = s
        .map
        .get("models")
        .map(|m| m.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
        .unwrap_or_default();
    if paths.len() < 2 {
        return Err(CliError::usage(format!("compare needs at least 2 models, got {}", paths.len())));
    }
    let resamples = s.or("resamples", DEFAULT_RESAMPLES)?;
    if resamples < 2 {
        return Err(CliError::usage("--resamples must be at least 2"));
    }
    let mut models = Vec::new();
    for path in &paths {
        let model = load_model(path)?;
        let stem = Path::new(path).file_stem().map_or(path.clone(), |s| s.to_string_lossy().into_owned());
        models.push((format!("{stem} ({})", model.strategy.label()), model));
    }
    let comparison = compare_models(&models, &paper_test_specs(), resamples, s.seed()?)?;
    print!("{}", comparison.to_text());
    if let Some(out) = s.map.get("out") {
        let file = File::create(out).map_err(|e| io_error(Path::new(out), e))?;
        comparison.write_csv(BufWriter::new(file))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::from(Error::InvalidConfig("x".into())).code, EXIT_USAGE);
        assert_eq!(CliError::from(Error::MalformedCsv("x".into())).code, EXIT_IO);
        assert_eq!(CliError::from(Error::DimensionMismatch { expected: 1, got: 2 }).code, EXIT_DATA);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["ics-ensemble"]), EXIT_USAGE);
        assert_eq!(run(["ics-ensemble", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["ics-ensemble", "train", "--strategy", "soft"]), EXIT_USAGE);
        assert_eq!(run(["ics-ensemble", "compare", "--models", "a.json"]), EXIT_USAGE);
    }
}
