//! Command-line interface.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 I/O error,
//! 4 numerical divergence.

pub mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, ErrorClass, Result};
use crate::metrics::{evaluate, quartiles, rpd_from_std, rpiq_from_iq, wasserstein, StdevKind};
use crate::models::CubistOptions;
use crate::neural::{find_peaks, CnnConfig, MlpConfig, TrainConfig, PEAK_SEPARATION_NM};
use crate::preprocess::{apply_pipeline, PreprocessPipeline, SgParams, Step};
use crate::spectral::{SpectralDataset, SpectrumKind};
use crate::store::{
    adapt_kssl, adapt_lucas, fit, load_canonical, load_model, load_reference_table1, merge, save_canonical,
    save_model, write_atomic, xrd_comparison, AdapterOptions, FitOptions, ModelKind, ReflectanceUnit,
};
use crate::synth::PlantedSignal;

#[derive(Debug, Parser)]
#[command(name = "carbospec", version, about = "Soil carbonate prediction from NIR spectra")]
pub struct Cli {
    /// Worker threads for data-parallel steps.
    #[arg(long, global = true, env = "CARBOSPEC_THREADS")]
    pub threads: Option<usize>,
    /// Print reports as JSON instead of key=value lines.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a library export or canonical CSV into a canonical CSV.
    Ingest(IngestArgs),
    /// Concatenate two canonical CSVs.
    Merge(MergeArgs),
    /// Label quartiles and the Wasserstein distance between two datasets.
    Stats(StatsArgs),
    /// Fit a model and write it to a model file.
    Train(TrainArgs),
    /// Accuracy metrics for a model, a pairs file or the bundled table.
    Evaluate(EvaluateArgs),
    /// Predict carbonate content for every sample of a dataset.
    Predict(PredictArgs),
    /// Gradient saliency of a neural model, rendered as SVG.
    Saliency(SaliencyArgs),
    /// Plot one spectrum as SVG.
    Plot(PlotArgs),
    /// Carbonate total from XRD crystalline content.
    Xrd(XrdArgs),
    /// Write a synthetic planted-signal dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Reflectance,
    Absorbance,
}

impl From<KindArg> for SpectrumKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Reflectance => SpectrumKind::ReflectancePct,
            KindArg::Absorbance => SpectrumKind::Absorbance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Canonical,
    Kssl,
    Lucas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Percent,
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Plsr,
    Cubist,
    Lssvm,
    Mlp,
    Cnn,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Plsr => ModelKind::Plsr,
            ModelArg::Cubist => ModelKind::Cubist,
            ModelArg::Lssvm => ModelKind::Lssvm,
            ModelArg::Mlp => ModelKind::Mlp,
            ModelArg::Cnn => ModelKind::Cnn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SgArg {
    None,
    Sg1,
    Sg2,
}

impl SgArg {
    fn params(self) -> Option<SgParams> {
        match self {
            SgArg::None => None,
            SgArg::Sg1 => Some(SgParams::SG1),
            SgArg::Sg2 => Some(SgParams::SG2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StdevArg {
    Population,
    Sample,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: FormatArg,
    /// Spectrum kind of a canonical input.
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
    /// Reflectance unit of a KSSL export (required for KSSL).
    #[arg(long, value_enum)]
    pub unit: Option<UnitArg>,
    #[arg(long)]
    pub id_column: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub wavelength_prefix: Option<String>,
    /// Rejection log path (default: `<output>.rejections.txt`).
    #[arg(long)]
    pub rejections: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub a: PathBuf,
    pub b: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "model", value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Savitzky–Golay step (default: sg2 for neural models, sg1 otherwise).
    #[arg(long, value_enum)]
    pub sg: Option<SgArg>,
    /// Skip per-spectrum min-max normalisation.
    #[arg(long)]
    pub no_minmax: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Share of samples used for fitting; the rest is held out.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long)]
    pub no_shuffle: bool,
    #[arg(long, default_value_t = crate::models::DEFAULT_COMPONENTS)]
    pub components: usize,
    #[arg(long, default_value_t = crate::models::DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10)]
    pub min_leaf: usize,
    #[arg(long)]
    pub smoothing: bool,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.97)]
    pub decay: f64,
    /// Share of the fitting samples used for snapshot selection.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Metrics log path (default: `<output>.log`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `table1` for the bundled reference pairs, or a CSV with observed and
    /// predicted columns.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
    /// Row-check mode: RPD and RPIQ for each given RMSE.
    #[arg(long = "rmse", num_args = 1..)]
    pub rmse: Vec<f64>,
    #[arg(long, default_value_t = 6.03)]
    pub obs_std: f64,
    #[arg(long, default_value_t = 9.42)]
    pub iq: f64,
    #[arg(long, value_enum, default_value = "population")]
    pub stdev: StdevArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
    /// Output CSV (default: standard output).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "absorbance")]
    pub kind: KindArg,
    /// Sample to plot (default: the first).
    #[arg(long)]
    pub sample: Option<String>,
    /// Savitzky–Golay filter applied before plotting.
    #[arg(long, value_enum, default_value = "none")]
    pub sg: SgArg,
    /// Draw dashed markers at carbonate absorption bands.
    #[arg(long)]
    pub markers: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct XrdArgs {
    /// Crystalline carbonate content, wt%.
    #[arg(long, requires = "ci")]
    pub crystalline: Option<f64>,
    /// Crystalline index in (0, 1].
    #[arg(long, requires = "crystalline")]
    pub ci: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 3e-3)]
    pub noise: f64,
}

/// Settings of one `train` run, written next to the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub split: Split,
    pub model: String,
    pub pipeline: PreprocessPipeline,
    pub components: usize,
    pub gamma: f64,
    pub cubist: CubistOptions,
    pub mlp: MlpConfig,
    pub cnn: CnnConfig,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    pub verbosity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_fraction: f64,
    pub shuffle: bool,
}

/// Ordered report printed as `key=value` lines or one JSON object.
#[derive(Debug, Default)]
struct Report(Vec<(String, Value)>);

impl Report {
    fn put(&mut self, key: impl Into<String>, v: impl Into<Value>) {
        self.0.push((key.into(), v.into()));
    }

    fn render(&self, as_json: bool) -> String {
        if as_json {
            let map: serde_json::Map<String, Value> = self.0.iter().cloned().collect();
            format!("{}\n", serde_json::to_string_pretty(&Value::Object(map)).expect("report serialises"))
        } else {
            let mut s = String::new();
            for (k, v) in &self.0 {
                let _ = match v {
                    Value::String(t) => writeln!(s, "{k}={t}"),
                    other => writeln!(s, "{k}={other}"),
                };
            }
            s
        }
    }
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(if v > 0.0 { "inf" } else { "-inf" })
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Io => 3,
        ErrorClass::Divergence => 4,
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = cli.threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command and return its standard output.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, cli.json),
        Command::Merge(a) => cmd_merge(a, cli.json),
        Command::Stats(a) => cmd_stats(a, cli.json),
        Command::Train(a) => cmd_train(a, cli),
        Command::Evaluate(a) => cmd_evaluate(a, cli.json),
        Command::Predict(a) => cmd_predict(a),
        Command::Saliency(a) => cmd_saliency(a, cli.json),
        Command::Plot(a) => cmd_plot(a, cli.json),
        Command::Xrd(a) => cmd_xrd(a, cli.json),
        Command::Synth(a) => cmd_synth(a, cli.json),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_ingest(a: &IngestArgs, as_json: bool) -> Result<String> {
    let base = match a.format {
        FormatArg::Kssl => AdapterOptions::kssl(),
        _ => AdapterOptions::lucas(),
    };
    let opts = AdapterOptions {
        id_column: a.id_column.clone().unwrap_or(base.id_column),
        label_column: a.label_column.clone().unwrap_or(base.label_column),
        wavelength_prefix: a.wavelength_prefix.clone().unwrap_or(base.wavelength_prefix),
        unit: a.unit.map(|u| match u {
            UnitArg::Percent => ReflectanceUnit::Percent,
            UnitArg::Fraction => ReflectanceUnit::Fraction,
        }),
    };
    let (d, log) = match a.format {
        FormatArg::Canonical => (load_canonical(&a.input, a.kind.into())?, Default::default()),
        FormatArg::Kssl => adapt_kssl(&a.input, &opts)?,
        FormatArg::Lucas => adapt_lucas(&a.input, &opts)?,
    };
    save_canonical(&d, &a.output)?;
    let rej_path = a.rejections.clone().unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".rejections.txt");
        PathBuf::from(p)
    });
    write_atomic(&rej_path, crate::spectral::RejectionLog::to_text(&log).as_bytes())?;
    let mut r = Report::default();
    r.put("samples", d.len());
    r.put("rejected", log.len());
    r.put("kind", d.kind().to_string());
    r.put("output", path_str(&a.output));
    r.put("rejections", path_str(&rej_path));
    Ok(r.render(as_json))
}

fn cmd_merge(a: &MergeArgs, as_json: bool) -> Result<String> {
    let da = load_canonical(&a.a, a.kind.into())?;
    let db = load_canonical(&a.b, a.kind.into())?;
    let (m, report) = merge(&da, &db)?;
    save_canonical(&m, &a.output)?;
    let mut r = Report::default();
    r.put("n_a", report.n_a);
    r.put("n_b", report.n_b);
    r.put("n_total", report.n_total);
    r.put("label_wasserstein", report.label_wasserstein.map_or(Value::String("NA".into()), num));
    r.put("output", path_str(&a.output));
    Ok(r.render(as_json))
}

fn finite_labels(d: &SpectralDataset) -> Vec<f64> {
    d.labels().iter().copied().filter(|v| v.is_finite()).collect()
}

fn put_label_summary(r: &mut Report, prefix: &str, labels: &[f64]) -> Result<()> {
    r.put(format!("{prefix}.n"), labels.len());
    let q = quartiles(labels)?;
    r.put(format!("{prefix}.q1"), num(q.q1));
    r.put(format!("{prefix}.q2"), num(q.q2));
    r.put(format!("{prefix}.q3"), num(q.q3));
    r.put(format!("{prefix}.iq"), num(q.iq));
    Ok(())
}

fn cmd_stats(a: &StatsArgs, as_json: bool) -> Result<String> {
    let la = finite_labels(&load_canonical(&a.a, a.kind.into())?);
    let mut r = Report::default();
    put_label_summary(&mut r, "a", &la)?;
    if let Some(b) = &a.b {
        let lb = finite_labels(&load_canonical(b, a.kind.into())?);
        put_label_summary(&mut r, "b", &lb)?;
        r.put("wasserstein", num(wasserstein(&la, &lb, 1)?));
    }
    Ok(r.render(as_json))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

/// Seeded split into fitting and held-out rows.
pub fn split_rows(n: usize, split: Split, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(split.train_fraction > 0.0 && split.train_fraction <= 1.0) {
        return Err(Error::InvalidParams(format!("train fraction {} must be in (0, 1]", split.train_fraction)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if split.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let n_train = ((n as f64 * split.train_fraction).round() as usize).clamp(1, n.max(1));
    let test = order.split_off(n_train.min(n));
    Ok((order, test))
}

fn cmd_train(a: &TrainArgs, cli: &Cli) -> Result<String> {
    let kind: ModelKind = a.model.into();
    let neural = matches!(kind, ModelKind::Mlp | ModelKind::Cnn);
    let sg = a.sg.unwrap_or(if neural { SgArg::Sg2 } else { SgArg::Sg1 });
    let input_kind: SpectrumKind = a.kind.into();
    let mut steps = Vec::new();
    if input_kind == SpectrumKind::ReflectancePct {
        steps.push(Step::Absorbance);
    }
    if !a.no_minmax {
        steps.push(Step::MinMaxNormalize);
    }
    if let Some(p) = sg.params() {
        steps.push(Step::SavitzkyGolay(p));
    }
    let pipeline = PreprocessPipeline::new(steps)?;
    let split = Split { train_fraction: a.train_fraction, shuffle: !a.no_shuffle };
    let opts = FitOptions {
        components: a.components,
        cubist: CubistOptions { min_leaf: a.min_leaf, smoothing: a.smoothing, ..Default::default() },
        gamma: a.gamma,
        mlp: MlpConfig { seed: a.seed, ..Default::default() },
        cnn: CnnConfig { seed: a.seed, ..Default::default() },
        train: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            lr0: a.lr,
            decay: a.decay,
            val_fraction: a.val_fraction,
            seed: a.seed,
        },
    };
    let run_config = RunConfig {
        seed: a.seed,
        split,
        model: kind.name().into(),
        pipeline: pipeline.clone(),
        components: opts.components,
        gamma: opts.gamma,
        cubist: opts.cubist,
        mlp: opts.mlp.clone(),
        cnn: opts.cnn.clone(),
        train: opts.train,
        output_dir: a.output.parent().map(Path::to_path_buf).unwrap_or_default(),
        verbosity: cli.verbose,
    };

    let d = load_canonical(&a.data, input_kind)?;
    let (train_rows, test_rows) = split_rows(d.len(), split, a.seed)?;
    let train_set = d.subset(&train_rows)?;
    let fitted = fit(kind, &train_set, &pipeline, &opts)?;
    save_model(&fitted.model, &a.output)?;
    let cfg_path = sibling(&a.output, ".run.json");
    let cfg_json = serde_json::to_string_pretty(&run_config).expect("run config serialises") + "\n";
    write_atomic(&cfg_path, cfg_json.as_bytes())?;

    let mut log = String::new();
    if let Some(l) = &fitted.log {
        log.push_str(&l.to_text());
        let _ = writeln!(log, "best_epoch={}", fitted.best_epoch.unwrap_or(0));
    }
    let mut r = Report::default();
    r.put("model", kind.name());
    r.put("train_samples", train_rows.len());
    r.put("holdout_samples", test_rows.len());
    if test_rows.len() >= 4 {
        let test = d.subset(&test_rows)?;
        let pred = fitted.model.predict(&test)?;
        let report = evaluate(test.labels(), &pred, StdevKind::Population)?;
        for line in report.to_key_value().lines() {
            let _ = writeln!(log, "holdout.{line}");
        }
        r.put("holdout.r2", num(report.r2));
        r.put("holdout.rmse", num(report.rmse));
        r.put("holdout.rpd", num(report.rpd));
        r.put("holdout.rpiq", num(report.rpiq));
        r.put("holdout.band", report.band.to_string());
    } else {
        log.push_str("holdout=skipped\n");
    }
    let log_path = a.log.clone().unwrap_or_else(|| sibling(&a.output, ".log"));
    write_atomic(&log_path, log.as_bytes())?;
    r.put("output", path_str(&a.output));
    r.put("log", path_str(&log_path));
    r.put("run_config", path_str(&cfg_path));
    Ok(r.render(cli.json))
}

/// `(observed, predicted)` columns of a pairs CSV.
fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { row: 1, column: 0, message: format!("{other:?}") },
    })?;
    let header = rdr.headers().map_err(|e| Error::Parse { row: 1, column: 0, message: e.to_string() })?.clone();
    let find = |names: &[&str]| header.iter().position(|h| names.contains(&h.trim().to_ascii_lowercase().as_str()));
    let obs_col = find(&["obs", "observed", "exp", "experimental"]);
    let pred_col = find(&["pred", "predicted"]);
    let (obs_col, pred_col) = match (obs_col, pred_col) {
        (Some(o), Some(p)) => (o, p),
        (o, p) => {
            let mut missing = Vec::new();
            if o.is_none() {
                missing.push("observed".to_string());
            }
            if p.is_none() {
                missing.push("predicted".to_string());
            }
            return Err(Error::MissingColumns(missing));
        }
    };
    let (mut obs, mut pred) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, column: 0, message: e.to_string() })?;
        for (col, out) in [(obs_col, &mut obs), (pred_col, &mut pred)] {
            let cell = rec.get(col).unwrap_or("").trim();
            let v = crate::store::canonical::parse_value(cell).map_err(|message| Error::Parse { row, column: col, message })?;
            out.push(v);
        }
    }
    Ok((obs, pred))
}

fn cmd_evaluate(a: &EvaluateArgs, as_json: bool) -> Result<String> {
    let stdev_kind = match a.stdev {
        StdevArg::Population => StdevKind::Population,
        StdevArg::Sample => StdevKind::Sample,
    };
    let modes = [a.pairs.is_some(), a.model.is_some() || a.data.is_some(), !a.rmse.is_empty()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(Error::InvalidParams("choose exactly one of --pairs, --model/--data or --rmse".into()));
    }
    if !a.rmse.is_empty() {
        let mut r = Report::default();
        r.put("obs_std", num(a.obs_std));
        r.put("iq", num(a.iq));
        for (i, &rmse) in a.rmse.iter().enumerate() {
            let rpd = rpd_from_std(a.obs_std, rmse)?;
            let rpiq = rpiq_from_iq(a.iq, rmse)?;
            r.put(format!("row{}.rmse", i + 1), num(rmse));
            r.put(format!("row{}.rpd", i + 1), format!("{rpd:.2}"));
            r.put(format!("row{}.rpiq", i + 1), format!("{rpiq:.2}"));
        }
        return Ok(r.render(as_json));
    }
    let (obs, pred) = if let Some(p) = &a.pairs {
        if p == "table1" {
            let t = load_reference_table1();
            (t.experimental, t.predicted)
        } else {
            read_pairs(Path::new(p))?
        }
    } else {
        let (Some(m), Some(d)) = (&a.model, &a.data) else {
            return Err(Error::InvalidParams("--model and --data must be given together".into()));
        };
        let model = load_model(m)?;
        let data = load_canonical(d, a.kind.into())?;
        let pred = model.predict(&data)?;
        let keep: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i].is_finite()).collect();
        (keep.iter().map(|&i| data.labels()[i]).collect(), keep.iter().map(|&i| pred[i]).collect())
    };
    let report = evaluate(&obs, &pred, stdev_kind)?;
    Ok(if as_json { report.to_json() + "\n" } else { report.to_key_value() })
}

fn cmd_predict(a: &PredictArgs) -> Result<String> {
    let model = load_model(&a.model)?;
    let data = load_canonical(&a.data, a.kind.into())?;
    let pred = model.predict(&data)?;
    let mut out = String::from("sample_id,predicted_g100g\n");
    for (id, p) in data.sample_ids().zip(&pred) {
        let _ = writeln!(out, "{id},{p}");
    }
    match &a.output {
        Some(path) => {
            write_atomic(path, out.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(out),
    }
}

fn mean_spectrum(x: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.column_iter().map(|c| c.sum() / n).collect()
}

fn cmd_saliency(a: &SaliencyArgs, as_json: bool) -> Result<String> {
    let model = load_model(&a.model)?;
    let data = load_canonical(&a.data, a.kind.into())?;
    let mut r = Report::default();
    match model.saliency(&data) {
        Ok(map) => {
            let x = model.features(&data)?;
            let title = format!("{} saliency", model.kind().name().to_uppercase());
            let svg = svg::plot_saliency(&title, "Preprocessed spectrum", &mean_spectrum(&x), &map, a.top);
            write_atomic(&a.output, svg.as_bytes())?;
            r.put("report", "saliency");
            for (i, (nm, mag)) in map.top_peaks(a.top).iter().enumerate() {
                r.put(format!("peak{}.nm", i + 1), num(*nm));
                r.put(format!("peak{}.magnitude", i + 1), num(*mag));
            }
            r.put("output", path_str(&a.output));
            Ok(r.render(as_json))
        }
        Err(e @ Error::UnsupportedModel(_)) => {
            let coef = model.coefficient_magnitudes().unwrap_or_default();
            let (wl, mag): (Vec<f64>, Vec<f64>) = coef.into_iter().unzip();
            r.put("report", "coefficient_magnitudes (linear model; this is not a saliency map)");
            for (i, (nm, m)) in find_peaks(&mag, &wl, PEAK_SEPARATION_NM).iter().take(a.top).enumerate() {
                r.put(format!("coef_peak{}.nm", i + 1), num(*nm));
                r.put(format!("coef_peak{}.abs_coefficient", i + 1), num(*m));
            }
            print!("{}", r.render(as_json));
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn cmd_plot(a: &PlotArgs, as_json: bool) -> Result<String> {
    let data = load_canonical(&a.data, a.kind.into())?;
    let data = match a.sg.params() {
        Some(p) => apply_pipeline(&data, &PreprocessPipeline::new(vec![Step::SavitzkyGolay(p)])?)?,
        None => data,
    };
    let index = match &a.sample {
        Some(id) => data
            .sample_ids()
            .position(|s| s == id)
            .ok_or_else(|| Error::InvalidParams(format!("sample {id:?} not found")))?,
        None => 0,
    };
    let s = &data.spectra()[index];
    let ylabel = match data.kind() {
        SpectrumKind::ReflectancePct => "Reflectance (%)".to_string(),
        SpectrumKind::Absorbance => "Absorbance".to_string(),
        SpectrumKind::Derivative(d) => format!("SG derivative {d}"),
    };
    let svg = svg::plot_spectrum(&s.sample_id, &ylabel, &data.grid().wavelengths(), &s.values, a.markers);
    write_atomic(&a.output, svg.as_bytes())?;
    let mut r = Report::default();
    r.put("sample_id", s.sample_id.clone());
    r.put("markers", a.markers);
    r.put("output", path_str(&a.output));
    Ok(r.render(as_json))
}

fn cmd_xrd(a: &XrdArgs, as_json: bool) -> Result<String> {
    if let (Some(c), Some(ci)) = (a.crystalline, a.ci) {
        let total = crate::metrics::xrd_total_carbonates(c, ci)?;
        let mut r = Report::default();
        r.put("crystalline_wt_pct", num(c));
        r.put("crystalline_index", num(ci));
        r.put("xrd_total", num(total));
        return Ok(r.render(as_json));
    }
    let cmp = xrd_comparison()?;
    Ok(if as_json { cmp.to_json() + "\n" } else { cmp.to_key_value() })
}

fn cmd_synth(a: &SynthArgs, as_json: bool) -> Result<String> {
    let cfg = PlantedSignal { n: a.n, seed: a.seed, noise_sd: a.noise, ..Default::default() };
    let d = cfg.generate()?;
    save_canonical(&d, &a.output)?;
    let mut r = Report::default();
    r.put("samples", d.len());
    r.put("output", path_str(&a.output));
    Ok(r.render(as_json))
}
