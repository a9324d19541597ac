//! Command-line front end: `synth`, `train`, `eval` and `bench`.
//!
//! Settings resolve as defaults, then the `--config` JSON file, then flags.
//! The effective configuration is written into every output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bench::{
    loss_mode_compare, records_to_csv, regularization_sweep, robustness_trials, speedup_benchmark,
    Experiment, MachineFingerprint, SpeedupConfig, SpeedupSummary, REG_THETAS,
};
use crate::data::{synth_generate, EventDataset, SynthConfig};
use crate::error::{Error, Result};
use crate::network::{NetworkConfig, NeuronKind};
use crate::numerics::{Precision, Real, Rng};
use crate::objective::ReadoutMode;
use crate::training::{checkpoint_precision, Binned, TrainConfig, TrainReport, Trainer};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::Format(_) | Error::Mismatch(_) | Error::Shape(_) | Error::Csv(_) => EXIT_DATA,
        Error::NonFinite(_) => EXIT_NUMERIC,
        Error::Io(_) | Error::Json(_) => EXIT_IO,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Fraction held out per class when no separate test file is given.
    pub test_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            split_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub speedup: SpeedupConfig,
    /// Independent training runs per setting.
    pub reps: usize,
    pub thetas: Vec<f64>,
    pub modes: Vec<ReadoutMode>,
    pub robustness_trials: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            speedup: SpeedupConfig::default(),
            reps: 3,
            thetas: REG_THETAS.to_vec(),
            modes: ReadoutMode::ALL.to_vec(),
            robustness_trials: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub precision: Precision,
    pub output_dir: PathBuf,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            precision: Precision::F32,
            output_dir: PathBuf::from("runs"),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        self.bench.speedup.validate()?;
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::config("data.test_fraction", "must lie in (0, 1)"));
        }
        if self.bench.reps == 0 {
            return Err(Error::config("bench.reps", "must be >= 1"));
        }
        if self.bench.robustness_trials < 2 {
            return Err(Error::config("bench.robustness_trials", "must be >= 2"));
        }
        Ok(())
    }

    /// Parses a config file; missing fields keep their defaults.
    pub fn from_json(text: &str) -> Result<(Self, Value)> {
        let raw: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        let cfg = serde_path_to_error::deserialize(&raw)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        Ok((cfg, raw))
    }

    /// Every leaf field with its default value, one `path = value` per line.
    pub fn defaults_listing() -> String {
        fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
            match v {
                Value::Object(map) => {
                    for (k, v) in map {
                        let p = if prefix.is_empty() {
                            k.clone()
                        } else {
                            format!("{prefix}.{k}")
                        };
                        walk(&p, v, out);
                    }
                }
                _ => out.push(format!("  {prefix} = {v}")),
            }
        }
        let mut lines = Vec::new();
        walk(
            "",
            &serde_json::to_value(Self::default()).expect("config serializes"),
            &mut lines,
        );
        format!(
            "Config fields and defaults (override with --config FILE):\n{}\n\n\
             train.regularization.theta_reg defaults to 0.1 for spsn-gs unless set.",
            lines.join("\n")
        )
    }
}

/// Default spike-rate bound of each neuron variant.
pub fn default_theta_reg(kind: NeuronKind) -> f64 {
    match kind {
        NeuronKind::SpsnGs => 0.1,
        _ => 0.4,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "spsn",
    version,
    about = "Stochastic parallelizable spiking neurons"
)]
pub struct Cli {
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic spike-pattern dataset.
    Synth(SynthArgs),
    /// Train a network and write its checkpoint and per-epoch log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset and print JSON metrics.
    Eval(EvalArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples_per_class: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    /// lif, spsn-sb, spsn-gs or relu.
    #[arg(long)]
    pub neuron: Option<NeuronKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// mean, max or last.
    #[arg(long)]
    pub readout: Option<ReadoutMode>,
    #[arg(long)]
    pub no_augment: bool,
    /// Enable the spike-rate regularizer.
    #[arg(long, conflicts_with = "no_reg")]
    pub reg: bool,
    #[arg(long)]
    pub no_reg: bool,
    #[arg(long)]
    pub theta_reg: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Forward passes averaged per evaluation prediction.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Time steps per sample (default: longest sample).
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Training dataset (SPKE); generated from `synth` settings when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Test dataset; a stratified split of the training data when omitted.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Continue from a checkpoint up to the configured epoch count.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Forward passes averaged per prediction.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Evaluation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Speedup,
    Regsweep,
    Lossmode,
    Robustness,
    All,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated sequence lengths for the speedup suite.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
}

/// Parses arguments, runs the command, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let listing = RunConfig::defaults_listing();
    let cmd = Cli::command()
        .after_long_help(listing.clone())
        .mut_subcommand("train", |c| c.after_long_help(listing.clone()))
        .mut_subcommand("bench", |c| c.after_long_help(listing.clone()))
        .mut_subcommand("synth", |c| c.after_long_help(listing.clone()));
    let cli = match cmd
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be >= 1"));
        }
        // a pool built earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn load_config(common: &Common) -> Result<(RunConfig, Value)> {
    let (mut cfg, raw) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            RunConfig::from_json(&text)?
        }
        None => (RunConfig::default(), Value::Null),
    };
    if let Some(p) = common.precision {
        cfg.precision = p.into();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.network.seed = seed;
        cfg.train.seed = seed;
        cfg.synth.seed = seed;
        cfg.bench.speedup.seed = seed;
    }
    Ok((cfg, raw))
}

fn in_file(raw: &Value, pointer: &str) -> bool {
    raw.pointer(pointer).is_some()
}

fn apply_train_flags(cfg: &mut RunConfig, raw: &Value, f: &TrainFlags) {
    if let Some(kind) = f.neuron {
        cfg.network.neuron_kind = kind;
    }
    if let Some(n) = f.epochs {
        cfg.train.epochs = n;
    }
    if let Some(n) = f.batch_size {
        cfg.train.batch_size = n;
    }
    if let Some(m) = f.readout {
        cfg.train.readout = m;
    }
    if f.no_augment {
        cfg.train.augment.shift = false;
        cfg.train.augment.scale = false;
    }
    if f.reg {
        cfg.train.regularization.enabled = true;
    }
    if f.no_reg {
        cfg.train.regularization.enabled = false;
    }
    match f.theta_reg {
        Some(t) => cfg.train.regularization.theta_reg = t,
        None if !in_file(raw, "/train/regularization/theta_reg") => {
            cfg.train.regularization.theta_reg = default_theta_reg(cfg.network.neuron_kind)
        }
        None => {}
    }
    if let Some(lr) = f.lr {
        cfg.train.optimizer.lr = lr;
    }
    if let Some(n) = f.trials {
        cfg.train.inference_trials = n;
    }
    if let Some(n) = f.steps {
        cfg.train.steps = Some(n);
    }
}

/// Input and class counts follow the dataset unless the config file sets them.
fn adopt_dims(cfg: &mut RunConfig, raw: &Value, data: &EventDataset) {
    if !in_file(raw, "/network/input_channels") {
        cfg.network.input_channels = data.channel_count as usize;
    }
    if !in_file(raw, "/network/classes") {
        cfg.network.classes = data.class_count as usize;
    }
}

/// Creates `dir` and refuses to clobber any of `files` unless forced.
fn prepare_dir(dir: &Path, files: &[&str], force: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if !force {
        for f in files {
            let p = dir.join(f);
            if p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    format!("{} exists (use --force to overwrite)", p.display()),
                )));
            }
        }
    }
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let (mut cfg, _) = load_config(&a.common)?;
    if let Some(n) = a.classes {
        cfg.synth.classes = n;
    }
    if let Some(n) = a.channels {
        cfg.synth.channels = n;
    }
    if let Some(n) = a.steps {
        cfg.synth.steps = n;
    }
    if let Some(n) = a.samples_per_class {
        cfg.synth.samples_per_class = n;
    }
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    prepare_dir(&dir, &["synth.spke", "config.json"], a.common.force)?;
    let synth = synth_generate(&cfg.synth)?;
    synth.dataset.save(&dir.join("synth.spke"))?;
    write_json(&dir.join("config.json"), &cfg)?;
    eprintln!(
        "wrote {} samples ({} classes, {} channels) to {}",
        synth.dataset.samples.len(),
        synth.dataset.class_count,
        synth.dataset.channel_count,
        dir.join("synth.spke").display()
    );
    Ok(())
}

/// Train and test datasets: files when given, otherwise the synthetic task.
fn datasets(
    cfg: &RunConfig,
    data: Option<&Path>,
    test: Option<&Path>,
) -> Result<(EventDataset, EventDataset)> {
    let full = match data {
        Some(p) => EventDataset::load(p)?,
        None => synth_generate(&cfg.synth)?.dataset,
    };
    match test {
        Some(p) => Ok((full, EventDataset::load(p)?)),
        None => full.split_stratified(cfg.data.test_fraction, &mut Rng::new(cfg.data.split_seed)),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (mut cfg, raw) = load_config(&a.common)?;
    apply_train_flags(&mut cfg, &raw, &a.flags);
    let (train, test) = datasets(&cfg, a.data.as_deref(), a.test_data.as_deref())?;
    adopt_dims(&mut cfg, &raw, &train);
    if let Some(p) = &a.resume {
        cfg.precision = checkpoint_precision(&std::fs::read(p)?)?;
    }
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    prepare_dir(
        &dir,
        &[
            "config.json",
            "train.csv",
            "checkpoint.spck",
            "summary.json",
        ],
        a.common.force,
    )?;
    write_json(&dir.join("config.json"), &cfg)?;
    match cfg.precision {
        Precision::F32 => train_run::<f32>(&cfg, &train, &test, a.resume.as_deref(), &dir),
        Precision::F64 => train_run::<f64>(&cfg, &train, &test, a.resume.as_deref(), &dir),
    }
}

fn train_run<R: Real>(
    cfg: &RunConfig,
    train: &EventDataset,
    test: &EventDataset,
    resume: Option<&Path>,
    dir: &Path,
) -> Result<()> {
    let dt = cfg.network.neuron_params.dt;
    let mut trainer = match resume {
        Some(p) => {
            let mut t = Trainer::<R>::load(p)?;
            if t.network.config() != &cfg.network {
                return Err(Error::config(
                    "network",
                    "differs from the resumed checkpoint",
                ));
            }
            t.config = cfg.train;
            t
        }
        None => Trainer::<R>::new(cfg.network.clone(), cfg.train)?,
    };
    let steps = cfg.train.steps;
    let tr = Binned::<R>::new(train, dt, steps)?;
    let te = Binned::<R>::new(test, dt, steps.or(Some(tr.steps)))?;
    let mut report = TrainReport::default();
    while trainer.epochs_done < cfg.train.epochs {
        let r = trainer.fit(&tr, &te, 1)?;
        let e = r.epochs[0].clone();
        eprintln!(
            "epoch {:>4}  loss {:.4}  train {:.3}  test {:.3}  spikes/ms {:.1}  {:.2}s",
            e.epoch, e.loss, e.train_accuracy, e.test_accuracy, e.spikes_per_ms, e.seconds
        );
        report.epochs.push(e);
    }
    std::fs::write(dir.join("train.csv"), report.to_csv()?)?;
    trainer.save(&dir.join("checkpoint.spck"))?;
    let last = report.last();
    write_json(
        &dir.join("summary.json"),
        &json!({
            "epochs": trainer.epochs_done,
            "train_accuracy": last.map(|e| e.train_accuracy),
            "test_accuracy": last.map(|e| e.test_accuracy),
            "best_test_accuracy": report.best_test_accuracy(),
            "spikes_per_ms": last.map(|e| e.test_spikes_per_ms),
            "spikes_per_ms_unit": "spikes per millisecond per sample",
            "precision": R::PRECISION.name(),
            "parameters": trainer.network.parameter_count(),
        }),
    )
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let bytes = std::fs::read(&a.checkpoint)?;
    let data = EventDataset::load(&a.data)?;
    let out = match checkpoint_precision(&bytes)? {
        Precision::F32 => eval_run::<f32>(&bytes, &data, &a)?,
        Precision::F64 => eval_run::<f64>(&bytes, &data, &a)?,
    };
    let text = serde_json::to_string_pretty(&out)?;
    println!("{text}");
    if let Some(p) = &a.out {
        if p.exists() && !a.force {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists (use --force to overwrite)", p.display()),
            )));
        }
        std::fs::write(p, text + "\n")?;
    }
    Ok(())
}

fn eval_run<R: Real>(bytes: &[u8], data: &EventDataset, a: &EvalArgs) -> Result<Value> {
    let mut trainer = Trainer::<R>::from_checkpoint(bytes)?;
    if let Some(n) = a.trials {
        if n == 0 {
            return Err(Error::config("--trials", "must be >= 1"));
        }
        trainer.config.inference_trials = n;
    }
    if let Some(seed) = a.seed {
        trainer.config.seed = seed;
    }
    let binned = Binned::<R>::new(
        data,
        trainer.network.config().neuron_params.dt,
        trainer.config.steps,
    )?;
    let ev = trainer.evaluate(&binned)?;
    Ok(json!({
        "accuracy": ev.accuracy,
        "accuracy_unit": "fraction of samples",
        "spikes_per_ms": ev.spikes_per_ms,
        "spikes_per_ms_unit": "spikes per millisecond per sample",
        "samples": binned.len(),
        "steps": binned.steps,
        "trials": trainer.config.inference_trials,
        "neuron": trainer.network.config().neuron_kind.name(),
        "precision": R::PRECISION.name(),
    }))
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let (mut cfg, raw) = load_config(&a.common)?;
    apply_train_flags(&mut cfg, &raw, &a.flags);
    if let Some(n) = a.reps {
        cfg.bench.reps = n;
        cfg.bench.speedup.reps = n;
    }
    if let Some(l) = &a.lengths {
        cfg.bench.speedup.lengths = l.clone();
    }
    let needs_data = a.suite != Suite::Speedup;
    let data = if needs_data {
        let d = datasets(&cfg, a.data.as_deref(), a.test_data.as_deref())?;
        adopt_dims(&mut cfg, &raw, &d.0);
        Some(d)
    } else {
        None
    };
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let suites: &[Suite] = match a.suite {
        Suite::All => &[
            Suite::Speedup,
            Suite::Regsweep,
            Suite::Lossmode,
            Suite::Robustness,
        ],
        Suite::Speedup => &[Suite::Speedup],
        Suite::Regsweep => &[Suite::Regsweep],
        Suite::Lossmode => &[Suite::Lossmode],
        Suite::Robustness => &[Suite::Robustness],
    };
    let mut files = vec!["config.json", "summary.json"];
    files.extend(suites.iter().map(|s| suite_file(*s)));
    prepare_dir(&dir, &files, a.common.force)?;
    write_json(&dir.join("config.json"), &cfg)?;
    match cfg.precision {
        Precision::F32 => bench_run::<f32>(&cfg, suites, data, &dir),
        Precision::F64 => bench_run::<f64>(&cfg, suites, data, &dir),
    }
}

fn suite_file(s: Suite) -> &'static str {
    match s {
        Suite::Speedup => "speedup.csv",
        Suite::Regsweep => "regsweep.csv",
        Suite::Lossmode => "lossmode.csv",
        Suite::Robustness => "robustness.csv",
        Suite::All => unreachable!("expanded before use"),
    }
}

fn bench_run<R: Real>(
    cfg: &RunConfig,
    suites: &[Suite],
    data: Option<(EventDataset, EventDataset)>,
    dir: &Path,
) -> Result<()> {
    let experiment = match &data {
        Some((train, test)) => {
            let dt = cfg.network.neuron_params.dt;
            let train_data = Binned::<R>::new(train, dt, cfg.train.steps)?;
            let test_data = Binned::<R>::new(test, dt, Some(train_data.steps))?;
            Some(Experiment {
                network: cfg.network.clone(),
                train: cfg.train,
                train_data,
                test_data,
            })
        }
        None => None,
    };
    let mut summary = serde_json::Map::new();
    summary.insert(
        "fingerprint".into(),
        serde_json::to_value(MachineFingerprint::detect::<R>())?,
    );
    for &suite in suites {
        eprintln!("running {}", suite_file(suite));
        let path = dir.join(suite_file(suite));
        match suite {
            Suite::Speedup => {
                let records = speedup_benchmark::<R>(&cfg.bench.speedup)?;
                std::fs::write(&path, records_to_csv(&records)?)?;
                let s = SpeedupSummary::from_records(&records)?;
                summary.insert(
                    "speedup".into(),
                    json!({
                        "lif_slope": s.lif_slope,
                        "spsn_slope": s.spsn_slope,
                        "first_ratio": s.first_ratio,
                        "last_ratio": s.last_ratio,
                        "ratio_growth": s.ratio_growth(),
                    }),
                );
            }
            Suite::Regsweep => {
                let exp = experiment
                    .as_ref()
                    .expect("dataset loaded for training suites");
                let records = regularization_sweep(exp, &cfg.bench.thetas, cfg.bench.reps)?;
                std::fs::write(&path, records_to_csv(&records)?)?;
                summary.insert("regsweep".into(), json!({ "rows": records.len() }));
            }
            Suite::Lossmode => {
                let exp = experiment
                    .as_ref()
                    .expect("dataset loaded for training suites");
                let records = loss_mode_compare(exp, &cfg.bench.modes, cfg.bench.reps)?;
                std::fs::write(&path, records_to_csv(&records)?)?;
                summary.insert("lossmode".into(), json!({ "rows": records.len() }));
            }
            Suite::Robustness => {
                let exp = experiment
                    .as_ref()
                    .expect("dataset loaded for training suites");
                let (trainer, report) = exp.run(exp.network.clone(), exp.train, 0)?;
                let rob = robustness_trials(
                    &trainer.network,
                    &exp.test_data,
                    cfg.bench.robustness_trials,
                    exp.train.readout,
                    exp.train.batch_size,
                    exp.train.seed,
                )?;
                std::fs::write(&path, rob.to_csv()?)?;
                summary.insert(
                    "robustness".into(),
                    json!({
                        "trials": cfg.bench.robustness_trials,
                        "stable_fraction": rob.stable_fraction(),
                        "test_accuracy": report.last().map(|e| e.test_accuracy),
                    }),
                );
            }
            Suite::All => unreachable!("expanded before use"),
        }
    }
    write_json(&dir.join("summary.json"), &Value::Object(summary))
}
