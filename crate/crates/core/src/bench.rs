//! Experiment harnesses: training-step timing against sequence length,
//! regularization sweeps, readout-mode comparison and repeated stochastic
//! inference. Every harness returns flat [`BenchRecord`] rows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ReadoutMode, Tape};
use crate::data::stack_batch;
use crate::error::{Error, Result};
use crate::network::{Network, NetworkConfig, NeuronKind};
use crate::neurons::{lif_spikes, spsn_forward, Firing, NeuronParams};
use crate::numerics::{Real, Rng, Tensor, RNG_ALGORITHM};
use crate::objective::RegConfig;
use crate::training::{batch_logits, Binned, TrainConfig, TrainReport, Trainer};

pub const SPEEDUP_LENGTHS: [usize; 5] = [100, 316, 1000, 3162, 10000];
pub const REG_THETAS: [f64; 8] = [0.01, 0.03, 0.06, 0.08, 0.1, 0.2, 0.4, 0.6];

/// One CSV row. Columns that do not apply to an experiment stay empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub experiment: String,
    pub variant: String,
    /// Name of the independent variable (`T`, `theta_reg`, `epoch`, ...).
    pub x_name: String,
    pub x: f64,
    pub repeat: usize,
    pub seed: u64,
    pub median_s: Option<f64>,
    pub min_s: Option<f64>,
    pub max_s: Option<f64>,
    pub inner_iterations: Option<u64>,
    pub accuracy: Option<f64>,
    pub spikes_per_ms: Option<f64>,
    pub ratio: Option<f64>,
}

impl BenchRecord {
    fn new(
        experiment: &str,
        variant: &str,
        x_name: &str,
        x: f64,
        repeat: usize,
        seed: u64,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            variant: variant.into(),
            x_name: x_name.into(),
            x,
            repeat,
            seed,
            median_s: None,
            min_s: None,
            max_s: None,
            inner_iterations: None,
            accuracy: None,
            spikes_per_ms: None,
            ratio: None,
        }
    }
}

pub const BENCH_HEADER: [&str; 13] = [
    "experiment",
    "variant",
    "x_name",
    "x",
    "repeat",
    "seed",
    "median_s",
    "min_s",
    "max_s",
    "inner_iterations",
    "accuracy",
    "spikes_per_ms",
    "ratio",
];

pub fn records_to_csv(records: &[BenchRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(BENCH_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn records_from_csv(bytes: &[u8]) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    if r.headers()?.iter().ne(BENCH_HEADER) {
        return Err(Error::invalid("benchmark CSV header does not match"));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Host description stored next to benchmark outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineFingerprint {
    pub cpu_model: String,
    pub logical_cores: usize,
    pub worker_threads: usize,
    pub os: String,
    pub arch: String,
    pub precision: String,
    pub rng: String,
}

impl MachineFingerprint {
    pub fn detect<R: Real>() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|info| {
                info.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|s| s.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Self {
            cpu_model,
            logical_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            worker_threads: rayon::current_num_threads(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            precision: R::PRECISION.name().into(),
            rng: RNG_ALGORITHM.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedupConfig {
    pub lengths: Vec<usize>,
    pub reps: usize,
    pub batch: usize,
    pub width: usize,
    /// Bernoulli rate of the random input spikes.
    pub input_rate: f64,
    /// Lower bound on the wall-clock of one measurement.
    pub min_measure_s: f64,
    pub seed: u64,
}

impl Default for SpeedupConfig {
    fn default() -> Self {
        Self {
            lengths: SPEEDUP_LENGTHS.to_vec(),
            reps: 10,
            batch: 64,
            width: 128,
            input_rate: 0.1,
            min_measure_s: 0.01,
            seed: 0,
        }
    }
}

impl SpeedupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 3 {
            return Err(Error::config("bench.speedup.reps", "must be >= 3"));
        }
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(Error::config(
                "bench.speedup.lengths",
                "must be non-empty and positive",
            ));
        }
        if self.batch == 0 || self.width == 0 {
            return Err(Error::config(
                "bench.speedup",
                "batch and width must be >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.input_rate) {
            return Err(Error::config(
                "bench.speedup.input_rate",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Forward and backward of one dense + neuron layer with loss `Σ spikes`.
fn one_layer_step<R: Real>(
    kind: NeuronKind,
    x: &Tensor<R>,
    weight: &Tensor<R>,
    bias: &Tensor<R>,
    params: &NeuronParams,
    rng: &mut Rng,
) -> Result<()> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let w = tape.param(weight.clone());
    let b = tape.param(bias.clone());
    let z = tape.dense(xv, w, Some(b))?;
    let spikes = match kind {
        NeuronKind::Lif => lif_spikes(&mut tape, z, params, 10.0)?,
        NeuronKind::SpsnSb => {
            let firing = Firing::SigmoidBernoulli {
                threshold_offset: false,
            };
            spsn_forward(&mut tape, z, params, &firing, rng)?.0
        }
        other => {
            return Err(Error::invalid(format!(
                "speedup benchmark does not time `{other}`"
            )))
        }
    };
    let loss = tape.sum(spikes);
    let grads = tape.backward(loss)?;
    if grads.get(w).is_none() {
        return Err(Error::invalid("benchmark step produced no weight gradient"));
    }
    Ok(())
}

/// Seconds per call of `f`, repeating until one measurement lasts at least
/// `min_s`. Returns `(seconds per call, calls)`.
fn measure(min_s: f64, mut f: impl FnMut() -> Result<()>) -> Result<(f64, u64)> {
    let start = Instant::now();
    f()?;
    let single = start.elapsed().as_secs_f64().max(1e-9);
    if single >= min_s {
        return Ok((single, 1));
    }
    let iters = ((min_s / single).ceil() as u64).max(1);
    let start = Instant::now();
    for _ in 0..iters {
        f()?;
    }
    Ok((start.elapsed().as_secs_f64() / iters as f64, iters))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Wall-clock of a training step (forward + backward, one layer) for LIF and
/// SPSN-SB at each sequence length. Rows carry median/min/max over `reps`
/// measurements after one excluded warm-up; `ratio` is LIF/SPSN of medians.
pub fn speedup_benchmark<R: Real>(cfg: &SpeedupConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let params = NeuronParams::default();
    let mut rng = Rng::new(cfg.seed);
    let bound = 1.0 / (cfg.width as f64).sqrt();
    let weight = Tensor::<R>::from_fn(&[cfg.width, cfg.width], |_| {
        R::of(rng.uniform_range(-bound, bound))
    });
    let bias = Tensor::<R>::zeros(&[cfg.width]);
    let mut out = Vec::new();
    for &t_len in &cfg.lengths {
        let mut input_rng = rng.derive(t_len as u64);
        let x = Tensor::<R>::from_fn(&[t_len, cfg.batch, cfg.width], |_| {
            if input_rng.bernoulli(cfg.input_rate) {
                R::one()
            } else {
                R::zero()
            }
        });
        let mut medians = Vec::new();
        let mut rows = Vec::new();
        for kind in [NeuronKind::Lif, NeuronKind::SpsnSb] {
            let mut noise = rng.derive(0x5eed ^ t_len as u64);
            one_layer_step(kind, &x, &weight, &bias, &params, &mut noise)?;
            let mut times = Vec::with_capacity(cfg.reps);
            let mut iters = 0;
            for _ in 0..cfg.reps {
                let (s, n) = measure(cfg.min_measure_s, || {
                    one_layer_step(kind, &x, &weight, &bias, &params, &mut noise)
                })?;
                times.push(s);
                iters = iters.max(n);
            }
            let (min, max) = times.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| {
                (lo.min(t), hi.max(t))
            });
            let med = median(&mut times);
            medians.push(med);
            let mut r = BenchRecord::new(
                "speedup",
                kind.name(),
                "T",
                t_len as f64,
                cfg.reps,
                cfg.seed,
            );
            r.median_s = Some(med);
            r.min_s = Some(min);
            r.max_s = Some(max);
            r.inner_iterations = Some(iters);
            rows.push(r);
        }
        let ratio = medians[0] / medians[1];
        for mut r in rows {
            r.ratio = Some(ratio);
            out.push(r);
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::invalid("slope needs at least two positive points"));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if var == 0.0 {
        return Err(Error::invalid("slope needs distinct x values"));
    }
    Ok(cov / var)
}

/// Trend summary of a speedup run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSummary {
    pub lif_slope: f64,
    pub spsn_slope: f64,
    pub first_ratio: f64,
    pub last_ratio: f64,
}

impl SpeedupSummary {
    pub fn from_records(records: &[BenchRecord]) -> Result<Self> {
        let series = |variant: &str| -> Vec<(f64, f64)> {
            records
                .iter()
                .filter(|r| r.experiment == "speedup" && r.variant == variant)
                .filter_map(|r| r.median_s.map(|m| (r.x, m)))
                .collect()
        };
        let (lif, spsn) = (series("lif"), series("spsn-sb"));
        let ratios: Vec<f64> = records
            .iter()
            .filter(|r| r.experiment == "speedup" && r.variant == "lif")
            .filter_map(|r| r.ratio)
            .collect();
        let (Some(&first_ratio), Some(&last_ratio)) = (ratios.first(), ratios.last()) else {
            return Err(Error::invalid("no speedup ratios in records"));
        };
        Ok(Self {
            lif_slope: log_log_slope(&lif)?,
            spsn_slope: log_log_slope(&spsn)?,
            first_ratio,
            last_ratio,
        })
    }

    pub fn ratio_growth(&self) -> f64 {
        self.last_ratio / self.first_ratio
    }
}

/// Everything a training-based harness needs.
#[derive(Clone, Debug)]
pub struct Experiment<R> {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub train_data: Binned<R>,
    pub test_data: Binned<R>,
}

impl<R: Real> Experiment<R> {
    /// Trains from scratch with network and training seeds offset by `rep`.
    pub fn run(
        &self,
        network: NetworkConfig,
        train: TrainConfig,
        rep: usize,
    ) -> Result<(Trainer<R>, TrainReport)> {
        let network = NetworkConfig {
            seed: network.seed.wrapping_add(rep as u64),
            ..network
        };
        let train = TrainConfig {
            seed: train.seed.wrapping_add(rep as u64),
            ..train
        };
        let mut trainer = Trainer::new(network, train)?;
        let report = trainer.fit(&self.train_data, &self.test_data, train.epochs)?;
        Ok((trainer, report))
    }

    fn final_row(
        &self,
        experiment: &str,
        variant: &str,
        x_name: &str,
        x: f64,
        rep: usize,
        report: &TrainReport,
    ) -> BenchRecord {
        let last = report.last().expect("at least one epoch");
        let mut r = BenchRecord::new(
            experiment,
            variant,
            x_name,
            x,
            rep,
            self.train.seed.wrapping_add(rep as u64),
        );
        r.accuracy = Some(last.test_accuracy);
        r.spikes_per_ms = Some(last.test_spikes_per_ms);
        r.median_s = Some(report.epochs.iter().map(|e| e.seconds).sum());
        r
    }
}

/// Final test accuracy and spikes/ms per `θ_reg` and repeat, plus an
/// unregularized baseline row per repeat (`x = NaN`, variant `off`).
pub fn regularization_sweep<R: Real>(
    exp: &Experiment<R>,
    thetas: &[f64],
    reps: usize,
) -> Result<Vec<BenchRecord>> {
    if reps == 0 {
        return Err(Error::config("bench.reps", "must be >= 1"));
    }
    let mut out = Vec::new();
    for rep in 0..reps {
        let base = TrainConfig {
            regularization: RegConfig {
                enabled: false,
                ..exp.train.regularization
            },
            ..exp.train
        };
        let (_, report) = exp.run(exp.network.clone(), base, rep)?;
        out.push(exp.final_row("regsweep", "off", "theta_reg", f64::NAN, rep, &report));
        for &theta in thetas {
            let cfg = TrainConfig {
                regularization: RegConfig {
                    enabled: true,
                    theta_reg: theta,
                    ..exp.train.regularization
                },
                ..exp.train
            };
            let (_, report) = exp.run(exp.network.clone(), cfg, rep)?;
            out.push(exp.final_row("regsweep", "on", "theta_reg", theta, rep, &report));
        }
    }
    Ok(out)
}

/// Per-epoch test accuracy for each readout mode, identical seeds across modes.
pub fn loss_mode_compare<R: Real>(
    exp: &Experiment<R>,
    modes: &[ReadoutMode],
    reps: usize,
) -> Result<Vec<BenchRecord>> {
    if reps == 0 || modes.is_empty() {
        return Err(Error::config(
            "bench.lossmode",
            "needs at least one mode and one repeat",
        ));
    }
    let mut out = Vec::new();
    for rep in 0..reps {
        for &mode in modes {
            let cfg = TrainConfig {
                readout: mode,
                ..exp.train
            };
            let (_, report) = exp.run(exp.network.clone(), cfg, rep)?;
            for e in &report.epochs {
                let mut r = BenchRecord::new(
                    "lossmode",
                    mode.name(),
                    "epoch",
                    e.epoch as f64,
                    rep,
                    exp.train.seed.wrapping_add(rep as u64),
                );
                r.accuracy = Some(e.test_accuracy);
                r.spikes_per_ms = Some(e.test_spikes_per_ms);
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Logit statistics of one sample over repeated stochastic forwards.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialStats {
    pub label: usize,
    /// Per-class mean and (population) standard deviation of the logits.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Every trial predicted the same class.
    pub stable: bool,
    pub prediction: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Robustness {
    pub samples: Vec<TrialStats>,
}

impl Robustness {
    pub fn stable_fraction(&self) -> f64 {
        self.samples.iter().filter(|s| s.stable).count() as f64 / self.samples.len() as f64
    }

    /// One row per sample and class: `sample,label,class,mean,std,stable,prediction`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(ROBUSTNESS_HEADER)?;
        for (i, s) in self.samples.iter().enumerate() {
            for (c, (m, sd)) in s.mean.iter().zip(&s.std).enumerate() {
                w.write_record([
                    i.to_string(),
                    s.label.to_string(),
                    c.to_string(),
                    m.to_string(),
                    sd.to_string(),
                    u8::from(s.stable).to_string(),
                    s.prediction.to_string(),
                ])?;
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub const ROBUSTNESS_HEADER: [&str; 7] = [
    "sample",
    "label",
    "class",
    "mean",
    "std",
    "stable",
    "prediction",
];

/// Passes every sample `n_trials` times with independent noise.
pub fn robustness_trials<R: Real>(
    net: &Network<R>,
    data: &Binned<R>,
    n_trials: usize,
    mode: ReadoutMode,
    batch_size: usize,
    seed: u64,
) -> Result<Robustness> {
    if n_trials < 2 {
        return Err(Error::invalid("robustness needs at least 2 trials"));
    }
    if data.is_empty() || batch_size == 0 {
        return Err(Error::invalid(
            "robustness needs samples and a positive batch size",
        ));
    }
    data.check_against(net.config())?;
    let classes = data.classes;
    let mut logits: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n_trials); data.len()];
    for trial in 0..n_trials {
        let mut rng = Rng::new(seed).derive(trial as u64);
        let mut offset = 0;
        for chunk in data.rasters.chunks(batch_size) {
            let x = stack_batch(chunk)?;
            let (l, _) = batch_logits(net, &x, mode, &mut rng)?;
            for (b, row) in l.data().chunks(classes).enumerate() {
                logits[offset + b].push(row.iter().map(|v| v.as_f64()).collect());
            }
            offset += chunk.len();
        }
    }
    let argmax = |row: &[f64]| {
        row.iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > row[best] { i } else { best })
    };
    let samples = logits
        .iter()
        .zip(&data.labels)
        .map(|(trials, &label)| {
            let n = trials.len() as f64;
            let mean: Vec<f64> = (0..classes)
                .map(|c| trials.iter().map(|t| t[c]).sum::<f64>() / n)
                .collect();
            let std = (0..classes)
                .map(|c| (trials.iter().map(|t| (t[c] - mean[c]).powi(2)).sum::<f64>() / n).sqrt())
                .collect();
            let first = argmax(&trials[0]);
            TrialStats {
                label,
                stable: trials.iter().all(|t| argmax(t) == first),
                prediction: argmax(&mean),
                mean,
                std,
            }
        })
        .collect();
    Ok(Robustness { samples })
}
