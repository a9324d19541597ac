//! Adamax, the epoch loop, evaluation with repeated stochastic trials, and
//! `SPCK` checkpoints.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ReadoutMode, Tape};
use crate::codec::{Reader, Writer};
use crate::data::{bin_events, stack_batch, steps_for, AugmentConfig, EventDataset};
use crate::error::{Error, FormatError, Result};
use crate::network::{spikes_per_ms, Network, NetworkConfig};
use crate::numerics::{Precision, Real, Rng, Tensor};
use crate::objective::{objective, RegConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SPCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamaxConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("optimizer.lr", "must be a finite value > 0"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(
                    format!("optimizer.{name}"),
                    "must lie in [0, 1)",
                ));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("optimizer.eps", "must be > 0"));
        }
        Ok(())
    }
}

/// Adamax: `m ← β1·m + (1-β1)·g`, `u ← max(β2·u, |g|)`,
/// `θ ← θ - lr/(1-β1^t) · m/(u+ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adamax<R> {
    pub config: AdamaxConfig,
    pub step: u64,
    pub m: Vec<Tensor<R>>,
    pub u: Vec<Tensor<R>>,
}

impl<R: Real> Adamax<R> {
    pub fn new(config: AdamaxConfig, params: &[&Tensor<R>]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            u: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// One update. A non-finite gradient leaves parameters and state untouched.
    pub fn update(&mut self, params: &mut [&mut Tensor<R>], grads: &[Tensor<R>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            g.expect_shape(p.shape(), "gradient")?;
            m.expect_shape(p.shape(), "optimizer state")?;
            g.ensure_finite("gradient")?;
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2, eps) = (R::of(c.beta1), R::of(c.beta2), R::of(c.eps));
        let lr_t = R::of(c.lr / (1.0 - c.beta1.powi(self.step as i32)));
        for (((p, g), m), u) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.u)
        {
            for (((pv, &gv), mv), uv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(u.data_mut())
            {
                *mv = b1 * *mv + (R::one() - b1) * gv;
                *uv = (b2 * *uv).max(gv.abs());
                *pv = *pv - lr_t * *mv / (*uv + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub readout: ReadoutMode,
    pub augment: AugmentConfig,
    pub regularization: RegConfig,
    pub optimizer: AdamaxConfig,
    /// Forward passes averaged per prediction during evaluation.
    pub inference_trials: usize,
    /// Time steps per sample; `None` bins to the longest sample.
    pub steps: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            readout: ReadoutMode::Mean,
            augment: AugmentConfig::default(),
            regularization: RegConfig::default(),
            optimizer: AdamaxConfig::default(),
            inference_trials: 1,
            steps: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if self.inference_trials == 0 {
            return Err(Error::config("train.inference_trials", "must be >= 1"));
        }
        if self.steps == Some(0) {
            return Err(Error::config("train.steps", "must be >= 1"));
        }
        self.augment.validate()?;
        self.regularization.validate()?;
        self.optimizer.validate()
    }
}

/// Dataset binned once into `[T, C]` rasters.
#[derive(Clone, Debug)]
pub struct Binned<R> {
    pub rasters: Vec<Tensor<R>>,
    pub labels: Vec<usize>,
    pub steps: usize,
    pub channels: usize,
    pub classes: usize,
}

impl<R: Real> Binned<R> {
    /// Bins every sample to `steps` (or enough steps for the longest sample).
    pub fn new(data: &EventDataset, dt: f64, steps: Option<usize>) -> Result<Self> {
        data.validate()?;
        let steps = match steps {
            Some(s) if s > 0 => s,
            Some(_) => return Err(Error::invalid("steps must be >= 1")),
            None => steps_for(data.max_duration_us(), dt)?,
        };
        let channels = data.channel_count as usize;
        let rasters = data
            .samples
            .iter()
            .map(|s| bin_events(s, steps, dt, channels))
            .collect::<Result<_>>()?;
        Ok(Self {
            rasters,
            labels: data.labels(),
            steps,
            channels,
            classes: data.class_count as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.rasters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rasters.is_empty()
    }

    pub fn check_against(&self, config: &NetworkConfig) -> Result<()> {
        if self.channels != config.input_channels || self.classes != config.classes {
            return Err(Error::Mismatch(format!(
                "data has {} channels / {} classes, network expects {} / {}",
                self.channels, self.classes, config.input_channels, config.classes
            )));
        }
        Ok(())
    }
}

/// One row of the training report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub loss: f64,
    /// Mean spikes per millisecond per sample during the training passes.
    pub spikes_per_ms: f64,
    pub test_spikes_per_ms: f64,
    /// Wall-clock of the training passes (augmentation included).
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn best_test_accuracy(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.test_accuracy).reduce(f64::max)
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.epochs.is_empty() {
            w.write_record(EPOCH_HEADER)?;
        }
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        if r.headers()?.iter().ne(EPOCH_HEADER) {
            return Err(Error::invalid("training report header does not match"));
        }
        let epochs = r.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(Self { epochs })
    }
}

pub const EPOCH_HEADER: [&str; 7] = [
    "epoch",
    "train_accuracy",
    "test_accuracy",
    "loss",
    "spikes_per_ms",
    "test_spikes_per_ms",
    "seconds",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub spikes_per_ms: f64,
    pub predictions: Vec<usize>,
}

fn argmax<R: Real>(row: &[R]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Logits `[B, C]` of one batch plus its total hidden spike count.
pub fn batch_logits<R: Real>(
    net: &Network<R>,
    x: &Tensor<R>,
    mode: ReadoutMode,
    rng: &mut Rng,
) -> Result<(Tensor<R>, f64)> {
    let mut tape = Tape::new();
    let pass = net.forward(&mut tape, x, rng)?;
    let logits = tape.readout_reduce(pass.potentials, mode)?;
    let spikes = pass.spike_counts(&tape).map_or(0.0, |c| c.iter().sum());
    Ok((tape.value(logits).clone(), spikes))
}

/// Accuracy and spikes/ms; with `trials > 1` a stochastic network predicts
/// the argmax of the trial-mean logits.
pub fn evaluate<R: Real>(
    net: &Network<R>,
    data: &Binned<R>,
    batch_size: usize,
    mode: ReadoutMode,
    trials: usize,
    rng: &mut Rng,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    if batch_size == 0 || trials == 0 {
        return Err(Error::invalid("batch size and trial count must be >= 1"));
    }
    data.check_against(net.config())?;
    let trials = if net.config().neuron_kind.is_stochastic() {
        trials
    } else {
        1
    };
    let classes = data.classes;
    let mut predictions = Vec::with_capacity(data.len());
    let mut spikes = 0.0;
    for (chunk_idx, chunk) in data.rasters.chunks(batch_size).enumerate() {
        let x = stack_batch(chunk)?;
        let mut mean = vec![0.0f64; chunk.len() * classes];
        for trial in 0..trials {
            let mut trial_rng = rng.derive(((chunk_idx as u64) << 20) | trial as u64);
            let (logits, count) = batch_logits(net, &x, mode, &mut trial_rng)?;
            for (m, v) in mean.iter_mut().zip(logits.data()) {
                *m += v.as_f64();
            }
            spikes += count;
        }
        predictions.extend(mean.chunks(classes).map(argmax));
    }
    let correct = predictions
        .iter()
        .zip(&data.labels)
        .filter(|(p, l)| p == l)
        .count();
    let dt = net.config().neuron_params.dt;
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        spikes_per_ms: spikes_per_ms(spikes, data.steps, dt, data.len() * trials)?,
        predictions,
    })
}

/// Network, optimizer state and the number of completed epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct Trainer<R> {
    pub network: Network<R>,
    pub optimizer: Adamax<R>,
    pub config: TrainConfig,
    pub epochs_done: usize,
}

impl<R: Real> Trainer<R> {
    /// Fresh network initialised from `network.seed`.
    pub fn new(network: NetworkConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let net = Network::build(network.clone(), &mut Rng::new(network.seed))?;
        Ok(Self::from_network(net, config))
    }

    pub fn from_network(network: Network<R>, config: TrainConfig) -> Self {
        let optimizer = Adamax::new(config.optimizer, &network.parameters());
        Self {
            network,
            optimizer,
            config,
            epochs_done: 0,
        }
    }

    /// Random stream of epoch `epoch`; independent of earlier epochs, so a
    /// resumed run draws the same numbers as an uninterrupted one.
    fn epoch_rng(&self, epoch: usize) -> Rng {
        Rng::new(self.config.seed).derive(epoch as u64)
    }

    /// One pass over shuffled `train` in batches (last partial batch kept).
    /// Returns `(accuracy, mean loss, spikes/ms, seconds)`.
    pub fn train_epoch(&mut self, train: &Binned<R>) -> Result<(f64, f64, f64, f64)> {
        train.check_against(self.network.config())?;
        if train.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        let cfg = self.config;
        let mut rng = self.epoch_rng(self.epochs_done);
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.shuffle(&mut order);
        let start = Instant::now();
        let (mut correct, mut loss_sum, mut spikes) = (0usize, 0.0f64, 0.0f64);
        for batch in order.chunks(cfg.batch_size) {
            let rasters = batch
                .iter()
                .map(|&i| cfg.augment.apply(&train.rasters[i], &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let targets: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let x = stack_batch(&rasters)?;
            let mut tape = Tape::new();
            let pass = self.network.forward(&mut tape, &x, &mut rng)?;
            let loss = objective(
                &mut tape,
                pass.potentials,
                &pass.spikes,
                &targets,
                cfg.readout,
                &cfg.regularization,
            )?;
            let value = tape.value(loss.total).item().as_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at epoch {}",
                    self.epochs_done + 1
                )));
            }
            let mut grads = tape.backward(loss.total)?;
            let grads: Vec<Tensor<R>> = pass
                .params
                .iter()
                .map(|&p| {
                    grads
                        .take(p)
                        .unwrap_or_else(|| Tensor::zeros(tape.shape(p)))
                })
                .collect();
            self.optimizer
                .update(&mut self.network.parameters_mut(), &grads)?;

            let logits = tape.value(loss.logits);
            let classes = logits.dim(1);
            correct += logits
                .data()
                .chunks(classes)
                .zip(&targets)
                .filter(|(row, &t)| argmax(row) == t)
                .count();
            loss_sum += value * batch.len() as f64;
            spikes += pass.spike_counts(&tape).map_or(0.0, |c| c.iter().sum());
        }
        let seconds = start.elapsed().as_secs_f64();
        self.epochs_done += 1;
        let n = train.len();
        let rate = spikes_per_ms(
            spikes,
            train.steps,
            self.network.config().neuron_params.dt,
            n,
        )?;
        Ok((
            correct as f64 / n as f64,
            loss_sum / n as f64,
            rate,
            seconds,
        ))
    }

    /// Trains `epochs` more epochs, evaluating on `test` after each.
    pub fn fit(
        &mut self,
        train: &Binned<R>,
        test: &Binned<R>,
        epochs: usize,
    ) -> Result<TrainReport> {
        let mut report = TrainReport::default();
        for _ in 0..epochs {
            let (train_accuracy, loss, rate, seconds) = self.train_epoch(train)?;
            let eval = self.evaluate(test)?;
            report.epochs.push(EpochRecord {
                epoch: self.epochs_done,
                train_accuracy,
                test_accuracy: eval.accuracy,
                loss,
                spikes_per_ms: rate,
                test_spikes_per_ms: eval.spikes_per_ms,
                seconds,
            });
        }
        Ok(report)
    }

    /// Evaluation with the configured trial count and a stream tied to the
    /// number of completed epochs.
    pub fn evaluate(&self, data: &Binned<R>) -> Result<Evaluation> {
        let mut rng = Rng::new(self.config.seed).derive(u64::MAX - self.epochs_done as u64);
        evaluate(
            &self.network,
            data,
            self.config.batch_size,
            self.config.readout,
            self.config.inference_trials,
            &mut rng,
        )
    }

    pub fn to_checkpoint(&self) -> Result<Vec<u8>> {
        let meta = CheckpointMeta {
            precision: R::PRECISION,
            epochs_done: self.epochs_done,
            optimizer_step: self.optimizer.step,
            network: self.network.config().clone(),
            train: self.config,
        };
        let mut w = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        w.blob(serde_json::to_string(&meta)?.as_bytes());
        let names = self.network.parameter_names();
        let groups = [
            ("param", self.network.parameters()),
            ("adamax.m", self.optimizer.m.iter().collect()),
            ("adamax.u", self.optimizer.u.iter().collect()),
        ];
        w.u32((3 * names.len()) as u32);
        for (prefix, tensors) in groups {
            for (name, t) in names.iter().zip(tensors) {
                w.blob(format!("{prefix}.{name}").as_bytes());
                w.u32(t.rank() as u32);
                for &d in t.shape() {
                    w.u64(d as u64);
                }
                let mut raw = Vec::with_capacity(t.len() * R::PRECISION.tag() as usize);
                for v in t.data() {
                    v.write_le(&mut raw);
                }
                w.blob(&raw);
            }
        }
        Ok(w.finish())
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let meta: CheckpointMeta = serde_json::from_slice(r.blob()?)
            .map_err(|e| FormatError::Invalid(format!("checkpoint config: {e}")))?;
        if meta.precision != R::PRECISION {
            return Err(Error::Mismatch(format!(
                "checkpoint holds {} values, requested {}",
                meta.precision.name(),
                R::PRECISION.name()
            )));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name = String::from_utf8(r.blob()?.to_vec())
                .map_err(|_| FormatError::Invalid("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let raw = r.blob()?;
            let width = R::PRECISION.tag() as usize;
            if raw.len() % width != 0 {
                return Err(
                    FormatError::Invalid(format!("tensor `{name}` has a ragged payload")).into(),
                );
            }
            let data = raw.chunks(width).map(R::read_le).collect();
            let t = Tensor::new(shape, data)
                .map_err(|e| FormatError::Invalid(format!("tensor `{name}`: {e}")))?;
            tensors.push((name, t));
        }
        r.finish()?;

        let names = meta.network.parameter_names();
        if tensors.len() != 3 * names.len() {
            return Err(FormatError::Invalid(format!(
                "expected {} tensors, found {}",
                3 * names.len(),
                tensors.len()
            ))
            .into());
        }
        let mut groups = tensors
            .chunks(names.len())
            .zip(["param", "adamax.m", "adamax.u"])
            .map(|(chunk, prefix)| {
                chunk
                    .iter()
                    .zip(&names)
                    .map(|((found, t), name)| {
                        if *found == format!("{prefix}.{name}") {
                            Ok(t.clone())
                        } else {
                            Err(Error::from(FormatError::Invalid(format!(
                                "expected tensor `{prefix}.{name}`, found `{found}`"
                            ))))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            });
        let params = groups.next().unwrap()?;
        let m = groups.next().unwrap()?;
        let u = groups.next().unwrap()?;
        let layers = params
            .chunks(2)
            .map(|wb| crate::network::Dense {
                weight: wb[0].clone(),
                bias: wb[1].clone(),
            })
            .collect();
        let network = Network::from_layers(meta.network, layers)?;
        for (a, b) in m
            .iter()
            .zip(&u)
            .zip(network.parameters())
            .map(|((m, u), p)| ((m, p), (u, p)))
        {
            a.0.expect_shape(a.1.shape(), "optimizer state")?;
            b.0.expect_shape(b.1.shape(), "optimizer state")?;
        }
        Ok(Self {
            network,
            optimizer: Adamax {
                config: meta.train.optimizer,
                step: meta.optimizer_step,
                m,
                u,
            },
            config: meta.train,
            epochs_done: meta.epochs_done,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read(path)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    precision: Precision,
    epochs_done: usize,
    optimizer_step: u64,
    network: NetworkConfig,
    train: TrainConfig,
}

/// Precision recorded in a checkpoint, read without decoding the tensors.
pub fn checkpoint_precision(bytes: &[u8]) -> Result<Precision> {
    let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let meta: CheckpointMeta = serde_json::from_slice(r.blob()?)
        .map_err(|e| FormatError::Invalid(format!("checkpoint config: {e}")))?;
    Ok(meta.precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::network::NeuronKind;

    #[test]
    fn adamax_first_step() {
        let mut p = Tensor::<f64>::zeros(&[1]);
        let mut opt = Adamax::new(AdamaxConfig::default(), &[&p]);
        opt.update(&mut [&mut p], &[Tensor::ones(&[1])]).unwrap();
        let expected = -(0.001 / 0.1) * 0.1 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((opt.m[0].data()[0] - 0.1).abs() < 1e-15);
        assert_eq!(opt.u[0].data()[0], 1.0);
    }

    #[test]
    fn adamax_zero_gradient_is_a_no_op() {
        let mut p = Tensor::<f64>::full(&[3], 0.7);
        let mut opt = Adamax::new(AdamaxConfig::default(), &[&p]);
        for _ in 0..5 {
            opt.update(&mut [&mut p], &[Tensor::zeros(&[3])]).unwrap();
        }
        assert!(p.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn adamax_constant_gradient_bounded_monotone_steps() {
        let mut p = Tensor::<f64>::zeros(&[1]);
        let mut opt = Adamax::new(AdamaxConfig::default(), &[&p]);
        let mut prev = 0.0;
        for t in 1..=200 {
            opt.update(&mut [&mut p], &[Tensor::full(&[1], 0.3)])
                .unwrap();
            let now = p.data()[0];
            let step = prev - now;
            assert!(step > 0.0);
            assert!(step <= 0.001 / (1.0 - 0.9f64.powi(t)) + 1e-15);
            prev = now;
        }
    }

    #[test]
    fn adamax_rejects_non_finite_and_keeps_state() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let mut opt = Adamax::new(AdamaxConfig::default(), &[&p]);
        let bad = Tensor::from_f64(&[2], &[1.0, f64::NAN]).unwrap();
        assert!(matches!(
            opt.update(&mut [&mut p], &[bad]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(opt.step, 0);
        assert_eq!(p.max_abs(), 0.0);
        assert!(opt.update(&mut [&mut p], &[Tensor::zeros(&[3])]).is_err());
    }

    fn tiny_task() -> (NetworkConfig, TrainConfig, Binned<f64>, Binned<f64>) {
        let synth = synth_generate(&SynthConfig {
            classes: 3,
            channels: 8,
            steps: 20,
            samples_per_class: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        let (train, test) = synth
            .dataset
            .split_stratified(0.2, &mut Rng::new(0))
            .unwrap();
        let net = NetworkConfig {
            input_channels: 8,
            hidden_layers: 1,
            hidden_size: 16,
            classes: 3,
            neuron_kind: NeuronKind::SpsnSb,
            ..NetworkConfig::default()
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 7,
            regularization: RegConfig::with_theta(0.2),
            seed: 11,
            ..TrainConfig::default()
        };
        (
            net,
            cfg,
            Binned::new(&train, 0.001, None).unwrap(),
            Binned::new(&test, 0.001, None).unwrap(),
        )
    }

    #[test]
    fn training_is_deterministic() {
        let (net, cfg, train, test) = tiny_task();
        let run = || {
            let mut t = Trainer::<f64>::new(net.clone(), cfg).unwrap();
            let report = t.fit(&train, &test, 3).unwrap();
            (
                report
                    .epochs
                    .iter()
                    .map(|e| (e.loss, e.train_accuracy, e.test_accuracy))
                    .collect::<Vec<_>>(),
                t.to_checkpoint().unwrap(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (net, cfg, train, test) = tiny_task();
        let mut straight = Trainer::<f64>::new(net.clone(), cfg).unwrap();
        let full = straight.fit(&train, &test, 4).unwrap();

        let mut first = Trainer::<f64>::new(net, cfg).unwrap();
        let head = first.fit(&train, &test, 2).unwrap();
        let mut resumed = Trainer::<f64>::from_checkpoint(&first.to_checkpoint().unwrap()).unwrap();
        assert_eq!(resumed, first);
        let tail = resumed.fit(&train, &test, 2).unwrap();

        let losses = |r: &TrainReport| r.epochs.iter().map(|e| e.loss).collect::<Vec<_>>();
        let joined: Vec<f64> = losses(&head).into_iter().chain(losses(&tail)).collect();
        assert_eq!(joined, losses(&full));
        assert_eq!(resumed.network, straight.network);
    }

    #[test]
    fn checkpoint_errors() {
        let (net, cfg, _, _) = tiny_task();
        let t = Trainer::<f32>::new(net, cfg).unwrap();
        let bytes = t.to_checkpoint().unwrap();
        assert_eq!(checkpoint_precision(&bytes).unwrap(), Precision::F32);
        assert!(matches!(
            Trainer::<f64>::from_checkpoint(&bytes),
            Err(Error::Mismatch(_))
        ));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            Trainer::<f32>::from_checkpoint(&bad),
            Err(Error::Format(FormatError::VersionMismatch { found: 2, .. }))
        ));
        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 12] ^= 0x10;
        assert!(matches!(
            Trainer::<f32>::from_checkpoint(&bad),
            Err(Error::Format(FormatError::Checksum { .. }))
        ));
    }

    #[test]
    fn checkpoint_forward_is_bit_identical() {
        let (net, cfg, train, _) = tiny_task();
        let t = Trainer::<f32>::new(net, cfg).unwrap();
        let loaded = Trainer::<f32>::from_checkpoint(&t.to_checkpoint().unwrap()).unwrap();
        let x = stack_batch(&train.rasters[..4]).unwrap().cast::<f32>();
        let a = batch_logits(&t.network, &x, ReadoutMode::Mean, &mut Rng::new(5)).unwrap();
        let b = batch_logits(&loaded.network, &x, ReadoutMode::Mean, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_csv_round_trip() {
        let report = TrainReport {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_accuracy: 0.5,
                test_accuracy: 0.25,
                loss: 1.5,
                spikes_per_ms: 3.0,
                test_spikes_per_ms: 2.5,
                seconds: 0.1,
            }],
        };
        let bytes = report.to_csv().unwrap();
        assert!(bytes.starts_with(EPOCH_HEADER.join(",").as_bytes()));
        assert_eq!(TrainReport::from_csv(&bytes).unwrap(), report);
        assert!(TrainReport::default()
            .to_csv()
            .unwrap()
            .starts_with(b"epoch,"));
    }

    #[test]
    fn untrained_network_is_near_chance() {
        let synth = synth_generate(&SynthConfig {
            classes: 20,
            channels: 30,
            steps: 30,
            samples_per_class: 20,
            ..SynthConfig::default()
        })
        .unwrap();
        let data = Binned::<f32>::new(&synth.dataset, 0.001, None).unwrap();
        let net = Network::<f32>::build(
            NetworkConfig {
                input_channels: 30,
                neuron_kind: NeuronKind::Lif,
                ..NetworkConfig::default()
            },
            &mut Rng::new(2),
        )
        .unwrap();
        let eval = evaluate(&net, &data, 64, ReadoutMode::Mean, 1, &mut Rng::new(0)).unwrap();
        let n = data.len() as f64;
        let sigma = (0.05 * 0.95 / n).sqrt();
        assert!(
            (eval.accuracy - 0.05).abs() <= 4.0 * sigma,
            "accuracy {}",
            eval.accuracy
        );
        let again = evaluate(&net, &data, 64, ReadoutMode::Mean, 1, &mut Rng::new(9)).unwrap();
        assert_eq!(eval, again);
    }

    #[test]
    fn channel_mismatch_is_reported() {
        let (net, cfg, _, _) = tiny_task();
        let t = Trainer::<f64>::new(
            NetworkConfig {
                input_channels: 9,
                ..net
            },
            cfg,
        )
        .unwrap();
        let synth = synth_generate(&SynthConfig {
            channels: 8,
            ..SynthConfig::default()
        })
        .unwrap();
        let data = Binned::new(&synth.dataset, 0.001, None).unwrap();
        assert!(matches!(t.evaluate(&data), Err(Error::Mismatch(_))));
    }
}
