//! Event datasets: the `SPKE` container, binning into binary rasters, channel
//! shift and zoom augmentations, and a synthetic spike-pattern task.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::error::{Error, FormatError, Result};
use crate::numerics::{Real, Rng, Tensor};

pub const DATASET_MAGIC: &[u8; 4] = b"SPKE";
pub const DATASET_VERSION: u16 = 1;

/// One input spike: time in microseconds and channel index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub time_us: u64,
    pub channel: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSample {
    pub label: u16,
    pub duration_us: u64,
    /// Sorted by time.
    pub events: Vec<Event>,
}

impl EventSample {
    pub fn duration(&self) -> f64 {
        self.duration_us as f64 * 1e-6
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDataset {
    pub channel_count: u32,
    pub class_count: u32,
    pub samples: Vec<EventSample>,
}

impl EventDataset {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid("dataset has no samples"));
        }
        if self.channel_count == 0 || self.class_count == 0 {
            return Err(Error::invalid(
                "dataset needs at least one channel and one class",
            ));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if u32::from(s.label) >= self.class_count {
                return Err(Error::invalid(format!(
                    "sample {i}: label {} >= class count {}",
                    s.label, self.class_count
                )));
            }
            let mut prev = 0;
            for e in &s.events {
                if e.channel >= self.channel_count {
                    return Err(Error::invalid(format!(
                        "sample {i}: channel {} >= channel count {}",
                        e.channel, self.channel_count
                    )));
                }
                if e.time_us >= s.duration_us {
                    return Err(Error::invalid(format!(
                        "sample {i}: event at {} us outside duration {} us",
                        e.time_us, s.duration_us
                    )));
                }
                if e.time_us < prev {
                    return Err(Error::invalid(format!(
                        "sample {i}: events not sorted by time"
                    )));
                }
                prev = e.time_us;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label as usize).collect()
    }

    pub fn max_duration_us(&self) -> u64 {
        self.samples
            .iter()
            .map(|s| s.duration_us)
            .max()
            .unwrap_or(0)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut w = Writer::new(DATASET_MAGIC, DATASET_VERSION);
        w.u32(self.channel_count);
        w.u32(self.class_count);
        w.u64(self.samples.len() as u64);
        for s in &self.samples {
            w.u16(s.label);
            w.u64(s.duration_us);
            w.u64(s.events.len() as u64);
            for e in &s.events {
                w.u64(e.time_us);
                w.u32(e.channel);
            }
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, DATASET_MAGIC, DATASET_VERSION)?;
        let channel_count = r.u32()?;
        let class_count = r.u32()?;
        // every sample needs at least its 18-byte header
        let sample_count = r.count(18)?;
        let mut samples = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let label = r.u16()?;
            let duration_us = r.u64()?;
            let n = r.count(12)?;
            let mut events = Vec::with_capacity(n);
            for _ in 0..n {
                let time_us = r.u64()?;
                let channel = r.u32()?;
                events.push(Event { time_us, channel });
            }
            samples.push(EventSample {
                label,
                duration_us,
                events,
            });
        }
        r.finish()?;
        let ds = Self {
            channel_count,
            class_count,
            samples,
        };
        ds.validate()
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Seeded stratified split; each class contributes `round(n·test_fraction)`
    /// samples to the test side. Returns `(train, test)`.
    pub fn split_stratified(
        &self,
        test_fraction: f64,
        rng: &mut Rng,
    ) -> Result<(EventDataset, EventDataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::invalid("test fraction must lie in [0, 1)"));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in 0..self.class_count {
            let mut idx: Vec<usize> = (0..self.samples.len())
                .filter(|&i| u32::from(self.samples[i].label) == class)
                .collect();
            rng.shuffle(&mut idx);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            for (k, &i) in idx.iter().enumerate() {
                if k < n_test {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
        }
        train.sort_unstable();
        test.sort_unstable();
        let subset = |idx: &[usize]| EventDataset {
            channel_count: self.channel_count,
            class_count: self.class_count,
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
        };
        Ok((subset(&train), subset(&test)))
    }
}

/// Integration step as a whole number of microseconds.
fn step_us(dt: f64) -> Result<u64> {
    let us = dt * 1e6;
    let rounded = us.round();
    if !(rounded >= 1.0) || (us - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::invalid(format!(
            "dt = {dt} s is not a whole number of microseconds"
        )));
    }
    Ok(rounded as u64)
}

/// Number of steps needed to cover `duration_us`.
pub fn steps_for(duration_us: u64, dt: f64) -> Result<usize> {
    let step = step_us(dt)?;
    Ok(duration_us.div_ceil(step).max(1) as usize)
}

/// `[T, channels]` binary raster with bin `floor(time/dt)`; events at or past
/// `T·dt` are dropped and coincident events collapse to one spike.
pub fn bin_events<R: Real>(
    sample: &EventSample,
    steps: usize,
    dt: f64,
    channels: usize,
) -> Result<Tensor<R>> {
    let step = step_us(dt)?;
    let mut out = Tensor::zeros(&[steps, channels]);
    let data = out.data_mut();
    for e in &sample.events {
        let c = e.channel as usize;
        if c >= channels {
            return Err(Error::invalid(format!(
                "channel {c} out of range for {channels} channels"
            )));
        }
        let t = (e.time_us / step) as usize;
        if t < steps {
            data[t * channels + c] = R::one();
        }
    }
    Ok(out)
}

/// Stacks `[T, C]` rasters into the network layout `[T, B, C]`.
pub fn stack_batch<R: Real>(rasters: &[Tensor<R>]) -> Result<Tensor<R>> {
    let first = rasters
        .first()
        .ok_or_else(|| Error::invalid("empty batch"))?;
    let (steps, channels) = (first.dim(0), first.dim(1));
    let batch = rasters.len();
    let mut out = vec![R::zero(); steps * batch * channels];
    for (b, r) in rasters.iter().enumerate() {
        r.expect_shape(&[steps, channels], "batch raster")?;
        for t in 0..steps {
            out[(t * batch + b) * channels..(t * batch + b + 1) * channels]
                .copy_from_slice(&r.data()[t * channels..(t + 1) * channels]);
        }
    }
    Tensor::new(vec![steps, batch, channels], out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub shift: bool,
    pub k_shift: f64,
    pub scale: bool,
    pub k_scale: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shift: true,
            k_shift: 0.1,
            scale: true,
            k_scale: 0.3,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            shift: false,
            scale: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.k_shift) {
            return Err(Error::config("augment.k_shift", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.k_scale) {
            return Err(Error::config("augment.k_scale", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        (self.shift && self.k_shift > 0.0) || (self.scale && self.k_scale > 0.0)
    }

    /// Shift, then scale, each when enabled.
    pub fn apply<R: Real>(&self, raster: &Tensor<R>, rng: &mut Rng) -> Result<Tensor<R>> {
        let mut out = raster.clone();
        if self.shift {
            out = augment_shift(&out, self.k_shift, rng)?;
        }
        if self.scale {
            out = augment_scale(&out, self.k_scale, rng)?;
        }
        Ok(out)
    }
}

fn check_raster<R: Real>(raster: &Tensor<R>) -> Result<(usize, usize)> {
    if raster.rank() != 2 {
        return Err(Error::shape(format!(
            "raster must be [T, C], got {:?}",
            raster.shape()
        )));
    }
    Ok((raster.dim(0), raster.dim(1)))
}

/// Moves every spike by `offset` channels; spikes leaving `[0, C)` are dropped.
pub fn shift_channels<R: Real>(raster: &Tensor<R>, offset: i64) -> Result<Tensor<R>> {
    let (steps, channels) = check_raster(raster)?;
    let mut out = Tensor::zeros(raster.shape());
    let (src, dst) = (raster.data(), out.data_mut());
    for t in 0..steps {
        for c in 0..channels {
            let v = src[t * channels + c];
            let to = c as i64 + offset;
            if v != R::zero() && (0..channels as i64).contains(&to) {
                dst[t * channels + to as usize] = v;
            }
        }
    }
    Ok(out)
}

/// Random channel shift by `round(f·C)` with `f ~ U[-k_shift, k_shift]`.
pub fn augment_shift<R: Real>(
    raster: &Tensor<R>,
    k_shift: f64,
    rng: &mut Rng,
) -> Result<Tensor<R>> {
    let (_, channels) = check_raster(raster)?;
    if !(0.0..1.0).contains(&k_shift) {
        return Err(Error::invalid("k_shift must lie in [0, 1)"));
    }
    let f = rng.uniform_range(-k_shift, k_shift);
    shift_channels(raster, (f * channels as f64).round() as i64)
}

/// Origin-anchored nearest-neighbour zoom: output `(t, c)` reads input
/// `(round(t·factor), round(c·factor))`, zero when that falls outside.
pub fn scale_raster<R: Real>(raster: &Tensor<R>, factor: f64) -> Result<Tensor<R>> {
    let (steps, channels) = check_raster(raster)?;
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::invalid("scale factor must be a finite value > 0"));
    }
    let src_index = |i: usize, n: usize| {
        let j = (i as f64 * factor).round();
        (j < n as f64).then_some(j as usize)
    };
    let rows: Vec<Option<usize>> = (0..steps).map(|t| src_index(t, steps)).collect();
    let cols: Vec<Option<usize>> = (0..channels).map(|c| src_index(c, channels)).collect();
    let mut out = Tensor::zeros(raster.shape());
    let (src, dst) = (raster.data(), out.data_mut());
    for (t, row) in rows.iter().enumerate() {
        let Some(st) = row else { continue };
        for (c, col) in cols.iter().enumerate() {
            if let Some(sc) = col {
                dst[t * channels + c] = src[st * channels + sc];
            }
        }
    }
    Ok(out)
}

/// Random zoom by one factor `~ U[1-k_scale, 1+k_scale]` on both axes.
pub fn augment_scale<R: Real>(
    raster: &Tensor<R>,
    k_scale: f64,
    rng: &mut Rng,
) -> Result<Tensor<R>> {
    check_raster(raster)?;
    if !(0.0..1.0).contains(&k_scale) {
        return Err(Error::invalid("k_scale must lie in [0, 1)"));
    }
    let factor = rng.uniform_range(1.0 - k_scale, 1.0 + k_scale);
    scale_raster(raster, factor)
}

/// Settings of the synthetic spike-pattern task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub classes: usize,
    pub channels: usize,
    pub steps: usize,
    pub samples_per_class: usize,
    /// Maximum per-spike time jitter in steps.
    pub jitter: usize,
    /// Prototype spike density.
    pub density: f64,
    /// Per-spike drop probability; the same expected number is added at random.
    pub noise: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            channels: 20,
            steps: 100,
            samples_per_class: 63,
            jitter: 2,
            density: 0.05,
            noise: 0.01,
            dt: 0.001,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("classes", self.classes),
            ("channels", self.channels),
            ("steps", self.steps),
            ("samples_per_class", self.samples_per_class),
        ] {
            if v == 0 {
                return Err(Error::config(format!("synth.{name}"), "must be >= 1"));
            }
        }
        if self.classes > u16::MAX as usize + 1 || self.channels > u32::MAX as usize {
            return Err(Error::config(
                "synth",
                "class or channel count exceeds the container range",
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::config("synth.density", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::config("synth.noise", "must lie in [0, 1]"));
        }
        step_us(self.dt).map_err(|e| Error::config("synth.dt", e.to_string()))?;
        Ok(())
    }
}

/// Generated dataset with the class prototypes it was drawn from.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub dataset: EventDataset,
    /// One noise-free sample per class, labelled with its class.
    pub prototypes: Vec<EventSample>,
}

/// Each class is a random binary `[T, C]` prototype; samples jitter every
/// spike by up to `±jitter` steps, drop spikes with probability `noise`, and
/// add random spikes at the same expected rate. Coinciding spikes merge.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let step = step_us(cfg.dt)?;
    let (steps, channels) = (cfg.steps, cfg.channels);
    let to_sample = |label: usize, mut cells: Vec<(usize, usize)>| {
        cells.sort_unstable();
        cells.dedup();
        EventSample {
            label: label as u16,
            duration_us: steps as u64 * step,
            events: cells
                .into_iter()
                .map(|(t, c)| Event {
                    time_us: t as u64 * step,
                    channel: c as u32,
                })
                .collect(),
        }
    };

    let mut prototypes: Vec<Vec<(usize, usize)>> = Vec::with_capacity(cfg.classes);
    let mut attempts = 0;
    while prototypes.len() < cfg.classes {
        attempts += 1;
        if attempts > 1000 * cfg.classes {
            return Err(Error::invalid(
                "could not draw distinct non-empty prototypes",
            ));
        }
        let mut cells = Vec::new();
        for t in 0..steps {
            for c in 0..channels {
                if rng.bernoulli(cfg.density) {
                    cells.push((t, c));
                }
            }
        }
        if !cells.is_empty() && !prototypes.contains(&cells) {
            prototypes.push(cells);
        }
    }

    let mut samples = Vec::with_capacity(cfg.classes * cfg.samples_per_class);
    for (label, proto) in prototypes.iter().enumerate() {
        for _ in 0..cfg.samples_per_class {
            let mut cells = Vec::with_capacity(proto.len());
            for &(t, c) in proto {
                if cfg.noise > 0.0 && rng.bernoulli(cfg.noise) {
                    continue;
                }
                let shift = if cfg.jitter > 0 {
                    rng.below(2 * cfg.jitter + 1) as i64 - cfg.jitter as i64
                } else {
                    0
                };
                let nt = t as i64 + shift;
                if (0..steps as i64).contains(&nt) {
                    cells.push((nt as usize, c));
                }
            }
            if cfg.noise > 0.0 {
                for _ in 0..proto.len() {
                    if rng.bernoulli(cfg.noise) {
                        cells.push((rng.below(steps), rng.below(channels)));
                    }
                }
            }
            samples.push(to_sample(label, cells));
        }
    }
    let dataset = EventDataset {
        channel_count: channels as u32,
        class_count: cfg.classes as u32,
        samples,
    };
    dataset.validate()?;
    let prototypes = prototypes
        .into_iter()
        .enumerate()
        .map(|(label, cells)| to_sample(label, cells))
        .collect();
    Ok(Synthetic {
        dataset,
        prototypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn tiny() -> EventDataset {
        EventDataset {
            channel_count: 4,
            class_count: 2,
            samples: vec![
                EventSample {
                    label: 0,
                    duration_us: 5000,
                    events: vec![
                        Event {
                            time_us: 100,
                            channel: 3,
                        },
                        Event {
                            time_us: 1500,
                            channel: 0,
                        },
                    ],
                },
                EventSample {
                    label: 1,
                    duration_us: 3000,
                    events: vec![],
                },
                EventSample {
                    label: 1,
                    duration_us: 3000,
                    events: vec![Event {
                        time_us: 2999,
                        channel: 1,
                    }],
                },
            ],
        }
    }

    #[test]
    fn container_round_trip() {
        let ds = tiny();
        let bytes = ds.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"SPKE");
        assert_eq!(EventDataset::from_bytes(&bytes).unwrap(), ds);
    }

    #[test]
    fn container_errors_are_distinct() {
        let bytes = tiny().to_bytes().unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            EventDataset::from_bytes(&bad),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            EventDataset::from_bytes(&bad),
            Err(Error::Format(FormatError::VersionMismatch { found: 9, .. }))
        ));

        // declare 3 samples but keep only the first two
        let mut short = EventDataset {
            samples: tiny().samples[..2].to_vec(),
            ..tiny()
        }
        .to_bytes()
        .unwrap();
        short.truncate(short.len() - 4);
        short[14..22].copy_from_slice(&3u64.to_le_bytes());
        assert!(matches!(
            EventDataset::from_bytes(&short),
            Err(Error::Format(FormatError::Truncated { .. }))
        ));

        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 10] ^= 0x40;
        assert!(matches!(
            EventDataset::from_bytes(&bad),
            Err(Error::Format(FormatError::Checksum { .. }))
        ));

        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            EventDataset::from_bytes(&long),
            Err(Error::Format(FormatError::TrailingBytes(1)))
        ));
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let mut ds = tiny();
        ds.samples[0].events[0].channel = 4;
        assert!(ds.validate().is_err());
        let mut ds = tiny();
        ds.samples[0].events.reverse();
        assert!(ds.validate().is_err());
        let mut ds = tiny();
        ds.samples[1].label = 2;
        assert!(ds.to_bytes().is_err());
    }

    #[test]
    fn binning_floor_and_clamp() {
        let s = EventSample {
            label: 0,
            duration_us: 10_000,
            events: vec![
                Event {
                    time_us: 1500,
                    channel: 2,
                },
                Event {
                    time_us: 1700,
                    channel: 2,
                },
                Event {
                    time_us: 3000,
                    channel: 0,
                },
                Event {
                    time_us: 9999,
                    channel: 1,
                },
            ],
        };
        let r = bin_events::<f32>(&s, 5, 0.001, 3).unwrap();
        assert_eq!(r.data()[3 + 2], 1.0);
        assert_eq!(r.data()[3 * 3], 1.0);
        assert_eq!(r.sum(), 2.0);
        assert!(bin_events::<f32>(&s, 10, 0.001, 2).is_err());
        assert!(bin_events::<f32>(&s, 10, 0.0015, 3).is_ok());
        assert!(bin_events::<f32>(&s, 10, 1e-7, 3).is_err());
        assert_eq!(steps_for(10_000, 0.001).unwrap(), 10);
        assert_eq!(steps_for(10_001, 0.001).unwrap(), 11);
    }

    #[test]
    fn stack_batch_layout() {
        let a = Tensor::<f32>::from_fn(&[2, 3], |i| i as f32);
        let b = Tensor::<f32>::from_fn(&[2, 3], |i| 10.0 + i as f32);
        let s = stack_batch(&[a, b]).unwrap();
        assert_eq!(s.shape(), &[2, 2, 3]);
        assert_eq!(
            s.data(),
            &[0., 1., 2., 10., 11., 12., 3., 4., 5., 13., 14., 15.]
        );
    }

    #[test]
    fn shift_by_two_on_ten_channels() {
        let mut r = Tensor::<f32>::zeros(&[1, 10]);
        r.data_mut()[9] = 1.0;
        r.data_mut()[3] = 1.0;
        let s = shift_channels(&r, 2).unwrap();
        assert_eq!(s.sum(), 1.0);
        assert_eq!(s.data()[5], 1.0);
        let mut rng = Rng::new(0);
        assert_eq!(augment_shift(&r, 0.0, &mut rng).unwrap(), r);
    }

    #[test]
    fn scale_impulse() {
        let mut r = Tensor::<f32>::zeros(&[10, 10]);
        r.data_mut()[4 * 10 + 6] = 1.0;
        let s = scale_raster(&r, 2.0).unwrap();
        assert_eq!(s.sum(), 1.0);
        assert_eq!(s.data()[2 * 10 + 3], 1.0);
        assert_eq!(scale_raster(&r, 1.0).unwrap(), r);
        let mut rng = Rng::new(0);
        assert_eq!(augment_scale(&r, 0.0, &mut rng).unwrap(), r);
    }

    #[test]
    fn augment_keeps_binarity() {
        let mut rng = Rng::new(3);
        let r = Tensor::<f32>::from_fn(&[50, 30], |_| if rng.bernoulli(0.2) { 1.0 } else { 0.0 });
        for _ in 0..20 {
            let a = AugmentConfig::default().apply(&r, &mut rng).unwrap();
            assert!(a.is_binary());
            assert_eq!(a.shape(), r.shape());
        }
    }

    #[test]
    fn synth_is_deterministic_and_sized() {
        let cfg = SynthConfig::default();
        let a = synth_generate(&cfg).unwrap();
        let b = synth_generate(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.dataset.len(), cfg.classes * cfg.samples_per_class);
        assert_eq!(a.dataset.to_bytes().unwrap(), b.dataset.to_bytes().unwrap());
        for i in 0..a.prototypes.len() {
            for j in 0..i {
                assert_ne!(a.prototypes[i].events, a.prototypes[j].events);
            }
        }
    }

    #[test]
    fn synth_without_noise_reproduces_prototypes() {
        let cfg = SynthConfig {
            jitter: 0,
            noise: 0.0,
            samples_per_class: 4,
            ..SynthConfig::default()
        };
        let out = synth_generate(&cfg).unwrap();
        for s in &out.dataset.samples {
            assert_eq!(s.events, out.prototypes[s.label as usize].events);
        }
    }

    #[test]
    fn stratified_split_counts() {
        let ds = synth_generate(&SynthConfig::default()).unwrap().dataset;
        let (train, test) = ds.split_stratified(0.2, &mut Rng::new(1)).unwrap();
        for class in 0..5u16 {
            assert_eq!(
                train.samples.iter().filter(|s| s.label == class).count(),
                50
            );
            assert_eq!(test.samples.iter().filter(|s| s.label == class).count(), 13);
        }
    }

    fn arb_dataset() -> impl Strategy<Value = EventDataset> {
        (1u32..50, 1u32..8, 1usize..6).prop_flat_map(|(channels, classes, n)| {
            let sample =
                (0..classes as u16, 1u64..100_000).prop_flat_map(move |(label, duration)| {
                    prop::collection::vec((0..duration, 0..channels), 0..40).prop_map(
                        move |mut ev| {
                            ev.sort_unstable();
                            EventSample {
                                label,
                                duration_us: duration,
                                events: ev
                                    .into_iter()
                                    .map(|(time_us, channel)| Event { time_us, channel })
                                    .collect(),
                            }
                        },
                    )
                });
            prop::collection::vec(sample, n).prop_map(move |samples| EventDataset {
                channel_count: channels,
                class_count: classes,
                samples,
            })
        })
    }

    proptest! {
        #[test]
        fn container_round_trip_is_lossless(ds in arb_dataset()) {
            let bytes = ds.to_bytes().unwrap();
            prop_assert_eq!(EventDataset::from_bytes(&bytes).unwrap(), ds);
        }

        #[test]
        fn shift_is_invertible_on_survivors(cells in prop::collection::vec((0usize..8, 0usize..12), 0..30), offset in -6i64..6) {
            let mut r = Tensor::<f64>::zeros(&[8, 12]);
            for (t, c) in cells {
                r.data_mut()[t * 12 + c] = 1.0;
            }
            let shifted = shift_channels(&r, offset).unwrap();
            prop_assert!(shifted.sum() <= r.sum());
            let back = shift_channels(&shifted, -offset).unwrap();
            for (b, o) in back.data().iter().zip(r.data()) {
                prop_assert!(*b <= *o);
            }
            prop_assert_eq!(back.sum(), shifted.sum());
        }

        #[test]
        fn binning_counts_collisions(events in prop::collection::vec((0u64..5000, 0u32..6), 0..60)) {
            let mut events = events;
            events.sort_unstable();
            let sample = EventSample {
                label: 0,
                duration_us: 5000,
                events: events.iter().map(|&(time_us, channel)| Event { time_us, channel }).collect(),
            };
            let raster = bin_events::<f64>(&sample, 5, 0.001, 6).unwrap();
            let mut cells: Vec<(u64, u32)> = events.iter().map(|&(t, c)| (t / 1000, c)).collect();
            cells.sort_unstable();
            cells.dedup();
            prop_assert_eq!(raster.sum() as usize, cells.len());
            prop_assert!(raster.sum() as usize <= events.len());
        }
    }
}
