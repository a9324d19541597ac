//! Training objective: cross-entropy over the time-reduced readout potentials
//! plus an optional squared-hinge penalty on the network's mean firing rate.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::Real;

pub use crate::autodiff::ReadoutMode;

/// Spike-frequency regularization settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegConfig {
    pub enabled: bool,
    /// Per-neuron mean-rate bound; the penalty starts above `theta_reg·N`.
    pub theta_reg: f64,
    /// Multiplier on the penalty before it is added to the loss.
    pub weight: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            theta_reg: 0.4,
            weight: 1.0,
        }
    }
}

impl RegConfig {
    pub fn with_theta(theta_reg: f64) -> Self {
        Self {
            enabled: true,
            theta_reg,
            weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_reg >= 0.0) || !self.theta_reg.is_finite() {
            return Err(Error::config(
                "regularization.theta_reg",
                "must be a finite value >= 0",
            ));
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::config(
                "regularization.weight",
                "must be a finite value >= 0",
            ));
        }
        Ok(())
    }
}

/// `[T, B, C] -> [B, C]` logits.
pub fn readout_reduce<R: Real>(
    tape: &mut Tape<R>,
    potentials: Var,
    mode: ReadoutMode,
) -> Result<Var> {
    tape.readout_reduce(potentials, mode)
}

/// Batch-mean negative log-softmax at the targets.
pub fn cross_entropy<R: Real>(tape: &mut Tape<R>, logits: Var, targets: &[usize]) -> Result<Var> {
    tape.cross_entropy(logits, targets)
}

/// Batch mean of `relu(Σ_n mean_t S_n - θ·N)²` over the given `[T, B, N_l]` rasters.
pub fn spike_regularizer<R: Real>(
    tape: &mut Tape<R>,
    spikes: &[Var],
    theta_reg: f64,
) -> Result<Var> {
    tape.spike_regularizer(spikes, R::of(theta_reg))
}

/// Loss variables of one batch.
#[derive(Clone, Copy, Debug)]
pub struct Loss {
    pub total: Var,
    pub logits: Var,
    pub cross_entropy: Var,
    pub regularizer: Option<Var>,
}

/// Cross-entropy on the reduced readout, plus the weighted regularizer when
/// enabled and the network spikes.
pub fn objective<R: Real>(
    tape: &mut Tape<R>,
    potentials: Var,
    spikes: &[Var],
    targets: &[usize],
    mode: ReadoutMode,
    reg: &RegConfig,
) -> Result<Loss> {
    let logits = readout_reduce(tape, potentials, mode)?;
    let ce = cross_entropy(tape, logits, targets)?;
    if !reg.enabled || spikes.is_empty() {
        return Ok(Loss {
            total: ce,
            logits,
            cross_entropy: ce,
            regularizer: None,
        });
    }
    reg.validate()?;
    let penalty = spike_regularizer(tape, spikes, reg.theta_reg)?;
    let weighted = tape.scale(penalty, R::of(reg.weight));
    let total = tape.add(ce, weighted)?;
    Ok(Loss {
        total,
        logits,
        cross_entropy: ce,
        regularizer: Some(penalty),
    })
}

/// Cross-entropy of one logit row, evaluated directly.
pub fn cross_entropy_value(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::invalid(format!(
            "class index {target} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[target])
}

/// Regularizer of one sample from its per-neuron mean rates.
pub fn regularizer_value(rates: &[f64], theta_reg: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::invalid("regularizer over zero neurons"));
    }
    let excess = (rates.iter().sum::<f64>() - theta_reg * rates.len() as f64).max(0.0);
    Ok(excess * excess)
}
