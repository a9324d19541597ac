//! Neuron models: sequential LIF with reset, the leaky integrator (sequential
//! reference and FFT-parallel form), SPSN (parallel LI followed by a
//! stochastic firing stage), and the non-spiking readout.
//!
//! Time index `t = 0` of a tensor is the first integration step; all state
//! starts at zero. Input resistance is 1 and the reset potential is 0.

use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, EscapeParams, Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{build_decay_kernel, compose_kernels, Real, Rng, Tensor};

/// Time constants and threshold. The decays are always derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronParams {
    /// Synaptic time constant (s).
    pub tau_syn: f64,
    /// Membrane time constant (s).
    pub tau_mem: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Spiking threshold (V).
    pub u_th: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau_syn: 0.02,
            tau_mem: 0.02,
            dt: 0.001,
            u_th: 1.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_syn", self.tau_syn),
            ("tau_mem", self.tau_mem),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(
                    format!("network.{name}"),
                    "must be a finite value > 0",
                ));
            }
        }
        if !self.u_th.is_finite() {
            return Err(Error::config("network.u_th", "must be finite"));
        }
        Ok(())
    }

    /// Current decay `exp(-dt/τ_syn)`.
    pub fn alpha(&self) -> f64 {
        (-self.dt / self.tau_syn).exp()
    }

    /// Membrane decay `exp(-dt/τ_mem)`.
    pub fn beta(&self) -> f64 {
        (-self.dt / self.tau_mem).exp()
    }

    /// Parameters with the given decays (time constants solved for `dt`).
    pub fn from_decays(alpha: f64, beta: f64, dt: f64, u_th: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("decays must lie in (0, 1)"));
        }
        Ok(Self {
            tau_syn: -dt / alpha.ln(),
            tau_mem: -dt / beta.ln(),
            dt,
            u_th,
        })
    }
}

/// Binary `[T, B, N]` spike tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRaster<R>(Tensor<R>);

impl<R: Real> SpikeRaster<R> {
    pub fn new(values: Tensor<R>) -> Result<Self> {
        if !values.is_binary() {
            return Err(Error::invalid("spike raster must contain only 0 and 1"));
        }
        if values.rank() != 3 {
            return Err(Error::shape(format!(
                "spike raster must be [T, B, N], got {:?}",
                values.shape()
            )));
        }
        Ok(Self(values))
    }

    pub fn tensor(&self) -> &Tensor<R> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<R> {
        self.0
    }

    pub fn count(&self) -> f64 {
        self.0.sum_f64()
    }
}

/// Current and membrane potential traces, `[T, B, N]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct MembraneTrace<R> {
    pub current: Tensor<R>,
    pub potential: Tensor<R>,
}

/// Differentiable leaky-integrator outputs on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LiOutput {
    pub current: Var,
    pub potential: Var,
}

impl LiOutput {
    pub fn trace<R: Real>(&self, tape: &Tape<R>) -> MembraneTrace<R> {
        MembraneTrace {
            current: tape.value(self.current).clone(),
            potential: tape.value(self.potential).clone(),
        }
    }
}

/// Firing stage of an SPSN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Firing {
    /// `s ~ Bernoulli(σ(u))`, or `σ(u - u_th)` with `threshold_offset`.
    SigmoidBernoulli { threshold_offset: bool },
    /// Hard binary Gumbel-Softmax sample with straight-through gradient.
    GumbelSoftmax { temperature: f64 },
    /// Escape-rate firing with per-step probability `min(1, ρ(u)·dt)`.
    Escape(EscapeParams),
}

impl Firing {
    /// Parses `sb`, `gs` or `escape` with their default settings.
    pub fn parse(name: &str, u_th: f64) -> Result<Self> {
        match name {
            "sb" | "sigmoid-bernoulli" => Ok(Firing::SigmoidBernoulli {
                threshold_offset: false,
            }),
            "gs" | "gumbel-softmax" => Ok(Firing::GumbelSoftmax { temperature: 1.0 }),
            "escape" => Ok(Firing::Escape(EscapeParams::for_threshold(u_th))),
            other => Err(Error::invalid(format!("unknown firing variant `{other}`"))),
        }
    }
}

fn check_sequence<R: Real>(x: &Tensor<R>) -> Result<()> {
    if x.rank() == 0 || x.dim(0) == 0 {
        return Err(Error::shape(format!(
            "expected a time-leading tensor, got {:?}",
            x.shape()
        )));
    }
    x.ensure_finite("neuron input")
}

/// Sequential LIF with reset (spikes use the fast-sigmoid surrogate).
pub fn lif_forward<R: Real>(
    tape: &mut Tape<R>,
    x: Var,
    params: &NeuronParams,
    surrogate_slope: f64,
) -> Result<(Var, MembraneTrace<R>)> {
    let spikes = lif_spikes(tape, x, params, surrogate_slope)?;
    let trace = match tape.lif_state(spikes) {
        Some((current, potential)) => MembraneTrace {
            current: current.clone(),
            potential: potential.clone(),
        },
        // replaying tapes keep no traces
        None => MembraneTrace {
            current: Tensor::zeros(tape.shape(spikes)),
            potential: Tensor::zeros(tape.shape(spikes)),
        },
    };
    Ok((spikes, trace))
}

/// [`lif_forward`] without copying the traces out.
pub fn lif_spikes<R: Real>(
    tape: &mut Tape<R>,
    x: Var,
    params: &NeuronParams,
    surrogate_slope: f64,
) -> Result<Var> {
    params.validate()?;
    check_sequence(tape.value(x))?;
    tape.lif(
        x,
        R::of(params.alpha()),
        R::of(params.beta()),
        R::of(params.u_th),
        R::of(surrogate_slope),
    )
}

/// Reference recursion `i[t] = α·i[t-1] + x[t]`, `u[t] = β·u[t-1] + (1-β)·i[t]`.
pub fn li_forward_sequential<R: Real>(
    x: &Tensor<R>,
    params: &NeuronParams,
) -> Result<MembraneTrace<R>> {
    params.validate()?;
    check_sequence(x)?;
    let (alpha, beta) = (R::of(params.alpha()), R::of(params.beta()));
    let gain = R::one() - beta;
    let lanes = x.lanes();
    let mut current = Tensor::zeros(x.shape());
    let mut potential = Tensor::zeros(x.shape());
    let (cur, pot) = (current.data_mut(), potential.data_mut());
    for (t, row) in x.data().chunks(lanes).enumerate() {
        for (l, &xv) in row.iter().enumerate() {
            let k = t * lanes + l;
            let (i_prev, u_prev) = if t == 0 {
                (R::zero(), R::zero())
            } else {
                (cur[k - lanes], pot[k - lanes])
            };
            let i = alpha * i_prev + xv;
            cur[k] = i;
            pot[k] = beta * u_prev + gain * i;
        }
    }
    Ok(MembraneTrace { current, potential })
}

/// Leaky integrator for all steps at once: `i = ℓ ⊛ x`, `u = k ⊛ i` with
/// `ℓ[t] = α^t`, `k[t] = (1-β)·β^t`, both evaluated as causal FFT convolutions.
pub fn li_forward_parallel<R: Real>(
    tape: &mut Tape<R>,
    x: Var,
    params: &NeuronParams,
) -> Result<LiOutput> {
    params.validate()?;
    check_sequence(tape.value(x))?;
    let t_len = tape.shape(x)[0];
    let ell = build_decay_kernel(R::of(params.alpha()), R::one(), t_len)?;
    let k = build_decay_kernel(R::of(params.beta()), R::of(1.0 - params.beta()), t_len)?;
    let current = tape.causal_conv(x, ell.values())?;
    let potential = tape.causal_conv(current, k.values())?;
    Ok(LiOutput { current, potential })
}

/// Membrane potential alone, `u = (k ⊛ ℓ) ⊛ x`, as one causal convolution
/// with the composed (truncated) kernel.
pub fn li_potential_parallel<R: Real>(
    tape: &mut Tape<R>,
    x: Var,
    params: &NeuronParams,
) -> Result<Var> {
    params.validate()?;
    check_sequence(tape.value(x))?;
    let t_len = tape.shape(x)[0];
    let ell = build_decay_kernel(R::of(params.alpha()), R::one(), t_len)?;
    let k = build_decay_kernel(R::of(params.beta()), R::of(1.0 - params.beta()), t_len)?;
    let kernel = compose_kernels(k.values(), ell.values())?;
    tape.causal_conv(x, &kernel)
}

/// Non-spiking readout layer: the leaky-integrator potential.
pub fn readout_forward<R: Real>(tape: &mut Tape<R>, x: Var, params: &NeuronParams) -> Result<Var> {
    li_potential_parallel(tape, x, params)
}

/// Parallel leaky integration followed by independent per-step stochastic
/// firing. Returns `(spikes, potential)`.
pub fn spsn_forward<R: Real>(
    tape: &mut Tape<R>,
    x: Var,
    params: &NeuronParams,
    firing: &Firing,
    rng: &mut Rng,
) -> Result<(Var, Var)> {
    let u = li_potential_parallel(tape, x, params)?;
    let spikes = match *firing {
        Firing::SigmoidBernoulli { threshold_offset } => {
            let offset = if threshold_offset { params.u_th } else { 0.0 };
            tape.sigmoid_bernoulli(u, R::of(offset), rng)?
        }
        Firing::GumbelSoftmax { temperature } => tape.gumbel_spike(u, R::of(temperature), rng)?,
        Firing::Escape(p) => tape.escape_spike(u, p, params.dt, rng)?,
    };
    Ok((spikes, u))
}

/// Per-step spike probability `min(1, ρ(u)·dt)` with `ρ(u) = exp((u-b)/c)/a`.
pub fn escape_rate<R: Real>(u: &Tensor<R>, params: &EscapeParams, dt: f64) -> Result<Tensor<R>> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }
    Ok(u.map(|v| R::of((params.rate(v.as_f64()) * dt).min(1.0))))
}

/// Firing probability of the Sigmoid-Bernoulli stage.
pub fn sigmoid_probability<R: Real>(u: &Tensor<R>) -> Tensor<R> {
    u.map(sigmoid)
}
