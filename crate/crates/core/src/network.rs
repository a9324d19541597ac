//! Feedforward networks: a stack of dense → neuron stages followed by a dense
//! layer into non-spiking leaky-integrator readout neurons.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::neurons::{lif_spikes, readout_forward, spsn_forward, Firing, NeuronParams};
use crate::numerics::{Real, Rng, Tensor};

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronKind {
    Lif,
    #[default]
    SpsnSb,
    SpsnGs,
    /// Non-spiking baseline: the same stack with ReLU per time step.
    Relu,
}

impl NeuronKind {
    pub const ALL: [NeuronKind; 4] = [
        NeuronKind::Lif,
        NeuronKind::SpsnSb,
        NeuronKind::SpsnGs,
        NeuronKind::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NeuronKind::Lif => "lif",
            NeuronKind::SpsnSb => "spsn-sb",
            NeuronKind::SpsnGs => "spsn-gs",
            NeuronKind::Relu => "relu",
        }
    }

    pub fn is_spiking(self) -> bool {
        self != NeuronKind::Relu
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, NeuronKind::SpsnSb | NeuronKind::SpsnGs)
    }
}

impl fmt::Display for NeuronKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NeuronKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NeuronKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown neuron kind `{s}` (lif, spsn-sb, spsn-gs, relu)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub classes: usize,
    pub neuron_kind: NeuronKind,
    pub neuron_params: NeuronParams,
    /// Fast-sigmoid surrogate slope for LIF spikes.
    pub surrogate_slope: f64,
    pub gumbel_temperature: f64,
    /// Fire with `σ(u - u_th)` instead of `σ(u)` in SPSN-SB.
    pub sb_threshold_offset: bool,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_channels: 700,
            hidden_layers: 3,
            hidden_size: 128,
            classes: 20,
            neuron_kind: NeuronKind::default(),
            neuron_params: NeuronParams::default(),
            surrogate_slope: 10.0,
            gumbel_temperature: 1.0,
            sb_threshold_offset: false,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("input_channels", self.input_channels),
            ("hidden_layers", self.hidden_layers),
            ("hidden_size", self.hidden_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("network.{name}"), "must be >= 1"));
            }
        }
        if self.classes < 2 {
            return Err(Error::config("network.classes", "must be >= 2"));
        }
        if !(self.surrogate_slope > 0.0) || !self.surrogate_slope.is_finite() {
            return Err(Error::config(
                "network.surrogate_slope",
                "must be a finite value > 0",
            ));
        }
        if !(self.gumbel_temperature > 0.0) || !self.gumbel_temperature.is_finite() {
            return Err(Error::config(
                "network.gumbel_temperature",
                "must be a finite value > 0",
            ));
        }
        self.neuron_params.validate()
    }

    /// `(fan_in, fan_out)` of every dense layer, readout last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_channels;
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.hidden_size));
            fan_in = self.hidden_size;
        }
        dims.push((fan_in, self.classes));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// `hidden.{i}.weight`, `hidden.{i}.bias`, ..., `readout.weight`, `readout.bias`.
    pub fn parameter_names(&self) -> Vec<String> {
        let hidden = self.hidden_layers;
        (0..=hidden)
            .flat_map(|i| {
                let stem = if i < hidden {
                    format!("hidden.{i}")
                } else {
                    "readout".to_string()
                };
                [format!("{stem}.weight"), format!("{stem}.bias")]
            })
            .collect()
    }

    /// Neurons whose spikes are counted (the readout is excluded).
    pub fn spiking_neurons(&self) -> usize {
        if self.neuron_kind.is_spiking() {
            self.hidden_layers * self.hidden_size
        } else {
            0
        }
    }

    fn firing(&self) -> Option<Firing> {
        match self.neuron_kind {
            NeuronKind::SpsnSb => Some(Firing::SigmoidBernoulli {
                threshold_offset: self.sb_threshold_offset,
            }),
            NeuronKind::SpsnGs => Some(Firing::GumbelSoftmax {
                temperature: self.gumbel_temperature,
            }),
            _ => None,
        }
    }
}

/// Weight `[fan_in, fan_out]` and bias `[fan_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<R> {
    pub weight: Tensor<R>,
    pub bias: Tensor<R>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<R> {
    config: NetworkConfig,
    layers: Vec<Dense<R>>,
}

/// Variables produced by one [`Network::forward`] call.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// Readout membrane potentials `[T, B, classes]`.
    pub potentials: Var,
    /// Weight and bias of every layer, in [`Network::parameter_names`] order.
    pub params: Vec<Var>,
    /// Hidden spike rasters `[T, B, hidden]`; empty for ReLU.
    pub spikes: Vec<Var>,
}

impl ForwardPass {
    /// Total spikes per hidden layer; `None` for a non-spiking network.
    pub fn spike_counts<R: Real>(&self, tape: &Tape<R>) -> Option<Vec<f64>> {
        if self.spikes.is_empty() {
            return None;
        }
        Some(
            self.spikes
                .iter()
                .map(|&s| tape.value(s).sum_f64())
                .collect(),
        )
    }
}

impl<R: Real> Network<R> {
    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn build(config: NetworkConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                Dense {
                    weight: Tensor::from_fn(&[fan_in, fan_out], |_| {
                        R::of(rng.uniform_range(-bound, bound))
                    }),
                    bias: Tensor::zeros(&[fan_out]),
                }
            })
            .collect();
        Ok(Self { config, layers })
    }

    /// Network from explicit layer tensors, checked against `config`.
    pub fn from_layers(config: NetworkConfig, layers: Vec<Dense<R>>) -> Result<Self> {
        config.validate()?;
        let dims = config.layer_dims();
        if dims.len() != layers.len() {
            return Err(Error::shape(format!(
                "expected {} layers, got {}",
                dims.len(),
                layers.len()
            )));
        }
        for (layer, &(i, o)) in layers.iter().zip(&dims) {
            layer.weight.expect_shape(&[i, o], "dense weight")?;
            layer.bias.expect_shape(&[o], "dense bias")?;
            layer.weight.ensure_finite("dense weight")?;
            layer.bias.ensure_finite("dense bias")?;
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Hidden layers followed by the readout layer.
    pub fn layers(&self) -> &[Dense<R>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<R>] {
        &mut self.layers
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.config.parameter_names()
    }

    /// Parameter tensors in [`parameter_names`](Self::parameter_names) order.
    pub fn parameters(&self) -> Vec<&Tensor<R>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<R>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Full differentiable pass over a binary raster `x: [T, B, channels]`.
    /// Stochastic firing draws from `rng` layer by layer.
    pub fn forward(&self, tape: &mut Tape<R>, x: &Tensor<R>, rng: &mut Rng) -> Result<ForwardPass> {
        if x.rank() != 3 || x.dim(2) != self.config.input_channels {
            return Err(Error::shape(format!(
                "input must be [T, B, {}], got {:?}",
                self.config.input_channels,
                x.shape()
            )));
        }
        if !x.is_binary() {
            return Err(Error::invalid(
                "network input must be a binary spike raster",
            ));
        }
        let cfg = &self.config;
        let params: Vec<Var> = self
            .layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .map(|p| tape.param(p))
            .collect();
        let mut h = tape.constant(x.clone());
        let mut spikes = Vec::with_capacity(cfg.hidden_layers);
        for pair in params[..2 * cfg.hidden_layers].chunks(2) {
            let z = tape.dense(h, pair[0], Some(pair[1]))?;
            h = match cfg.neuron_kind {
                NeuronKind::Lif => lif_spikes(tape, z, &cfg.neuron_params, cfg.surrogate_slope)?,
                NeuronKind::Relu => tape.relu(z),
                NeuronKind::SpsnSb | NeuronKind::SpsnGs => {
                    let firing = cfg.firing().expect("stochastic kind has a firing stage");
                    spsn_forward(tape, z, &cfg.neuron_params, &firing, rng)?.0
                }
            };
            if cfg.neuron_kind.is_spiking() {
                spikes.push(h);
            }
        }
        let n = params.len();
        let z = tape.dense(h, params[n - 2], Some(params[n - 1]))?;
        let potentials = readout_forward(tape, z, &cfg.neuron_params)?;
        Ok(ForwardPass {
            potentials,
            params,
            spikes,
        })
    }
}

/// Mean spikes per millisecond per sample: `total / (T·dt·1000) / B`.
pub fn spikes_per_ms(total_spikes: f64, steps: usize, dt: f64, batch: usize) -> Result<f64> {
    if steps == 0 || batch == 0 {
        return Err(Error::invalid("spikes_per_ms needs T >= 1 and B >= 1"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }
    Ok(total_spikes / (steps as f64 * dt * 1000.0) / batch as f64)
}
