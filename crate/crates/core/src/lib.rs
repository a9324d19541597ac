//! Stochastic parallelizable spiking neurons.
//!
//! A leaky integrator evaluated for all time steps at once with causal FFT
//! convolutions, followed by a stochastic firing stage, next to a sequential
//! LIF baseline. The crate carries the training machinery needed to fit
//! small feedforward spiking networks: a tape-based reverse-mode engine with
//! custom spike gradients, Adamax, spike-rate regularization, event-data
//! augmentation, and benchmark harnesses.

pub mod autodiff;
pub mod bench;
pub mod cli;
mod codec;
pub mod data;
pub mod error;
pub mod network;
pub mod neurons;
pub mod numerics;
pub mod objective;
pub mod training;

pub use error::{Error, FormatError, Result};
pub use numerics::{Precision, Real, Rng, Tensor};
