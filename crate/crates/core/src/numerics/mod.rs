//! Tensor storage, seeded randomness, geometric decay kernels and causal
//! FFT convolution.

mod conv;
mod kernel;
mod real;
mod rng;
mod tensor;

pub use conv::{causal_fft_convolve, CausalConvolver};
pub use kernel::{build_decay_kernel, compose_kernels, DecayKernel};
pub use real::{Precision, Real};
pub use rng::{Rng, RNG_ALGORITHM};
pub(crate) use tensor::linalg;
pub use tensor::Tensor;
