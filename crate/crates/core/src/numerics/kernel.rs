use crate::error::{Error, Result};
use crate::numerics::{causal_fft_convolve, Real, Tensor};

/// Geometric impulse response `gain·decay^t`, stored with `decay^0` first.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayKernel<R> {
    decay: R,
    gain: R,
    values: Vec<R>,
}

impl<R: Real> DecayKernel<R> {
    pub fn new(decay: R, gain: R, length: usize) -> Result<Self> {
        if !decay.is_finite() || !gain.is_finite() {
            return Err(Error::NonFinite("decay kernel parameters".into()));
        }
        if length == 0 {
            return Err(Error::invalid("decay kernel length must be at least 1"));
        }
        let d = decay.as_f64();
        if !(0.0..1.0).contains(&d) {
            return Err(Error::invalid(format!("decay {d} outside [0, 1)")));
        }
        let g = gain.as_f64();
        let values = (0..length).map(|t| R::of(g * d.powi(t as i32))).collect();
        Ok(Self {
            decay,
            gain,
            values,
        })
    }

    pub fn decay(&self) -> R {
        self.decay
    }

    pub fn gain(&self) -> R {
        self.gain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }
}

impl<R> AsRef<[R]> for DecayKernel<R> {
    fn as_ref(&self) -> &[R] {
        &self.values
    }
}

pub fn build_decay_kernel<R: Real>(decay: R, gain: R, length: usize) -> Result<DecayKernel<R>> {
    DecayKernel::new(decay, gain, length)
}

/// `(a ⊛ b)` truncated to the common length; both kernels are impulse-response-first.
pub fn compose_kernels<R: Real>(a: &[R], b: &[R]) -> Result<Vec<R>> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "kernel lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let lane = Tensor::new(vec![b.len()], b.to_vec())?;
    Ok(causal_fft_convolve(a, &lane)?.into_data())
}
