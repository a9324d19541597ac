use std::sync::Arc;

use rayon::prelude::*;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

const LANE_BLOCK: usize = 16;

/// Linear (non-circular) causal convolution along the leading axis, computed
/// with zero-padded real FFTs.
///
/// Operands are padded to the next power of two `>= 2T-1`, so the spectral
/// product contains no wrap-around and truncating to `T` gives exactly
/// `y[t] = Σ_{j<=t} h[j]·x[t-j]`.
pub struct CausalConvolver<R: Real> {
    len: usize,
    fft_len: usize,
    forward: Arc<dyn RealToComplex<R>>,
    inverse: Arc<dyn ComplexToReal<R>>,
    spectrum: Vec<Complex<R>>,
}

impl<R: Real> CausalConvolver<R> {
    pub fn new(kernel: &[R]) -> Result<Self> {
        let len = kernel.len();
        if len == 0 {
            return Err(Error::invalid("empty convolution kernel"));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("convolution kernel".into()));
        }
        let fft_len = (2 * len - 1)
            .max(2)
            .checked_next_power_of_two()
            .ok_or_else(|| Error::invalid(format!("FFT size overflow for length {len}")))?;
        let mut planner = RealFftPlanner::<R>::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);

        let mut padded = forward.make_input_vec();
        padded[..len].copy_from_slice(kernel);
        let mut spectrum = forward.make_output_vec();
        forward
            .process(&mut padded, &mut spectrum)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let norm = R::one() / R::of(fft_len as f64);
        for c in spectrum.iter_mut() {
            *c = *c * norm;
        }
        Ok(Self {
            len,
            fft_len,
            forward,
            inverse,
            spectrum,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    /// `y[t] = Σ_{j<=t} h[j]·x[t-j]` per lane.
    pub fn convolve(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        self.apply(x, false)
    }

    /// Adjoint of [`convolve`](Self::convolve): `y[t] = Σ_{j} h[j]·x[t+j]`.
    pub fn correlate(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        self.apply(x, true)
    }

    fn apply(&self, x: &Tensor<R>, reversed: bool) -> Result<Tensor<R>> {
        if x.rank() == 0 || x.dim(0) != self.len {
            return Err(Error::shape(format!(
                "kernel length {} does not match time axis of {:?}",
                self.len,
                x.shape()
            )));
        }
        let t_len = self.len;
        let lanes = x.lanes();
        if lanes == 0 {
            return Ok(x.clone());
        }
        let src = x.data();
        let mut lane_major = vec![R::zero(); lanes * t_len];

        lane_major
            .par_chunks_mut(LANE_BLOCK * t_len)
            .enumerate()
            .try_for_each(|(block, out)| -> Result<()> {
                let first = block * LANE_BLOCK;
                let count = out.len() / t_len;
                let mut input = self.forward.make_input_vec();
                let mut spec = self.forward.make_output_vec();
                let mut fwd_scratch = self.forward.make_scratch_vec();
                let mut inv_scratch = self.inverse.make_scratch_vec();
                let mut result = self.inverse.make_output_vec();
                let mut staged = vec![R::zero(); count * t_len];
                for t in 0..t_len {
                    let row = &src[t * lanes + first..t * lanes + first + count];
                    let tt = if reversed { t_len - 1 - t } else { t };
                    for (j, &v) in row.iter().enumerate() {
                        staged[j * t_len + tt] = v;
                    }
                }
                for j in 0..count {
                    input[..t_len].copy_from_slice(&staged[j * t_len..(j + 1) * t_len]);
                    input[t_len..].fill(R::zero());
                    self.forward
                        .process_with_scratch(&mut input, &mut spec, &mut fwd_scratch)
                        .map_err(|e| Error::invalid(e.to_string()))?;
                    for (s, &k) in spec.iter_mut().zip(&self.spectrum) {
                        *s = *s * k;
                    }
                    // The DC and Nyquist bins of a real signal's spectrum are real.
                    spec[0].im = R::zero();
                    if let Some(last) = spec.last_mut() {
                        last.im = R::zero();
                    }
                    self.inverse
                        .process_with_scratch(&mut spec, &mut result, &mut inv_scratch)
                        .map_err(|e| Error::invalid(e.to_string()))?;
                    let dst = &mut out[j * t_len..(j + 1) * t_len];
                    if reversed {
                        for (t, d) in dst.iter_mut().enumerate() {
                            *d = result[t_len - 1 - t];
                        }
                    } else {
                        dst.copy_from_slice(&result[..t_len]);
                    }
                }
                Ok(())
            })?;

        let mut out = vec![R::zero(); lanes * t_len];
        for l0 in (0..lanes).step_by(LANE_BLOCK) {
            let l1 = (l0 + LANE_BLOCK).min(lanes);
            for t in 0..t_len {
                let row = &mut out[t * lanes + l0..t * lanes + l1];
                for (j, o) in row.iter_mut().enumerate() {
                    *o = lane_major[(l0 + j) * t_len + t];
                }
            }
        }
        Tensor::new(x.shape().to_vec(), out)
    }
}

/// Causal linear convolution of every lane of `x` (time-leading) with `kernel`.
pub fn causal_fft_convolve<R: Real>(kernel: &[R], x: &Tensor<R>) -> Result<Tensor<R>> {
    x.ensure_finite("convolution input")?;
    CausalConvolver::new(kernel)?.convolve(x)
}
