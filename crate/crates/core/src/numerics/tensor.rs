use crate::error::{Error, Result};
use crate::numerics::Real;

/// Dense row-major tensor. The last axis is contiguous.
///
/// Sequence tensors use the `[time, batch, channels]` layout throughout the
/// crate so the time axis is the outermost one.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<R> {
    shape: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn new(shape: Vec<usize>, data: Vec<R>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {:?} holds {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, R::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, R::one())
    }

    pub fn full(shape: &[usize], value: R) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn scalar(value: R) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> R) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), values.iter().map(|&v| R::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> R {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Number of lanes that share the leading (time) axis.
    pub fn lanes(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(R, R) -> R) -> Result<Self> {
        self.expect_shape(other.shape(), "zip_map")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_shape(other.shape(), "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn sum(&self) -> R {
        self.data.iter().copied().sum()
    }

    /// Sum accumulated in `f64`, used for counts and metrics.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }

    pub fn max_abs(&self) -> R {
        self.data.iter().fold(
            R::zero(),
            |acc, &v| if v.abs() > acc { v.abs() } else { acc },
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == R::zero() || v == R::one())
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape == shape {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: expected {:?}, got {:?}",
                shape, self.shape
            )))
        }
    }

    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| S::of(v.as_f64())).collect(),
        }
    }

    /// Normwise relative difference `max|a-b| / max|b|`, the metric used by
    /// the equivalence checks.
    pub fn max_rel_diff(&self, reference: &Self) -> Result<f64> {
        self.expect_shape(reference.shape(), "max_rel_diff")?;
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for (&a, &b) in self.data.iter().zip(&reference.data) {
            diff = diff.max((a.as_f64() - b.as_f64()).abs());
            scale = scale.max(b.as_f64().abs());
        }
        Ok(if scale == 0.0 { diff } else { diff / scale })
    }
}

/// Row-major matrix product helpers over flat slices.
pub(crate) mod linalg {
    use super::Real;

    /// `out[m×n] (+)= a[m×k] · b[k×n]`
    pub fn matmul<R: Real>(
        m: usize,
        k: usize,
        n: usize,
        a: &[R],
        b: &[R],
        out: &mut [R],
        acc: bool,
    ) {
        R::gemm(m, k, n, a, (k as isize, 1), b, (n as isize, 1), out, acc);
    }

    /// `out[k×n] (+)= a[m×k]ᵀ · b[m×n]`
    pub fn matmul_tn<R: Real>(
        m: usize,
        k: usize,
        n: usize,
        a: &[R],
        b: &[R],
        out: &mut [R],
        acc: bool,
    ) {
        R::gemm(k, m, n, a, (1, k as isize), b, (n as isize, 1), out, acc);
    }

    /// `out[m×k] (+)= a[m×n] · b[k×n]ᵀ`
    pub fn matmul_nt<R: Real>(
        m: usize,
        n: usize,
        k: usize,
        a: &[R],
        b: &[R],
        out: &mut [R],
        acc: bool,
    ) {
        R::gemm(m, n, k, a, (n as isize, 1), b, (1, n as isize), out, acc);
    }
}
