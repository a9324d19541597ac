use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

/// Identifier of the generator behind [`Rng`], recorded in run metadata.
///
/// ChaCha8 keyed through `rand_core`'s portable `seed_from_u64` expansion;
/// uniforms use the top 53 bits of each 64-bit word.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/u53-open";

/// Seeded, portable random stream.
///
/// Streams for concurrent workers, epochs, or trials are obtained with
/// [`Rng::derive`] rather than by sharing one generator.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream identified by `label`. Depends only on this
    /// stream's seed, not on how much of it has been consumed.
    pub fn derive(&self, label: u64) -> Rng {
        Rng::new(splitmix64(
            self.seed ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard Gumbel(0, 1) draw.
    pub fn gumbel(&mut self) -> f64 {
        -(-self.uniform().ln()).ln()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Independent Bernoulli draws with per-element probabilities `p`.
    pub fn sample_bernoulli<R: Real>(&mut self, p: &Tensor<R>) -> Result<Tensor<R>> {
        if let Some(bad) = p
            .data()
            .iter()
            .find(|v| !(v.as_f64() >= 0.0 && v.as_f64() <= 1.0))
        {
            return Err(Error::invalid(format!(
                "bernoulli probability {bad} outside [0, 1]"
            )));
        }
        Ok(p.map_with(|v| {
            if self.bernoulli(v.as_f64()) {
                R::one()
            } else {
                R::zero()
            }
        }))
    }

    pub fn sample_gumbel<R: Real>(&mut self, shape: &[usize]) -> Tensor<R> {
        Tensor::from_fn(shape, |_| R::of(self.gumbel()))
    }
}

impl<R: Real> Tensor<R> {
    pub(crate) fn map_with(&self, mut f: impl FnMut(R) -> R) -> Tensor<R> {
        let mut out = Tensor::zeros(self.shape());
        for (o, &v) in out.data_mut().iter_mut().zip(self.data()) {
            *o = f(v);
        }
        out
    }
}
