use serde::{Deserialize, Serialize};

use super::ops::Op;
use super::{Node, Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{Real, Rng, Tensor};

pub fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// Fast-sigmoid surrogate derivative of the Heaviside step at offset `x`.
pub fn fast_sigmoid_surrogate<R: Real>(x: R, slope: R) -> R {
    let d = R::one() + slope * x.abs();
    R::one() / (d * d)
}

/// Primitive of [`fast_sigmoid_surrogate`]: `x / (1 + k|x|)`.
fn fast_sigmoid_primitive<R: Real>(x: R, slope: R) -> R {
    x / (R::one() + slope * x.abs())
}

/// Escape-rate firing `ρ(u) = exp((u-b)/c)/a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EscapeParams {
    /// `a = 1`, `b = u_th`, `c = 0.2 V`, so the rate at threshold is `1/a`.
    pub fn for_threshold(u_th: f64) -> Self {
        Self {
            a: 1.0,
            b: u_th,
            c: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::invalid(format!(
                "escape parameter a = {} must be > 0",
                self.a
            )));
        }
        if self.c == 0.0 || !self.c.is_finite() || !self.b.is_finite() {
            return Err(Error::invalid(
                "escape parameters b, c must be finite with c != 0",
            ));
        }
        Ok(())
    }

    pub fn rate(&self, u: f64) -> f64 {
        ((u - self.b) / self.c).exp() / self.a
    }
}

/// Saved forward state of a fused LIF op (`[T, lanes]` traces).
pub(crate) struct LifSaved<R> {
    pub current: Tensor<R>,
    pub potential: Tensor<R>,
    pub alpha: R,
    pub beta: R,
    pub threshold: R,
    pub slope: R,
}

impl<R: Real> Tape<R> {
    /// Heaviside spike `u >= θ` with a fast-sigmoid surrogate gradient.
    pub fn heaviside_surrogate(&mut self, u: Var, threshold: R, slope: R) -> Result<Var> {
        if !(slope > R::zero()) {
            return Err(Error::invalid("surrogate slope must be > 0"));
        }
        let uv = self.value(u);
        if self.is_replaying() {
            let uv = uv.clone();
            let anchor = self.next_anchor(uv.shape())?;
            let value = replay(&anchor, &uv, |v| {
                fast_sigmoid_primitive(v - threshold, slope)
            })?;
            return Ok(self.push_op(value, Op::Replayed(u)));
        }
        let value = uv.map(|v| if v >= threshold { R::one() } else { R::zero() });
        let drive = uv.clone();
        self.record_anchor(&value, &drive);
        Ok(self.push_op(
            value,
            Op::Heaviside {
                u,
                threshold,
                slope,
            },
        ))
    }

    /// `s ~ Bernoulli(σ(u - offset))`, backward `ρ·σ'(u - offset)`.
    pub fn sigmoid_bernoulli(&mut self, u: Var, offset: R, rng: &mut Rng) -> Result<Var> {
        let uv = self.value(u).clone();
        let rho = uv.map(|v| sigmoid(v - offset));
        let value = rho.map_with(|p| {
            if R::of(rng.uniform()) < p {
                R::one()
            } else {
                R::zero()
            }
        });
        if self.is_replaying() {
            let anchor = self.next_anchor(uv.shape())?;
            let half = R::of(0.5);
            let value = replay(&anchor, &uv, |v| {
                let p = sigmoid(v - offset);
                half * p * p
            })?;
            return Ok(self.push_op(value, Op::Replayed(u)));
        }
        self.record_anchor(&value, &uv);
        Ok(self.push_op(value, Op::SigmoidBernoulli { u, rho }))
    }

    /// Hard binary Gumbel-Softmax sample on logit `u`, straight-through
    /// gradient of the relaxed sample `σ((u + g1 - g2)/τ)`.
    pub fn gumbel_spike(&mut self, u: Var, temperature: R, rng: &mut Rng) -> Result<Var> {
        if !(temperature > R::zero()) {
            return Err(Error::invalid("gumbel temperature must be > 0"));
        }
        let uv = self.value(u).clone();
        // g1 - g2 for iid standard Gumbels is standard logistic
        let noise = Tensor::from_fn(uv.shape(), |_| {
            let p = rng.uniform();
            R::of(p / (1.0 - p)).ln()
        });
        let relax = |v: R, n: R| sigmoid((v + n) / temperature);
        if self.is_replaying() {
            let anchor = self.next_anchor(uv.shape())?;
            let relaxed_now = uv.zip_map(&noise, relax)?;
            let relaxed_then = anchor.drive.zip_map(&noise, relax)?;
            let mut value = anchor.spikes.clone();
            for ((o, &a), &b) in value
                .data_mut()
                .iter_mut()
                .zip(relaxed_now.data())
                .zip(relaxed_then.data())
            {
                *o = *o + (a - b);
            }
            return Ok(self.push_op(value, Op::Replayed(u)));
        }
        let relaxed = uv.zip_map(&noise, relax)?;
        let half = R::of(0.5);
        let value = relaxed.map(|y| if y >= half { R::one() } else { R::zero() });
        self.record_anchor(&value, &uv);
        Ok(self.push_op(
            value,
            Op::GumbelSpike {
                u,
                relaxed,
                temperature,
            },
        ))
    }

    /// Escape-noise firing with per-step probability `min(1, ρ(u)·dt)`;
    /// backward scales by the probability like the Sigmoid-Bernoulli rule.
    pub fn escape_spike(
        &mut self,
        u: Var,
        params: EscapeParams,
        dt: f64,
        rng: &mut Rng,
    ) -> Result<Var> {
        params.validate()?;
        let uv = self.value(u).clone();
        let raw = uv.map(|v| R::of(params.rate(v.as_f64()) * dt));
        let prob = raw.map(|p| p.min(R::one()));
        let inv_c = R::of(1.0 / params.c);
        let slope = raw.map(|p| if p < R::one() { p * inv_c } else { R::zero() });
        let draws = Tensor::from_fn(uv.shape(), |_| R::of(rng.uniform()));
        if self.is_replaying() {
            let anchor = self.next_anchor(uv.shape())?;
            let half = R::of(0.5);
            let value = replay(&anchor, &uv, |v| {
                let p = R::of((params.rate(v.as_f64()) * dt).min(1.0));
                half * p * p
            })?;
            return Ok(self.push_op(value, Op::Replayed(u)));
        }
        let value = prob.zip_map(&draws, |p, d| if d < p { R::one() } else { R::zero() })?;
        self.record_anchor(&value, &uv);
        Ok(self.push_op(value, Op::EscapeSpike { u, prob, slope }))
    }

    /// Sequential LIF over `x: [T, ...]` with reset by multiplication:
    ///
    /// ```text
    /// i[t] = α·i[t-1] + x[t]
    /// u[t] = (β·u[t-1] + (1-β)·i[t])·(1 - s[t-1])
    /// s[t] = H(u[t] - θ)
    /// ```
    ///
    /// from zero state. Returns the spikes; the traces stay on the tape.
    pub fn lif(&mut self, x: Var, alpha: R, beta: R, threshold: R, slope: R) -> Result<Var> {
        if !(slope > R::zero()) {
            return Err(Error::invalid("surrogate slope must be > 0"));
        }
        let xv = self.value(x);
        xv.ensure_finite("LIF input")?;
        if xv.rank() == 0 {
            return Err(Error::shape("LIF input needs a time axis"));
        }
        let t_len = xv.dim(0);
        let lanes = xv.lanes();
        let shape = xv.shape().to_vec();
        let anchor = if self.is_replaying() {
            Some(self.next_anchor(&shape)?)
        } else {
            None
        };
        let xv = self.value(x);
        let gain = R::one() - beta;
        let mut current = vec![R::zero(); t_len * lanes];
        let mut potential = vec![R::zero(); t_len * lanes];
        let mut spikes = vec![R::zero(); t_len * lanes];
        for t in 0..t_len {
            let row = t * lanes..(t + 1) * lanes;
            let xs = &xv.data()[row.clone()];
            for l in 0..lanes {
                let (i_prev, u_prev, s_prev) = if t == 0 {
                    (R::zero(), R::zero(), R::zero())
                } else {
                    let p = (t - 1) * lanes + l;
                    (current[p], potential[p], spikes[p])
                };
                let k = t * lanes + l;
                let i = alpha * i_prev + xs[l];
                let u = (beta * u_prev + gain * i) * (R::one() - s_prev);
                current[k] = i;
                potential[k] = u;
                spikes[k] = match &anchor {
                    None => {
                        if u >= threshold {
                            R::one()
                        } else {
                            R::zero()
                        }
                    }
                    Some(a) => {
                        a.spikes.data()[k] + fast_sigmoid_primitive(u - threshold, slope)
                            - fast_sigmoid_primitive(a.drive.data()[k] - threshold, slope)
                    }
                };
            }
        }
        let spikes = Tensor::new(shape.clone(), spikes)?;
        let potential = Tensor::new(shape.clone(), potential)?;
        if anchor.is_some() {
            return Ok(self.push_op(spikes, Op::Replayed(x)));
        }
        self.record_anchor(&spikes, &potential);
        let saved = LifSaved {
            current: Tensor::new(shape, current)?,
            potential,
            alpha,
            beta,
            threshold,
            slope,
        };
        Ok(self.push_op(
            spikes,
            Op::Lif {
                x,
                saved: Box::new(saved),
            },
        ))
    }

    /// `(current, potential)` traces of a LIF op's spike output.
    pub fn lif_state(&self, spikes: Var) -> Option<(&Tensor<R>, &Tensor<R>)> {
        match &self.nodes[spikes.id].op {
            Op::Lif { saved, .. } => Some((&saved.current, &saved.potential)),
            _ => None,
        }
    }

    /// Squared hinge on the per-sample total mean firing rate:
    /// `mean_b relu(Σ_n mean_t S[t,b,n] - θ·N)²` with `N` the total neuron count
    /// over all `spikes` tensors (`[T, B, N_l]` each).
    pub fn spike_regularizer(&mut self, spikes: &[Var], theta: R) -> Result<Var> {
        if spikes.is_empty() {
            return Err(Error::invalid(
                "spike regularizer needs at least one spiking layer",
            ));
        }
        if theta < R::zero() {
            return Err(Error::invalid("theta_reg must be >= 0"));
        }
        let first = self.shape(spikes[0]).to_vec();
        if first.len() != 3 {
            return Err(Error::shape(format!(
                "spike raster must be [T, B, N], got {first:?}"
            )));
        }
        let (t_len, batch) = (first[0], first[1]);
        let mut neurons = 0usize;
        let mut totals = vec![0.0f64; batch];
        for &s in spikes {
            let v = self.value(s);
            if v.rank() != 3 || v.dim(0) != t_len || v.dim(1) != batch {
                return Err(Error::shape(format!(
                    "spike rasters disagree: {:?} vs {:?}",
                    v.shape(),
                    first
                )));
            }
            let n = v.dim(2);
            neurons += n;
            for t in 0..t_len {
                for (b, total) in totals.iter_mut().enumerate() {
                    let row = &v.data()[(t * batch + b) * n..(t * batch + b + 1) * n];
                    *total += row.iter().map(|x| x.as_f64()).sum::<f64>();
                }
            }
        }
        if neurons == 0 || t_len == 0 {
            return Err(Error::invalid("spike regularizer over zero neurons"));
        }
        let bound = theta.as_f64() * neurons as f64;
        let excess: Vec<R> = totals
            .iter()
            .map(|&total| R::of((total / t_len as f64 - bound).max(0.0)))
            .collect();
        let loss = excess.iter().map(|e| e.as_f64() * e.as_f64()).sum::<f64>() / batch as f64;
        Ok(self.push_op(
            Tensor::scalar(R::of(loss)),
            Op::SpikeRegularizer {
                spikes: spikes.to_vec(),
                excess,
            },
        ))
    }
}

fn replay<R: Real>(
    anchor: &super::Anchor<R>,
    drive: &Tensor<R>,
    primitive: impl Fn(R) -> R,
) -> Result<Tensor<R>> {
    anchor.drive.expect_shape(drive.shape(), "replayed drive")?;
    let mut value = anchor.spikes.clone();
    for ((o, &now), &then) in value
        .data_mut()
        .iter_mut()
        .zip(drive.data())
        .zip(anchor.drive.data())
    {
        *o = *o + primitive(now) - primitive(then);
    }
    Ok(value)
}

fn lif_backward<R: Real>(
    saved: &LifSaved<R>,
    spikes: &Tensor<R>,
    grad: &Tensor<R>,
) -> Result<Tensor<R>> {
    let t_len = spikes.dim(0);
    let lanes = spikes.lanes();
    let (alpha, beta) = (saved.alpha, saved.beta);
    let gain = R::one() - beta;
    let (cur, pot, s, g) = (
        saved.current.data(),
        saved.potential.data(),
        spikes.data(),
        grad.data(),
    );
    let mut gx = vec![R::zero(); t_len * lanes];
    let zero = R::zero();
    for l in 0..lanes {
        // adjoints of u, v and i at t+1, and the pre-reset value v[t+1]
        let (mut gu_next, mut gv_next, mut gi_next, mut v_next) = (zero, zero, zero, zero);
        for t in (0..t_len).rev() {
            let k = t * lanes + l;
            let u_prev = if t == 0 { zero } else { pot[k - lanes] };
            let s_prev = if t == 0 { zero } else { s[k - lanes] };
            let v = beta * u_prev + gain * cur[k];
            let gs = g[k] - gu_next * v_next;
            let gu =
                gv_next * beta + gs * fast_sigmoid_surrogate(pot[k] - saved.threshold, saved.slope);
            let gv = gu * (R::one() - s_prev);
            let gi = gv * gain + gi_next * alpha;
            gx[k] = gi;
            gu_next = gu;
            gv_next = gv;
            gi_next = gi;
            v_next = v;
        }
    }
    Tensor::new(spikes.shape().to_vec(), gx)
}

pub(crate) fn backward<R: Real>(
    tape: &Tape<R>,
    node: &Node<R>,
    grad: &Tensor<R>,
) -> Result<Vec<(Var, Tensor<R>)>> {
    match &node.op {
        Op::Heaviside {
            u,
            threshold,
            slope,
        } => {
            let gu = grad.zip_map(tape.value(*u), |g, v| {
                g * fast_sigmoid_surrogate(v - *threshold, *slope)
            })?;
            Ok(vec![(*u, gu)])
        }
        Op::SigmoidBernoulli { u, rho } => {
            let gu = grad.zip_map(rho, |g, p| g * p * p * (R::one() - p))?;
            Ok(vec![(*u, gu)])
        }
        Op::GumbelSpike {
            u,
            relaxed,
            temperature,
        } => {
            let inv = R::one() / *temperature;
            let gu = grad.zip_map(relaxed, |g, y| g * y * (R::one() - y) * inv)?;
            Ok(vec![(*u, gu)])
        }
        Op::EscapeSpike { u, prob, slope } => {
            let factor = prob.zip_map(slope, |p, d| p * d)?;
            Ok(vec![(*u, grad.zip_map(&factor, |g, f| g * f)?)])
        }
        Op::Lif { x, saved } => Ok(vec![(*x, lif_backward(saved, &node.value, grad)?)]),
        Op::SpikeRegularizer { spikes, excess } => {
            let g = grad.item();
            let mut out = Vec::with_capacity(spikes.len());
            for &s in spikes {
                let shape = tape.shape(s);
                let (t_len, batch, n) = (shape[0], shape[1], shape[2]);
                let per_sample: Vec<R> = excess
                    .iter()
                    .map(|&e| g * R::of(2.0) * e / R::of((batch * t_len) as f64))
                    .collect();
                let gs = Tensor::from_fn(shape, |idx| per_sample[(idx / n) % batch]);
                out.push((s, gs));
            }
            Ok(out)
        }
        _ => unreachable!("not a spike op"),
    }
}
