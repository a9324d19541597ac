use serde::{Deserialize, Serialize};

use super::spikes::{self, LifSaved};
use super::{Node, Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{linalg, CausalConvolver, Real, Tensor};

/// Reduction of readout potentials over time before the softmax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    #[default]
    Mean,
    Max,
    Last,
}

impl ReadoutMode {
    pub const ALL: [ReadoutMode; 3] = [ReadoutMode::Mean, ReadoutMode::Max, ReadoutMode::Last];

    pub fn name(self) -> &'static str {
        match self {
            ReadoutMode::Mean => "mean",
            ReadoutMode::Max => "max",
            ReadoutMode::Last => "last",
        }
    }
}

impl std::str::FromStr for ReadoutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ReadoutMode::Mean),
            "max" => Ok(ReadoutMode::Max),
            "last" => Ok(ReadoutMode::Last),
            other => Err(Error::invalid(format!("unknown readout mode `{other}`"))),
        }
    }
}

pub(crate) enum Op<R: Real> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, R),
    Sum(Var),
    Sigmoid(Var),
    Relu(Var),
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    CausalConv {
        x: Var,
        conv: CausalConvolver<R>,
    },
    ReduceTime {
        u: Var,
        mode: ReadoutMode,
        picked: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor<R>,
    },
    Heaviside {
        u: Var,
        threshold: R,
        slope: R,
    },
    SigmoidBernoulli {
        u: Var,
        rho: Tensor<R>,
    },
    GumbelSpike {
        u: Var,
        relaxed: Tensor<R>,
        temperature: R,
    },
    EscapeSpike {
        u: Var,
        prob: Tensor<R>,
        slope: Tensor<R>,
    },
    Lif {
        x: Var,
        saved: Box<LifSaved<R>>,
    },
    SpikeRegularizer {
        spikes: Vec<Var>,
        excess: Vec<R>,
    },
    /// Forward-only output of a replaying tape.
    Replayed(Var),
}

impl<R: Real> Op<R> {
    pub(crate) fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(a, _) | Op::Sum(a) | Op::Sigmoid(a) | Op::Relu(a) | Op::Replayed(a) => {
                vec![*a]
            }
            Op::Dense { x, w, b } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Op::CausalConv { x, .. } => vec![*x],
            Op::ReduceTime { u, .. } => vec![*u],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::Heaviside { u, .. }
            | Op::SigmoidBernoulli { u, .. }
            | Op::GumbelSpike { u, .. }
            | Op::EscapeSpike { u, .. } => vec![*u],
            Op::Lif { x, .. } => vec![*x],
            Op::SpikeRegularizer { spikes, .. } => spikes.clone(),
        }
    }
}

impl<R: Real> Tape<R> {
    pub(crate) fn push_op(&mut self, value: Tensor<R>, op: Op<R>) -> Var {
        let requires_grad = self.any_grad(&op.inputs());
        self.push(value, op, requires_grad)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push_op(value, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push_op(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: R) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push_op(value, Op::Scale(a, factor))
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push_op(value, Op::Sum(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(spikes::sigmoid);
        self.push_op(value, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(R::zero()));
        self.push_op(value, Op::Relu(a))
    }

    /// `y[..., :] = x[..., :]·W + b` over the last axis of `x`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.rank() != 2 || xv.rank() == 0 || *xv.shape().last().unwrap() != wv.dim(0) {
            return Err(Error::shape(format!(
                "dense: input {:?} incompatible with weight {:?}",
                xv.shape(),
                wv.shape()
            )));
        }
        let (n_in, n_out) = (wv.dim(0), wv.dim(1));
        let rows = xv.len() / n_in;
        let mut out_shape = xv.shape().to_vec();
        *out_shape.last_mut().unwrap() = n_out;
        let mut out = vec![R::zero(); rows * n_out];
        if let Some(b) = b {
            let bv = self.value(b);
            bv.expect_shape(&[n_out], "dense bias")?;
            for row in out.chunks_mut(n_out) {
                row.copy_from_slice(bv.data());
            }
        }
        linalg::matmul(
            rows,
            n_in,
            n_out,
            xv.data(),
            wv.data(),
            &mut out,
            b.is_some(),
        );
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push_op(value, Op::Dense { x, w, b }))
    }

    /// Causal linear convolution of `x` (time-leading) with `kernel`.
    pub fn causal_conv(&mut self, x: Var, kernel: &[R]) -> Result<Var> {
        let conv = CausalConvolver::new(kernel)?;
        let value = conv.convolve(self.value(x))?;
        Ok(self.push_op(value, Op::CausalConv { x, conv }))
    }

    /// `[T, B, C] -> [B, C]` by mean, max (earliest argmax), or last step.
    pub fn readout_reduce(&mut self, u: Var, mode: ReadoutMode) -> Result<Var> {
        let uv = self.value(u);
        if uv.rank() < 2 || uv.dim(0) == 0 {
            return Err(Error::shape(format!(
                "readout reduction needs a non-empty time axis, got {:?}",
                uv.shape()
            )));
        }
        let t_len = uv.dim(0);
        let lanes = uv.lanes();
        let data = uv.data();
        let mut out = vec![R::zero(); lanes];
        let mut picked = Vec::new();
        match mode {
            ReadoutMode::Mean => {
                let inv = R::one() / R::of(t_len as f64);
                for t in 0..t_len {
                    for (o, &v) in out.iter_mut().zip(&data[t * lanes..(t + 1) * lanes]) {
                        *o = *o + v;
                    }
                }
                out.iter_mut().for_each(|o| *o = *o * inv);
            }
            ReadoutMode::Max => {
                picked = vec![0; lanes];
                out.copy_from_slice(&data[..lanes]);
                for t in 1..t_len {
                    for l in 0..lanes {
                        let v = data[t * lanes + l];
                        if v > out[l] {
                            out[l] = v;
                            picked[l] = t;
                        }
                    }
                }
            }
            ReadoutMode::Last => {
                out.copy_from_slice(&data[(t_len - 1) * lanes..]);
            }
        }
        let value = Tensor::new(uv.shape()[1..].to_vec(), out)?;
        Ok(self.push_op(value, Op::ReduceTime { u, mode, picked }))
    }

    /// Mean over the batch of `-log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rank() != 2 || lv.dim(0) != targets.len() {
            return Err(Error::shape(format!(
                "cross entropy: logits {:?} vs {} targets",
                lv.shape(),
                targets.len()
            )));
        }
        let classes = lv.dim(1);
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::invalid(format!(
                "class index {bad} out of range for {classes} classes"
            )));
        }
        let mut probs = Tensor::zeros(lv.shape());
        let mut total = 0.0f64;
        for (b, &target) in targets.iter().enumerate() {
            let row = &lv.data()[b * classes..(b + 1) * classes];
            let max = row.iter().copied().fold(R::neg_infinity(), R::max);
            let denom: R = row.iter().map(|&v| (v - max).exp()).sum();
            let log_denom = denom.ln();
            for (p, &v) in probs.data_mut()[b * classes..(b + 1) * classes]
                .iter_mut()
                .zip(row)
            {
                *p = (v - max - log_denom).exp();
            }
            total += (log_denom - (row[target] - max)).as_f64();
        }
        let value = Tensor::scalar(R::of(total / targets.len() as f64));
        Ok(self.push_op(
            value,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }
}

fn unary<R: Real>(input: Var, grad: Tensor<R>) -> Result<Vec<(Var, Tensor<R>)>> {
    Ok(vec![(input, grad)])
}

pub(crate) fn backward<R: Real>(
    tape: &Tape<R>,
    node: &Node<R>,
    grad: &Tensor<R>,
) -> Result<Vec<(Var, Tensor<R>)>> {
    match &node.op {
        Op::Leaf => Ok(vec![]),
        Op::Add(a, b) => Ok(vec![(*a, grad.clone()), (*b, grad.clone())]),
        Op::Mul(a, b) => {
            let ga = grad.zip_map(tape.value(*b), |g, y| g * y)?;
            let gb = grad.zip_map(tape.value(*a), |g, x| g * x)?;
            Ok(vec![(*a, ga), (*b, gb)])
        }
        Op::Scale(a, f) => unary(*a, grad.map(|g| g * *f)),
        Op::Sum(a) => unary(*a, Tensor::full(tape.shape(*a), grad.item())),
        Op::Sigmoid(a) => unary(
            *a,
            grad.zip_map(&node.value, |g, s| g * s * (R::one() - s))?,
        ),
        Op::Relu(a) => unary(
            *a,
            grad.zip_map(
                tape.value(*a),
                |g, x| if x > R::zero() { g } else { R::zero() },
            )?,
        ),
        Op::Dense { x, w, b } => {
            let (xv, wv) = (tape.value(*x), tape.value(*w));
            let (n_in, n_out) = (wv.dim(0), wv.dim(1));
            let rows = xv.len() / n_in;
            let mut out = Vec::with_capacity(3);
            if tape.requires_grad(*x) {
                let mut gx = vec![R::zero(); rows * n_in];
                linalg::matmul_nt(rows, n_out, n_in, grad.data(), wv.data(), &mut gx, false);
                out.push((*x, Tensor::new(xv.shape().to_vec(), gx)?));
            }
            if tape.requires_grad(*w) {
                let mut gw = vec![R::zero(); n_in * n_out];
                linalg::matmul_tn(rows, n_in, n_out, xv.data(), grad.data(), &mut gw, false);
                out.push((*w, Tensor::new(vec![n_in, n_out], gw)?));
            }
            if let Some(b) = b {
                if tape.requires_grad(*b) {
                    let mut gb = vec![R::zero(); n_out];
                    for row in grad.data().chunks(n_out) {
                        for (acc, &g) in gb.iter_mut().zip(row) {
                            *acc = *acc + g;
                        }
                    }
                    out.push((*b, Tensor::new(vec![n_out], gb)?));
                }
            }
            Ok(out)
        }
        Op::CausalConv { x, conv } => unary(*x, conv.correlate(grad)?),
        Op::ReduceTime { u, mode, picked } => {
            let shape = tape.shape(*u);
            let t_len = shape[0];
            let lanes = grad.len();
            let mut gu = Tensor::zeros(shape);
            let data = gu.data_mut();
            match mode {
                ReadoutMode::Mean => {
                    let inv = R::one() / R::of(t_len as f64);
                    for t in 0..t_len {
                        for (d, &g) in data[t * lanes..(t + 1) * lanes].iter_mut().zip(grad.data())
                        {
                            *d = g * inv;
                        }
                    }
                }
                ReadoutMode::Max => {
                    for (l, (&t, &g)) in picked.iter().zip(grad.data()).enumerate() {
                        data[t * lanes + l] = g;
                    }
                }
                ReadoutMode::Last => {
                    data[(t_len - 1) * lanes..].copy_from_slice(grad.data());
                }
            }
            unary(*u, gu)
        }
        Op::CrossEntropy {
            logits,
            targets,
            probs,
        } => {
            let classes = probs.dim(1);
            let scale = grad.item() / R::of(targets.len() as f64);
            let mut g = probs.clone();
            for (b, &t) in targets.iter().enumerate() {
                let row = &mut g.data_mut()[b * classes..(b + 1) * classes];
                row[t] = row[t] - R::one();
                row.iter_mut().for_each(|v| *v = *v * scale);
            }
            unary(*logits, g)
        }
        Op::Heaviside { .. }
        | Op::SigmoidBernoulli { .. }
        | Op::GumbelSpike { .. }
        | Op::EscapeSpike { .. }
        | Op::Lif { .. }
        | Op::SpikeRegularizer { .. } => spikes::backward(tape, node, grad),
        Op::Replayed(_) => Err(Error::invalid("replayed values have no backward rule")),
    }
}
