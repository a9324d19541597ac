//! Tape-based reverse-mode differentiation over the fixed op set used by the
//! networks in this crate.
//!
//! A [`Tape`] records every op of one forward pass; [`Tape::backward`] walks it
//! once in reverse and returns gradients for the leaves created with
//! `requires_grad`. Spike ops carry custom backward rules:
//!
//! * Heaviside with a fast-sigmoid surrogate `1/(1+k|u-θ|)²`,
//! * Sigmoid-Bernoulli, whose gradient is scaled by the firing probability
//!   (`ρ·σ'(u)`),
//! * binary Gumbel-Softmax with a straight-through hard sample.
//!
//! Because the spike forward passes are not differentiable, finite
//! differences cannot check them directly. [`Tape::recording`] and
//! [`Tape::replaying`] provide the verification path: a recorded pass stores
//! each spike op's output and drive, and a replayed pass emits
//! `recorded + G(drive) - G(recorded drive)` where `G` is the primitive of
//! the op's backward rule. The replayed function equals the original at the
//! recording point and its exact derivative is what `backward` computes.

mod ops;
mod spikes;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

pub use ops::ReadoutMode;
pub use spikes::{fast_sigmoid_surrogate, sigmoid, EscapeParams};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    id: usize,
}

impl Var {
    pub fn id(self) -> usize {
        self.id
    }
}

/// Output and drive of one spike op, captured by a recording tape.
#[derive(Clone, Debug)]
pub struct Anchor<R> {
    pub spikes: Tensor<R>,
    pub drive: Tensor<R>,
}

#[derive(Debug)]
pub(crate) enum Probe<R> {
    Off,
    Record(Vec<Anchor<R>>),
    Replay {
        anchors: Vec<Anchor<R>>,
        cursor: usize,
    },
}

pub(crate) struct Node<R: Real> {
    value: Tensor<R>,
    op: ops::Op<R>,
    requires_grad: bool,
}

/// Append-only record of one forward pass.
pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
    probe: Probe<R>,
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            probe: Probe::Off,
        }
    }

    /// Tape whose spike ops store their outputs and drives as [`Anchor`]s.
    pub fn recording() -> Self {
        Self {
            nodes: Vec::new(),
            probe: Probe::Record(Vec::new()),
        }
    }

    /// Tape whose spike ops replay `anchors` (in op order) plus the surrogate
    /// primitive of their drive. Forward-only: such a tape cannot run backward.
    pub fn replaying(anchors: Vec<Anchor<R>>) -> Self {
        Self {
            nodes: Vec::new(),
            probe: Probe::Replay { anchors, cursor: 0 },
        }
    }

    /// Anchors captured so far by a recording tape.
    pub fn take_anchors(&mut self) -> Vec<Anchor<R>> {
        match &mut self.probe {
            Probe::Record(anchors) => std::mem::take(anchors),
            _ => Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<R>) -> Var {
        self.push(value, ops::Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor<R>) -> Var {
        self.push(value, ops::Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<R> {
        &self.nodes[var.id].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.id].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.id].requires_grad
    }

    pub(crate) fn push(&mut self, value: Tensor<R>, op: ops::Op<R>, requires_grad: bool) -> Var {
        let id = self.nodes.len();
        debug_assert!(op.inputs().iter().all(|v| v.id < id), "tape order violated");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var { id }
    }

    fn any_grad(&self, inputs: &[Var]) -> bool {
        inputs.iter().any(|v| self.nodes[v.id].requires_grad)
    }

    pub(crate) fn is_replaying(&self) -> bool {
        matches!(self.probe, Probe::Replay { .. })
    }

    pub(crate) fn record_anchor(&mut self, spikes: &Tensor<R>, drive: &Tensor<R>) {
        if let Probe::Record(anchors) = &mut self.probe {
            anchors.push(Anchor {
                spikes: spikes.clone(),
                drive: drive.clone(),
            });
        }
    }

    pub(crate) fn next_anchor(&mut self, shape: &[usize]) -> Result<Anchor<R>> {
        match &mut self.probe {
            Probe::Replay { anchors, cursor } => {
                let anchor = anchors
                    .get(*cursor)
                    .cloned()
                    .ok_or_else(|| Error::invalid("replay ran out of recorded anchors"))?;
                *cursor += 1;
                anchor.spikes.expect_shape(shape, "replayed spikes")?;
                Ok(anchor)
            }
            _ => Err(Error::invalid("tape is not replaying")),
        }
    }

    /// Reverse sweep from a scalar `loss`. Returns gradients of every
    /// `requires_grad` leaf reachable from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients<R>> {
        if self.is_replaying() {
            return Err(Error::invalid("replaying tapes are forward-only"));
        }
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut pending: Vec<Option<Tensor<R>>> = Vec::new();
        pending.resize_with(loss.id + 1, || None);
        pending[loss.id] = Some(Tensor::full(loss_value.shape(), R::one()));
        let mut leaves = HashMap::new();

        for id in (0..=loss.id).rev() {
            let Some(grad) = pending[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let ops::Op::Leaf = node.op {
                leaves.insert(id, grad);
                continue;
            }
            for (input, contribution) in ops::backward(self, node, &grad)? {
                assert!(input.id < id, "graph cycle on tape");
                if !self.nodes[input.id].requires_grad {
                    continue;
                }
                match &mut pending[input.id] {
                    Some(acc) => acc.add_assign(&contribution)?,
                    slot @ None => *slot = Some(contribution),
                }
            }
        }
        Ok(Gradients { grads: leaves })
    }
}

/// Gradients of trainable leaves after [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients<R> {
    grads: HashMap<usize, Tensor<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn get(&self, var: Var) -> Option<&Tensor<R>> {
        self.grads.get(&var.id)
    }

    /// Gradient of `var`, or zeros shaped like it when no path reached it.
    pub fn get_or_zeros(&self, tape: &Tape<R>, var: Var) -> Tensor<R> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.shape(var)))
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<R>> {
        self.grads.remove(&var.id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
