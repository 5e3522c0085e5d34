use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Backward rule of a recorded operation.
///
/// Given the upstream gradient of the output, return one entry per input:
/// the gradient with respect to that input, or `None` when the input does
/// not need one (`needs_grad[i] == false`) or receives none.
pub trait Backward {
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad_out: &[f32],
        needs_grad: &[bool],
    ) -> Vec<Option<Vec<f32>>>;
}

struct Node {
    value: Tensor,
    inputs: Vec<Var>,
    op: Option<Box<dyn Backward>>,
    needs_grad: bool,
    leaf: bool,
}

/// Ordered record of the operations of one forward pass.
///
/// Nodes are appended as operations execute, so inputs always precede the
/// operations consuming them.
pub struct Tape {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape that records values only; [`Tape::backward`] becomes a no-op
    /// and [`Tape::release`] may drop intermediates.
    pub fn no_grad() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node and its buffers.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Records a leaf. Its `requires_grad` flag decides whether gradients
    /// are accumulated for it; any existing gradient buffer is discarded.
    pub fn leaf(&mut self, mut tensor: Tensor) -> Var {
        tensor.zero_grad();
        let needs_grad = self.grad_enabled && tensor.is_trainable();
        self.push(Node {
            value: tensor,
            inputs: Vec::new(),
            op: None,
            needs_grad,
            leaf: true,
        })
    }

    /// Records a leaf that never receives gradients.
    pub fn constant(&mut self, mut tensor: Tensor) -> Var {
        tensor.set_requires_grad(false);
        self.leaf(tensor)
    }

    /// Records the result of a custom operation. `output` must already hold
    /// the forward value computed from `inputs`.
    pub fn record(
        &mut self,
        output: Tensor,
        inputs: &[Var],
        op: impl Backward + 'static,
    ) -> Var {
        let needs_grad = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let op: Option<Box<dyn Backward>> = if needs_grad { Some(Box::new(op)) } else { None };
        self.push(Node {
            value: output,
            inputs: inputs.to_vec(),
            op,
            needs_grad,
            leaf: false,
        })
    }

    fn push(&mut self, node: Node) -> Var {
        self.nodes.push(node);
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Gradient accumulated for a leaf by previous [`Tape::backward`] calls.
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.nodes[v.0].value.grad()
    }

    /// Adds the leaf gradient of `v` (if any) into `target`'s accumulator.
    pub fn accumulate_grad(&self, v: Var, target: &mut Tensor) {
        if let Some(g) = self.grad(v) {
            target.accumulate_grad(g);
        }
    }

    /// Frees the value buffer of an intermediate node. Only honoured on a
    /// `no_grad` tape, where no backward rule can still need it.
    pub fn release(&mut self, v: Var) {
        let node = &mut self.nodes[v.0];
        if !self.grad_enabled && !node.leaf {
            node.value = Tensor::new(Shape::new(0, 0, 0, 0), Vec::new());
        }
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Intermediate gradients are recomputed on every call; leaf gradients
    /// accumulate, so calling twice doubles them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape.numel() != 1 {
            return Err(Error::NotScalar(shape));
        }
        if !self.nodes[loss.0].needs_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<f32>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(grad_out) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if node.leaf {
                grads[id] = Some(grad_out);
                continue;
            }
            let Some(op) = &node.op else { continue };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|v| self.nodes[v.0].needs_grad).collect();
            let input_grads = op.backward(&inputs, &node.value, &grad_out, &needs);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for ((var, g), need) in node.inputs.iter().zip(input_grads).zip(needs) {
                let (Some(g), true) = (g, need) else { continue };
                match &mut grads[var.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(g),
                }
            }
        }

        for (id, g) in grads.into_iter().enumerate() {
            if let Some(g) = g {
                let node = &mut self.nodes[id];
                if node.leaf && node.needs_grad {
                    node.value.accumulate_grad(&g);
                }
            }
        }
        Ok(())
    }
}
