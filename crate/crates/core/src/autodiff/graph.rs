//! Eager computation graph with reverse-mode differentiation.
//!
//! Every operation computes its value immediately and records itself on the
//! graph. Gradients are built out of ordinary graph operations, so a gradient
//! node can itself be differentiated (needed for the WGAN-GP penalty).

use std::rc::Rc;

use super::params::{ParamId, ParamStore};
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

pub(crate) trait Op<T: Scalar> {
    fn name(&self) -> &'static str;

    /// Gradient nodes for each input given the upstream gradient of the
    /// output. `needs[i]` is false when input `i` does not lead to any
    /// requested leaf; implementations may return `None` there.
    fn backward(
        &self,
        g: &mut Graph<T>,
        inputs: &[NodeId],
        output: NodeId,
        upstream: NodeId,
        needs: &[bool],
    ) -> Result<Vec<Option<NodeId>>>;
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Option<Rc<dyn Op<T>>>,
    inputs: Vec<NodeId>,
    requires_grad: bool,
    param: Option<(u64, ParamId)>,
}

pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that is never differentiated.
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push_raw(value, None, Vec::new(), false, None)
    }

    /// A differentiable leaf that is not a model parameter.
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push_raw(value, None, Vec::new(), true, None)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        let value = store.value(id).clone();
        self.push_raw(value, None, Vec::new(), true, Some((store.uid(), id)))
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push_raw(
        &mut self,
        value: Tensor<T>,
        op: Option<Rc<dyn Op<T>>>,
        inputs: Vec<NodeId>,
        requires_grad: bool,
        param: Option<(u64, ParamId)>,
    ) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            inputs,
            requires_grad,
            param,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Record an operation result. Results that depend on no differentiable
    /// input are stored as constants.
    pub(crate) fn push(&mut self, value: Tensor<T>, op: Rc<dyn Op<T>>, inputs: Vec<NodeId>) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        if requires_grad {
            self.push_raw(value, Some(op), inputs, true, None)
        } else {
            self.push_raw(value, None, Vec::new(), false, None)
        }
    }

    /// Gradient of the scalar `output` with respect to each node in `wrt`,
    /// as new graph nodes. `None` means the gradient is identically zero.
    pub fn grad(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<Option<NodeId>>> {
        if self.value(output).len() != 1 {
            return Err(Error::Dimension(format!(
                "gradient requires a scalar output, got shape {:?}",
                self.shape(output)
            )));
        }
        let n = output.0 + 1;
        let mut dep = vec![false; n];
        for w in wrt {
            if w.0 < n && self.nodes[w.0].requires_grad {
                dep[w.0] = true;
            }
        }
        for i in 0..n {
            if !dep[i] && self.nodes[i].inputs.iter().any(|p| dep[p.0]) {
                dep[i] = true;
            }
        }

        let mut grads: Vec<Option<NodeId>> = vec![None; n];
        if dep[output.0] {
            let seed = Tensor::ones(self.shape(output));
            grads[output.0] = Some(self.constant(seed));
        }
        for i in (0..n).rev() {
            let Some(upstream) = grads[i] else { continue };
            let Some(op) = self.nodes[i].op.clone() else { continue };
            let inputs = self.nodes[i].inputs.clone();
            let needs: Vec<bool> = inputs.iter().map(|p| dep[p.0]).collect();
            let input_grads = op.backward(self, &inputs, NodeId(i), upstream, &needs)?;
            for ((inp, g), need) in inputs.iter().zip(input_grads).zip(&needs) {
                let (Some(g), true) = (g, *need) else { continue };
                if self.shape(g) != self.shape(*inp) {
                    return Err(Error::Dimension(format!(
                        "{} produced gradient of shape {:?} for input of shape {:?}",
                        op.name(),
                        self.shape(g),
                        self.shape(*inp)
                    )));
                }
                grads[inp.0] = Some(match grads[inp.0] {
                    None => g,
                    Some(prev) => self.add(prev, g)?,
                });
            }
        }
        Ok(wrt.iter().map(|w| grads.get(w.0).copied().flatten()).collect())
    }

    /// Accumulate d(loss)/d(param) into `store` for every parameter of
    /// `store` recorded on this graph.
    pub fn backward(&mut self, loss: NodeId, store: &mut ParamStore<T>) -> Result<()> {
        let uid = store.uid();
        let leaves: Vec<(NodeId, ParamId)> = self
            .nodes
            .iter()
            .enumerate()
            .take(loss.0 + 1)
            .filter_map(|(i, node)| match node.param {
                Some((u, pid)) if u == uid => Some((NodeId(i), pid)),
                _ => None,
            })
            .collect();
        let ids: Vec<NodeId> = leaves.iter().map(|l| l.0).collect();
        let grads = self.grad(loss, &ids)?;
        for ((_, pid), g) in leaves.iter().zip(grads) {
            if let Some(g) = g {
                let gv = self.nodes[g.0].value.data();
                for (acc, &v) in store.grad_mut(*pid).data_mut().iter_mut().zip(gv) {
                    *acc = *acc + v;
                }
            }
        }
        Ok(())
    }
}
