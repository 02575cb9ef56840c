//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] is an append-only tape. Every op whose inputs include a
//! recorded variable appends one node; ops on constants are evaluated
//! eagerly and leave no trace. Since node ids grow with evaluation order,
//! the tape is already topologically sorted and the reverse pass is a single
//! descending sweep.
//!
//! The backward rule of every op is itself written with graph ops. Running
//! a reverse pass with `create_graph = true` therefore records the gradient
//! computation on the same tape, and a second reverse pass can
//! differentiate through it. That is what the gradient penalty of the
//! critic needs: `d/dθ (‖∇ₓ D(x; θ)‖ − 1)²`.

use std::cell::RefCell;

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type NodeId = usize;

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul { trans_a: bool, trans_b: bool },
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(T),
    Shift(T),
    Relu,
    LeakyRelu(T),
    Sigmoid,
    Exp,
    Ln,
    Sqrt,
    Square,
    Recip,
    SoftmaxLast,
    SumAll,
    SumLast,
    SumTo,
    BroadcastTo,
    Reshape,
    Transpose,
    Concat { axis: usize },
    Slice { axis: usize, start: usize },
    Pad { axis: usize, start: usize },
}

#[derive(Clone)]
struct Input<T> {
    id: Option<NodeId>,
    value: Tensor<T>,
}

struct Node<T> {
    op: Op<T>,
    inputs: Vec<Input<T>>,
    output: Tensor<T>,
}

/// The tape. Variables borrow it, so it must outlive every [`Var`].
pub struct Graph<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// A value on (or next to) a graph.
///
/// Variables with `id == None` are constants: they carry no node and ops on
/// them are not recorded.
#[derive(Clone)]
pub struct Var<'g, T: Scalar> {
    graph: &'g Graph<T>,
    id: Option<NodeId>,
    value: Tensor<T>,
}

impl<T: Scalar> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(id={:?}, {:?})", self.id, self.value)
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a differentiable leaf.
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            output: value.clone(),
        });
        Var {
            graph: self,
            id: Some(nodes.len() - 1),
            value,
        }
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        Var {
            graph: self,
            id: None,
            value,
        }
    }

    fn record<'g>(&'g self, op: Op<T>, inputs: &[&Var<'g, T>], output: Tensor<T>) -> Var<'g, T> {
        if inputs.iter().all(|v| v.id.is_none()) {
            return self.constant(output);
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            inputs: inputs
                .iter()
                .map(|v| Input {
                    id: v.id,
                    value: v.value.clone(),
                })
                .collect(),
            output: output.clone(),
        });
        Var {
            graph: self,
            id: Some(nodes.len() - 1),
            value: output,
        }
    }

    /// Reverse sweep from a scalar `output`.
    ///
    /// Returns the accumulated gradient of every node that lies on a path
    /// from a node in `targets` (all leaves when `None`) to `output`.
    fn sweep<'g>(
        &'g self,
        output: &Var<'g, T>,
        targets: Option<&[NodeId]>,
        create_graph: bool,
    ) -> Result<Vec<Option<Var<'g, T>>>> {
        if output.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, got shape {:?}",
                output.value.shape()
            )));
        }
        let Some(out_id) = output.id else {
            return Ok(Vec::new());
        };
        let n = out_id + 1;
        let depends: Vec<bool> = {
            let nodes = self.nodes.borrow();
            let mut dep = vec![false; n];
            for (i, node) in nodes[..n].iter().enumerate() {
                dep[i] = match targets {
                    None => true,
                    Some(t) => {
                        t.contains(&i)
                            || node.inputs.iter().any(|inp| inp.id.is_some_and(|j| dep[j]))
                    }
                };
            }
            dep
        };
        let mut grads: Vec<Option<Var<'g, T>>> = vec![None; n];
        let mut done: Vec<Option<Var<'g, T>>> = vec![None; n];
        if !depends[out_id] {
            return Ok(done);
        }
        grads[out_id] = Some(self.constant(Tensor::ones(output.value.shape())));
        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let (op, inputs, out_value) = {
                let nodes = self.nodes.borrow();
                let node = &nodes[id];
                (node.op.clone(), node.inputs.clone(), node.output.clone())
            };
            if matches!(op, Op::Leaf) {
                done[id] = Some(g);
                continue;
            }
            let wanted: Vec<bool> = inputs
                .iter()
                .map(|inp| inp.id.is_some_and(|j| depends[j]))
                .collect();
            let as_var = |id: Option<NodeId>, value: Tensor<T>| Var {
                graph: self,
                id: if create_graph { id } else { None },
                value,
            };
            let xs: Vec<Var<'g, T>> = inputs
                .iter()
                .map(|inp| as_var(inp.id, inp.value.clone()))
                .collect();
            let y = as_var(Some(id), out_value);
            let g = if create_graph { g } else { g.detach() };
            let input_grads = op_backward(&op, &xs, &y, &g, &wanted)?;
            for ((inp, want), gi) in inputs.iter().zip(&wanted).zip(input_grads) {
                let (Some(j), true, Some(gi)) = (inp.id, *want, gi) else {
                    continue;
                };
                grads[j] = Some(match grads[j].take() {
                    None => gi,
                    Some(acc) => acc.add(&gi)?,
                });
            }
        }
        Ok(done)
    }

    /// Gradients of a scalar with respect to every leaf on the tape.
    ///
    /// The tape is left untouched, so further passes (including higher
    /// order ones through a `create_graph` result) remain possible.
    pub fn backward(&self, output: &Var<'_, T>) -> Result<Gradients<T>> {
        let done = self.sweep(output, None, false)?;
        Ok(Gradients {
            by_node: done.into_iter().map(|g| g.map(|v| v.value)).collect(),
        })
    }

    /// Gradients of a scalar with respect to `wrt`.
    ///
    /// With `create_graph`, the returned variables are themselves recorded
    /// and can be differentiated again. Variables that do not influence
    /// `output` get a zero gradient.
    pub fn grad<'g>(
        &'g self,
        output: &Var<'g, T>,
        wrt: &[&Var<'g, T>],
        create_graph: bool,
    ) -> Result<Vec<Var<'g, T>>> {
        let targets: Vec<NodeId> = wrt.iter().filter_map(|v| v.id).collect();
        let done = self.sweep(output, Some(&targets), create_graph)?;
        Ok(wrt
            .iter()
            .map(|v| {
                v.id.and_then(|i| done.get(i).cloned().flatten())
                    .unwrap_or_else(|| self.constant(Tensor::zeros(v.value.shape())))
            })
            .collect())
    }
}

/// Gradient of a scalar-valued `f` at `x`, kept differentiable.
///
/// `x` must be a recorded variable. The result participates in further
/// differentiation, so a loss built from it has exact gradients with respect
/// to every parameter `f` closes over.
pub fn input_gradient<'g, T: Scalar>(
    x: &Var<'g, T>,
    f: impl FnOnce(&Var<'g, T>) -> Result<Var<'g, T>>,
) -> Result<Var<'g, T>> {
    if x.id.is_none() {
        return Err(Error::Contract(
            "input_gradient needs a recorded input variable".into(),
        ));
    }
    let y = f(x)?;
    let mut g = x.graph.grad(&y, &[x], true)?;
    Ok(g.pop().expect("one gradient per wrt"))
}

/// Per-leaf gradients from [`Graph::backward`].
pub struct Gradients<T> {
    by_node: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `leaf`; zeros when the output does not depend on it.
    pub fn get(&self, leaf: &Var<'_, T>) -> Tensor<T> {
        leaf.id
            .and_then(|i| self.by_node.get(i).cloned().flatten())
            .unwrap_or_else(|| Tensor::zeros(leaf.value.shape()))
    }
}

fn op_backward<'g, T: Scalar>(
    op: &Op<T>,
    xs: &[Var<'g, T>],
    y: &Var<'g, T>,
    g: &Var<'g, T>,
    wanted: &[bool],
) -> Result<Vec<Option<Var<'g, T>>>> {
    let graph = g.graph;
    let want = |i: usize| wanted.get(i).copied().unwrap_or(false);
    let one = |r: Result<Var<'g, T>>| -> Result<Vec<Option<Var<'g, T>>>> { Ok(vec![Some(r?)]) };
    let mask = |f: &dyn Fn(T) -> T| graph.constant(xs[0].value.map(f));
    match op {
        Op::Leaf => Ok(Vec::new()),
        &Op::MatMul { trans_a, trans_b } => {
            let (a, b) = (&xs[0], &xs[1]);
            let ga = if !want(0) {
                None
            } else if trans_a {
                Some(b.matmul_t(g, trans_b, true)?)
            } else {
                Some(g.matmul_t(b, false, !trans_b)?)
            };
            let gb = if !want(1) {
                None
            } else if trans_b {
                Some(g.matmul_t(a, true, trans_a)?)
            } else {
                Some(a.matmul_t(g, !trans_a, false)?)
            };
            Ok(vec![ga, gb])
        }
        Op::Add => Ok(vec![
            want(0).then(|| g.sum_to(xs[0].shape())).transpose()?,
            want(1).then(|| g.sum_to(xs[1].shape())).transpose()?,
        ]),
        Op::Sub => Ok(vec![
            want(0).then(|| g.sum_to(xs[0].shape())).transpose()?,
            want(1)
                .then(|| g.neg()?.sum_to(xs[1].shape()))
                .transpose()?,
        ]),
        Op::Mul => Ok(vec![
            want(0)
                .then(|| g.mul(&xs[1])?.sum_to(xs[0].shape()))
                .transpose()?,
            want(1)
                .then(|| g.mul(&xs[0])?.sum_to(xs[1].shape()))
                .transpose()?,
        ]),
        Op::Div => Ok(vec![
            want(0)
                .then(|| g.div(&xs[1])?.sum_to(xs[0].shape()))
                .transpose()?,
            want(1)
                .then(|| g.mul(y)?.div(&xs[1])?.neg()?.sum_to(xs[1].shape()))
                .transpose()?,
        ]),
        Op::Neg => one(g.neg()),
        &Op::Scale(c) => one(g.scale(c)),
        Op::Shift(_) => Ok(vec![Some(g.clone())]),
        Op::Relu => one(g.mul(&mask(&|v| if v > T::zero() { T::one() } else { T::zero() }))),
        &Op::LeakyRelu(slope) => {
            one(g.mul(&mask(&|v| if v >= T::zero() { T::one() } else { slope })))
        }
        Op::Sigmoid => one(g.mul(&y.mul(&y.neg()?.shift(T::one())?)?)),
        Op::Exp => one(g.mul(y)),
        Op::Ln => one(g.div(&xs[0])),
        Op::Sqrt => one(g.mul(&y.recip()?.scale(T::of(0.5))?)),
        Op::Square => one(g.mul(&xs[0].scale(T::of(2.0))?)),
        Op::Recip => one(g.mul(&y.square()?)?.neg()),
        Op::SoftmaxLast => {
            let inner = g.sub(&g.mul(y)?.sum_last()?)?;
            one(y.mul(&inner))
        }
        Op::SumAll | Op::SumLast | Op::SumTo => one(g.broadcast_to(xs[0].shape())),
        Op::BroadcastTo => one(g.sum_to(xs[0].shape())),
        Op::Reshape => one(g.reshape(xs[0].shape())),
        Op::Transpose => one(g.transpose()),
        &Op::Concat { axis } => {
            let mut offset = 0;
            let mut out = Vec::with_capacity(xs.len());
            for (i, x) in xs.iter().enumerate() {
                let extent = x.shape()[axis];
                out.push(want(i).then(|| g.slice(axis, offset, extent)).transpose()?);
                offset += extent;
            }
            Ok(out)
        }
        &Op::Slice { axis, start } => one(g.pad(axis, start, xs[0].shape()[axis])),
        &Op::Pad { axis, start } => one(g.slice(axis, start, xs[0].shape()[axis])),
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn id(&self) -> Option<NodeId> {
        self.id
    }

    pub fn requires_grad(&self) -> bool {
        self.id.is_some()
    }

    /// Same value, cut from the tape.
    pub fn detach(&self) -> Self {
        self.graph.constant(self.value.clone())
    }

    fn unary(&self, op: Op<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let out = self.value.map(f);
        Ok(self.graph.record(op, &[self], out))
    }

    fn binary(&self, op: Op<T>, name: &'static str, rhs: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        let out = tensor::zip_broadcast(name, &self.value, &rhs.value, f)?;
        Ok(self.graph.record(op, &[self, rhs], out))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.matmul_t(rhs, false, false)
    }

    /// Matrix product with optional transposition of either operand's two
    /// trailing axes. Both operands are rank 2, or both rank 3 with equal
    /// batch extent.
    pub fn matmul_t(&self, rhs: &Self, trans_a: bool, trans_b: bool) -> Result<Self> {
        let out = tensor::matmul(&self.value, &rhs.value, trans_a, trans_b)?;
        Ok(self
            .graph
            .record(Op::MatMul { trans_a, trans_b }, &[self, rhs], out))
    }

    /// Broadcasting sum.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.binary(Op::Add, "add", rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.binary(Op::Sub, "sub", rhs, |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.binary(Op::Mul, "mul", rhs, |a, b| a * b)
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        self.binary(Op::Div, "div", rhs, |a, b| a / b)
    }

    pub fn neg(&self) -> Result<Self> {
        self.unary(Op::Neg, |v| -v)
    }

    pub fn scale(&self, c: T) -> Result<Self> {
        self.unary(Op::Scale(c), |v| v * c)
    }

    pub fn shift(&self, c: T) -> Result<Self> {
        self.unary(Op::Shift(c), |v| v + c)
    }

    pub fn relu(&self) -> Result<Self> {
        self.unary(Op::Relu, |v| if v > T::zero() { v } else { T::zero() })
    }

    /// `x` for `x >= 0`, `slope * x` otherwise.
    pub fn leaky_relu(&self, slope: T) -> Result<Self> {
        self.unary(Op::LeakyRelu(slope), |v| if v >= T::zero() { v } else { slope * v })
    }

    pub fn sigmoid(&self) -> Result<Self> {
        self.unary(Op::Sigmoid, |v| {
            // split by sign so exp never overflows
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        })
    }

    pub fn exp(&self) -> Result<Self> {
        self.unary(Op::Exp, T::exp)
    }

    pub fn ln(&self) -> Result<Self> {
        self.unary(Op::Ln, T::ln)
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.unary(Op::Sqrt, T::sqrt)
    }

    pub fn square(&self) -> Result<Self> {
        self.unary(Op::Square, |v| v * v)
    }

    /// `1 / x`, with the convention `1 / 0 = 0` so that the derivative of
    /// `sqrt` at zero is taken as zero instead of infinity.
    pub fn recip(&self) -> Result<Self> {
        self.unary(Op::Recip, |v| if v == T::zero() { T::zero() } else { v.recip() })
    }

    /// Softmax over the last axis.
    pub fn softmax_rows(&self) -> Result<Self> {
        let out = tensor::softmax_last(&self.value);
        Ok(self.graph.record(Op::SoftmaxLast, &[self], out))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Result<Self> {
        let out = Tensor::scalar(self.value.sum_all());
        Ok(self.graph.record(Op::SumAll, &[self], out))
    }

    pub fn mean(&self) -> Result<Self> {
        let n = T::of(self.value.len() as f64);
        self.sum()?.scale(T::one() / n)
    }

    /// Sum over the last axis, keeping it with extent 1.
    pub fn sum_last(&self) -> Result<Self> {
        let out = tensor::sum_last(&self.value);
        Ok(self.graph.record(Op::SumLast, &[self], out))
    }

    pub fn mean_last(&self) -> Result<Self> {
        let n = *self.shape().last().expect("rank >= 1");
        self.sum_last()?.scale(T::one() / T::of(n as f64))
    }

    /// Reduces a broadcast result back to `shape`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Self> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let out = tensor::sum_to(&self.value, shape)?;
        Ok(self.graph.record(Op::SumTo, &[self], out))
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Self> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let out = tensor::broadcast_to(&self.value, shape)?;
        Ok(self.graph.record(Op::BroadcastTo, &[self], out))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let out = self.value.reshape(shape)?;
        Ok(self.graph.record(Op::Reshape, &[self], out))
    }

    /// Swaps the two trailing axes of a rank-2 or rank-3 tensor.
    pub fn transpose(&self) -> Result<Self> {
        let out = tensor::transpose(&self.value)?;
        Ok(self.graph.record(Op::Transpose, &[self], out))
    }

    pub fn concat(parts: &[Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let values: Vec<Tensor<T>> = parts.iter().map(|p| p.value.clone()).collect();
        let out = tensor::concat(&values, axis)?;
        let refs: Vec<&Self> = parts.iter().collect();
        Ok(first.graph.record(Op::Concat { axis }, &refs, out))
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        let out = tensor::slice(&self.value, axis, start, len)?;
        Ok(self.graph.record(Op::Slice { axis, start }, &[self], out))
    }

    fn pad(&self, axis: usize, start: usize, total: usize) -> Result<Self> {
        let out = tensor::pad(&self.value, axis, start, total)?;
        Ok(self.graph.record(Op::Pad { axis, start }, &[self], out))
    }

    // -- composites -------------------------------------------------------

    /// Normalizes every row (last axis) to zero mean and unit variance, with
    /// `eps` added to the variance.
    pub fn layer_norm_rows(&self, eps: T) -> Result<Self> {
        let centered = self.sub(&self.mean_last()?)?;
        let var = centered.square()?.mean_last()?;
        centered.div(&var.shift(eps)?.sqrt()?)
    }

    /// Euclidean norm of every row, keeping the last axis with extent 1.
    pub fn norm_l2_rows(&self) -> Result<Self> {
        self.square()?.sum_last()?.sqrt()
    }

    /// Euclidean norm of all elements, shape `[1]`.
    pub fn norm_l2(&self) -> Result<Self> {
        self.square()?.sum()?.sqrt()
    }
}
