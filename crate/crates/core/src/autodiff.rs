//! Reverse-mode automatic differentiation on a dynamic tape.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its cached value. Nodes only ever reference earlier nodes, so the node
//! index order is a topological order and [`Tape::backward`] is a single
//! reverse sweep. A fresh tape is built for every bag.

use std::borrow::Cow;

use crate::error::{MilError, Result};
use crate::tensor::{sigmoid, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxInstances(Var),
    ConcatColumns(Vec<Var>),
    SliceColumns { input: Var, start: usize },
    PadColumns(Var),
    MeanRows(Var),
    MaxRows { input: Var, argmax: Vec<usize> },
    CrossEntropy { logits: Var, label: usize, probs: Vec<f64> },
    Sum(Var),
}

#[derive(Debug)]
struct Node<'a> {
    op: Op,
    value: Cow<'a, Tensor>,
    requires_grad: bool,
}

/// Elementwise operations available on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Tanh,
    Sigmoid,
    Relu,
    Add,
    Mul,
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input (parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// A non-differentiable input (data).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    /// A differentiable input borrowed for the lifetime of the tape.
    pub fn leaf_ref(&mut self, value: &'a Tensor) -> Var {
        self.push_value(Op::Leaf, Cow::Borrowed(value), true)
    }

    /// A non-differentiable input borrowed for the lifetime of the tape.
    pub fn constant_ref(&mut self, value: &'a Tensor) -> Var {
        self.push_value(Op::Leaf, Cow::Borrowed(value), false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.push_value(op, Cow::Owned(value), requires_grad)
    }

    fn push_value(&mut self, op: Op, value: Cow<'a, Tensor>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::MatMulNt(a, b), value, rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.needs(&[a]);
        self.push(Op::Transpose(a), value, rg)
    }

    pub fn elementwise(&mut self, op: Elementwise, operands: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Mul => 2,
            _ => 1,
        };
        if operands.len() != arity {
            return Err(MilError::EmptyInput("elementwise operand count"));
        }
        match op {
            Elementwise::Tanh => Ok(self.tanh(operands[0])),
            Elementwise::Sigmoid => Ok(self.sigmoid(operands[0])),
            Elementwise::Relu => Ok(self.relu(operands[0])),
            Elementwise::Add => self.add(operands[0], operands[1]),
            Elementwise::Mul => self.mul(operands[0], operands[1]),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    /// Adds the `1 x c` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(MilError::Shape {
                op: "add_row",
                left: xv.shape(),
                right: bv.shape(),
            });
        }
        let mut value = xv.clone();
        let cols = value.cols();
        for (i, v) in value.data_mut().iter_mut().enumerate() {
            *v += bv.data()[i % cols];
        }
        let rg = self.needs(&[x, bias]);
        Ok(self.push(Op::AddRow(x, bias), value, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.needs(&[a]);
        self.push(Op::Tanh(a), value, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.needs(&[a]);
        self.push(Op::Sigmoid(a), value, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| if v < 0.0 { 0.0 } else { v });
        let rg = self.needs(&[a]);
        self.push(Op::Relu(a), value, rg)
    }

    /// Softmax down an `N x 1` column of instance scores.
    pub fn softmax_instances(&mut self, scores: Var) -> Result<Var> {
        let s = self.value(scores);
        if s.rows() == 0 {
            return Err(MilError::EmptyBag("softmax_over_instances"));
        }
        if s.cols() != 1 {
            return Err(MilError::Shape {
                op: "softmax_over_instances",
                left: s.shape(),
                right: (s.rows(), 1),
            });
        }
        let value = Tensor::column_vector(&softmax(s.data()));
        let rg = self.needs(&[scores]);
        Ok(self.push(Op::SoftmaxInstances(scores), value, rg))
    }

    pub fn concat_columns(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(MilError::EmptyInput("concat_columns needs at least one part"));
        };
        let rows = self.value(first).rows();
        for &p in parts {
            let shape = self.value(p).shape();
            if shape.0 != rows {
                return Err(MilError::Shape {
                    op: "concat_columns",
                    left: self.value(first).shape(),
                    right: shape,
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(rows, cols, data)?;
        let rg = self.needs(parts);
        Ok(self.push(Op::ConcatColumns(parts.to_vec()), value, rg))
    }

    pub fn slice_columns(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.value(input).slice_columns(start, len)?;
        let rg = self.needs(&[input]);
        Ok(self.push(Op::SliceColumns { input, start }, value, rg))
    }

    /// Zero-pads `input` on the right up to `width` columns.
    pub fn pad_columns(&mut self, input: Var, width: usize) -> Result<Var> {
        let x = self.value(input);
        if width < x.cols() {
            return Err(MilError::Shape {
                op: "pad_columns",
                left: x.shape(),
                right: (x.rows(), width),
            });
        }
        let mut value = Tensor::zeros(x.rows(), width);
        for r in 0..x.rows() {
            value.data_mut()[r * width..r * width + x.cols()].copy_from_slice(x.row(r));
        }
        let rg = self.needs(&[input]);
        Ok(self.push(Op::PadColumns(input), value, rg))
    }

    pub fn mean_rows(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.rows() == 0 {
            return Err(MilError::EmptyBag("mean_rows"));
        }
        let n = x.rows() as f64;
        let mut out = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for (o, v) in out.iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        let rg = self.needs(&[input]);
        Ok(self.push(Op::MeanRows(input), Tensor::row_vector(&out), rg))
    }

    /// Column-wise max; ties resolve to the lowest row index.
    pub fn max_rows(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.rows() == 0 {
            return Err(MilError::EmptyBag("max_rows"));
        }
        let mut argmax = vec![0usize; x.cols()];
        let mut out = x.row(0).to_vec();
        for r in 1..x.rows() {
            for (c, &v) in x.row(r).iter().enumerate() {
                if v > out[c] {
                    out[c] = v;
                    argmax[c] = r;
                }
            }
        }
        let rg = self.needs(&[input]);
        Ok(self.push(Op::MaxRows { input, argmax }, Tensor::row_vector(&out), rg))
    }

    /// `-log softmax(logits)[label]` for a `1 x C` logit row.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let l = self.value(logits);
        if l.rows() != 1 || l.cols() == 0 {
            return Err(MilError::Shape {
                op: "cross_entropy",
                left: l.shape(),
                right: (1, l.cols()),
            });
        }
        if label >= l.cols() {
            return Err(MilError::LabelOutOfRange {
                label,
                classes: l.cols(),
            });
        }
        let lse = log_sum_exp(l.data());
        let loss = lse - l.data()[label];
        let probs = l.data().iter().map(|&v| (v - lse).exp()).collect();
        let rg = self.needs(&[logits]);
        Ok(self.push(
            Op::CrossEntropy {
                logits,
                label,
                probs,
            },
            Tensor::scalar(loss),
            rg,
        ))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let value = Tensor::scalar(self.value(input).sum());
        let rg = self.needs(&[input]);
        self.push(Op::Sum(input), value, rg)
    }

    /// Accumulates `d root / d node` for every node that depends on a leaf.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(MilError::NonScalarRoot(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(Tensor::scalar(1.0));
        }
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    accumulate(grads, *a, g.matmul_nt(self.value(*b))?);
                }
                if self.nodes[b.0].requires_grad {
                    accumulate(grads, *b, self.value(*a).matmul_tn(g)?);
                }
            }
            Op::MatMulNt(a, b) => {
                if self.nodes[a.0].requires_grad {
                    accumulate(grads, *a, g.matmul(self.value(*b))?);
                }
                if self.nodes[b.0].requires_grad {
                    accumulate(grads, *b, g.matmul_tn(self.value(*a))?);
                }
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(x, bias) => {
                accumulate(grads, *x, g.clone());
                let mut colsum = vec![0.0; g.cols()];
                for r in 0..g.rows() {
                    for (s, v) in colsum.iter_mut().zip(g.row(r)) {
                        *s += v;
                    }
                }
                accumulate(grads, *bias, Tensor::row_vector(&colsum));
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g.zip_map(self.value(*b), "mul", |gv, bv| gv * bv)?);
                accumulate(grads, *b, g.zip_map(self.value(*a), "mul", |gv, av| gv * av)?);
            }
            Op::Tanh(a) => accumulate(grads, *a, g.zip_map(y, "tanh", |gv, t| gv * (1.0 - t * t))?),
            Op::Sigmoid(a) => accumulate(grads, *a, g.zip_map(y, "sigmoid", |gv, s| gv * s * (1.0 - s))?),
            Op::Relu(a) => accumulate(
                grads,
                *a,
                g.zip_map(y, "relu", |gv, r| if r > 0.0 { gv } else { 0.0 })?,
            ),
            Op::SoftmaxInstances(s) => {
                let dot: f64 = g.data().iter().zip(y.data()).map(|(gv, yv)| gv * yv).sum();
                accumulate(grads, *s, g.zip_map(y, "softmax", |gv, yv| yv * (gv - dot))?);
            }
            Op::ConcatColumns(parts) => {
                let mut start = 0;
                for &p in parts {
                    let width = self.value(p).cols();
                    accumulate(grads, p, g.slice_columns(start, width)?);
                    start += width;
                }
            }
            Op::SliceColumns { input, start } => {
                let x = self.value(*input);
                let mut dx = Tensor::zeros(x.rows(), x.cols());
                let width = g.cols();
                for r in 0..x.rows() {
                    let base = r * x.cols() + start;
                    dx.data_mut()[base..base + width].copy_from_slice(g.row(r));
                }
                accumulate(grads, *input, dx);
            }
            Op::PadColumns(input) => {
                let cols = self.value(*input).cols();
                accumulate(grads, *input, g.slice_columns(0, cols)?);
            }
            Op::MeanRows(input) => {
                let x = self.value(*input);
                let n = x.rows() as f64;
                let mut dx = Tensor::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    for c in 0..x.cols() {
                        dx.set(r, c, g.data()[c] / n);
                    }
                }
                accumulate(grads, *input, dx);
            }
            Op::MaxRows { input, argmax } => {
                let x = self.value(*input);
                let mut dx = Tensor::zeros(x.rows(), x.cols());
                for (c, &r) in argmax.iter().enumerate() {
                    dx.set(r, c, g.data()[c]);
                }
                accumulate(grads, *input, dx);
            }
            Op::CrossEntropy {
                logits,
                label,
                probs,
            } => {
                let scale = g.item();
                let d: Vec<f64> = probs
                    .iter()
                    .enumerate()
                    .map(|(c, &p)| scale * (p - if c == *label { 1.0 } else { 0.0 }))
                    .collect();
                accumulate(grads, *logits, Tensor::row_vector(&d));
            }
            Op::Sum(input) => {
                let x = self.value(*input);
                accumulate(grads, *input, Tensor::filled(x.rows(), x.cols(), g.item()));
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, delta: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient with respect to `var`, zeros if `var` does not influence the root.
    pub fn wrt(&self, tape: &Tape, var: Var) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.value(var).shape();
                Tensor::zeros(r, c)
            }
        }
    }
}

/// Max-shifted softmax of a score vector.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}
