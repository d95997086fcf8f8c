//! Reverse-mode differentiation over an explicit operation tape.
//!
//! Ops append nodes to a [`Tape`]; node creation order is a topological order
//! of the graph, so the backward pass is a single reverse sweep that visits
//! each node exactly once. Gradients accumulate into `grad` slots; callers
//! reset between backward passes.

use crate::error::{Error, Result};
use crate::ops::{self, PaddingMode};
use crate::tensor::{Element, Shape, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: PaddingMode,
        groups: usize,
    },
    MaxPool2x2 {
        input: NodeId,
        argmax: Vec<u32>,
    },
    Upsample2x {
        input: NodeId,
    },
    Concat {
        a: NodeId,
        b: NodeId,
        c_a: usize,
    },
    Relu {
        input: NodeId,
    },
    Sigmoid {
        input: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Div {
        a: NodeId,
        b: NodeId,
    },
    ScalarMul {
        input: NodeId,
        k: f64,
    },
    ScalarAdd {
        input: NodeId,
    },
    Abs {
        input: NodeId,
    },
    Clamp {
        input: NodeId,
        lo: f64,
        hi: f64,
    },
    GlobalAvgPool {
        input: NodeId,
    },
    GlobalMaxPool {
        input: NodeId,
        argmax: Vec<u32>,
    },
    MeanChannels {
        input: NodeId,
    },
    MaxChannels {
        input: NodeId,
        argmax: Vec<u32>,
    },
    DiffH {
        input: NodeId,
    },
    DiffV {
        input: NodeId,
    },
    SumAll {
        input: NodeId,
    },
    MeanAll {
        input: NodeId,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2x2 { .. } => "maxpool2x2",
            Op::Upsample2x { .. } => "bilinear_upsample2x",
            Op::Concat { .. } => "concat_channels",
            Op::Relu { .. } => "relu",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Div { .. } => "div",
            Op::ScalarMul { .. } => "scalar_mul",
            Op::ScalarAdd { .. } => "scalar_add",
            Op::Abs { .. } => "abs",
            Op::Clamp { .. } => "clamp",
            Op::GlobalAvgPool { .. } => "global_avg_pool",
            Op::GlobalMaxPool { .. } => "global_max_pool",
            Op::MeanChannels { .. } => "mean_channels",
            Op::MaxChannels { .. } => "max_channels",
            Op::DiffH { .. } => "diff_h",
            Op::DiffV { .. } => "diff_v",
            Op::SumAll { .. } => "sum",
            Op::MeanAll { .. } => "mean",
        }
    }
}

struct Node<E: Element> {
    value: Tensor<E>,
    grad: Option<Tensor<E>>,
    requires_grad: bool,
    label: Option<String>,
    op: Op,
}

/// Operation tape. Single-owner: one backward pass at a time.
pub struct Tape<E: Element> {
    nodes: Vec<Node<E>>,
    /// When set, kink-sensitive ops fold their decision masks (ReLU signs,
    /// pool argmaxes, clamp saturation) into this hash. The gradient checker
    /// compares hashes of the two perturbed forward passes to detect a
    /// crossed kink.
    decision_hash: Option<u64>,
}

impl<E: Element> Default for Tape<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> Tape<E> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            decision_hash: None,
        }
    }

    /// Enable decision recording (see [`Tape::decision_hash`]).
    pub fn record_decisions(&mut self) {
        self.decision_hash = Some(0xCBF2_9CE4_8422_2325);
    }

    pub fn decision_hash(&self) -> Option<u64> {
        self.decision_hash
    }

    fn fold_decision_bytes(&mut self, bytes: impl IntoIterator<Item = u8>) {
        if let Some(h) = self.decision_hash.as_mut() {
            for b in bytes {
                *h ^= b as u64;
                *h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
    }

    fn fold_decision_mask(&mut self, t: &Tensor<E>, pred: impl Fn(E) -> bool) {
        if self.decision_hash.is_some() {
            let bits: Vec<u8> = t.as_slice().iter().map(|&v| pred(v) as u8).collect();
            self.fold_decision_bytes(bits);
        }
    }

    fn fold_decision_indices(&mut self, idx: &[u32]) {
        if self.decision_hash.is_some() {
            let bytes: Vec<u8> = idx.iter().flat_map(|v| v.to_le_bytes()).collect();
            self.fold_decision_bytes(bytes);
        }
    }

    fn push(&mut self, value: Tensor<E>, requires_grad: bool, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            label: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<E> {
        &self.nodes[id.0].value
    }

    pub fn shape_of(&self, id: NodeId) -> Shape {
        self.nodes[id.0].value.shape()
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor<E>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn set_label(&mut self, id: NodeId, label: impl Into<String>) {
        self.nodes[id.0].label = Some(label.into());
    }

    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Insert a leaf holding `value`. `requires_grad` marks parameters.
    pub fn leaf(&mut self, value: Tensor<E>, requires_grad: bool) -> NodeId {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: PaddingMode,
        groups: usize,
    ) -> Result<NodeId> {
        let out = ops::conv2d(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
            padding,
            groups,
        )?;
        let req = self.requires(input)
            || self.requires(weight)
            || bias.map(|b| self.requires(b)).unwrap_or(false);
        Ok(self.push(
            out,
            req,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
                groups,
            },
        ))
    }

    pub fn maxpool2x2(&mut self, input: NodeId) -> Result<NodeId> {
        let (out, argmax) = ops::maxpool2x2(self.value(input))?;
        self.fold_decision_indices(&argmax);
        let req = self.requires(input);
        Ok(self.push(out, req, Op::MaxPool2x2 { input, argmax }))
    }

    pub fn upsample2x(&mut self, input: NodeId) -> NodeId {
        let out = ops::bilinear_upsample2x(self.value(input));
        let req = self.requires(input);
        self.push(out, req, Op::Upsample2x { input })
    }

    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let c_a = self.shape_of(a).c;
        let out = ops::concat_channels(self.value(a), self.value(b))?;
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(out, req, Op::Concat { a, b, c_a }))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let v = self.value(input).clone();
        self.fold_decision_mask(&v, |x| x > E::ZERO);
        let out = ops::relu(&v);
        let req = self.requires(input);
        self.push(out, req, Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        let out = ops::sigmoid(self.value(input));
        let req = self.requires(input);
        self.push(out, req, Op::Sigmoid { input })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = ops::add(self.value(a), self.value(b))?;
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(out, req, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = ops::sub(self.value(a), self.value(b))?;
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(out, req, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = ops::mul(self.value(a), self.value(b))?;
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(out, req, Op::Mul { a, b }))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = ops::div(self.value(a), self.value(b))?;
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(out, req, Op::Div { a, b }))
    }

    pub fn scalar_mul(&mut self, input: NodeId, k: f64) -> NodeId {
        let out = ops::scalar_mul(self.value(input), E::from_f64(k));
        let req = self.requires(input);
        self.push(out, req, Op::ScalarMul { input, k })
    }

    pub fn scalar_add(&mut self, input: NodeId, k: f64) -> NodeId {
        let out = ops::scalar_add(self.value(input), E::from_f64(k));
        let req = self.requires(input);
        self.push(out, req, Op::ScalarAdd { input })
    }

    pub fn abs(&mut self, input: NodeId) -> NodeId {
        let v = self.value(input).clone();
        self.fold_decision_mask(&v, |x| x > E::ZERO);
        let out = ops::abs(&v);
        let req = self.requires(input);
        self.push(out, req, Op::Abs { input })
    }

    pub fn clamp(&mut self, input: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(input).clone();
        let (elo, ehi) = (E::from_f64(lo), E::from_f64(hi));
        self.fold_decision_mask(&v, |x| x > elo && x < ehi);
        let out = ops::clamp(&v, elo, ehi);
        let req = self.requires(input);
        self.push(out, req, Op::Clamp { input, lo, hi })
    }

    pub fn global_avg_pool(&mut self, input: NodeId) -> NodeId {
        let out = ops::global_avg_pool(self.value(input));
        let req = self.requires(input);
        self.push(out, req, Op::GlobalAvgPool { input })
    }

    pub fn global_max_pool(&mut self, input: NodeId) -> NodeId {
        let (out, argmax) = ops::global_max_pool(self.value(input));
        self.fold_decision_indices(&argmax);
        let req = self.requires(input);
        self.push(out, req, Op::GlobalMaxPool { input, argmax })
    }

    pub fn mean_channels(&mut self, input: NodeId) -> NodeId {
        let out = ops::mean_channels(self.value(input));
        let req = self.requires(input);
        self.push(out, req, Op::MeanChannels { input })
    }

    pub fn max_channels(&mut self, input: NodeId) -> NodeId {
        let (out, argmax) = ops::max_channels(self.value(input));
        self.fold_decision_indices(&argmax);
        let req = self.requires(input);
        self.push(out, req, Op::MaxChannels { input, argmax })
    }

    pub fn diff_h(&mut self, input: NodeId) -> Result<NodeId> {
        let out = ops::diff_h(self.value(input))?;
        let req = self.requires(input);
        Ok(self.push(out, req, Op::DiffH { input }))
    }

    pub fn diff_v(&mut self, input: NodeId) -> Result<NodeId> {
        let out = ops::diff_v(self.value(input))?;
        let req = self.requires(input);
        Ok(self.push(out, req, Op::DiffV { input }))
    }

    pub fn sum_all(&mut self, input: NodeId) -> NodeId {
        let out = ops::sum_all(self.value(input));
        let req = self.requires(input);
        self.push(out, req, Op::SumAll { input })
    }

    pub fn mean_all(&mut self, input: NodeId) -> NodeId {
        let out = ops::mean_all(self.value(input));
        let req = self.requires(input);
        self.push(out, req, Op::MeanAll { input })
    }

    fn accumulate(&mut self, id: NodeId, delta: Tensor<E>) {
        let slot = &mut self.nodes[id.0].grad;
        match slot {
            Some(g) => {
                for (gv, dv) in g.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                    *gv += *dv;
                }
            }
            None => *slot = Some(delta),
        }
    }

    /// Populate gradients of every grad-requiring ancestor of `root`.
    ///
    /// `root` must be scalar-valued (shape 1x1x1x1). Repeated calls without
    /// [`Tape::reset_grads`] accumulate.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let rs = self.shape_of(root);
        if rs.len() != 1 {
            return Err(Error::arg(
                "backward",
                format!("root must be scalar (1x1x1x1), got {}", rs),
            ));
        }
        self.accumulate(root, Tensor::scalar(E::ONE));

        for i in (0..=root.0).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            // Take the grad out to appease the borrow checker; put it back after.
            let grad = self.nodes[i].grad.take().unwrap();
            self.propagate(i, &grad)?;
            self.nodes[i].grad = Some(grad);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, grad: &Tensor<E>) -> Result<()> {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
                groups,
            } => {
                let (input, weight, bias) = (*input, *weight, *bias);
                let (stride, padding, groups) = (*stride, *padding, *groups);
                if self.requires(input) {
                    let gi = ops::conv2d_backward_input(
                        grad,
                        self.shape_of(input),
                        self.value(weight),
                        stride,
                        padding,
                        groups,
                    )?;
                    self.accumulate(input, gi);
                }
                if self.requires(weight) {
                    let gw = ops::conv2d_backward_weight(
                        grad,
                        self.value(input),
                        self.shape_of(weight),
                        stride,
                        padding,
                        groups,
                    )?;
                    self.accumulate(weight, gw);
                }
                if let Some(b) = bias {
                    if self.requires(b) {
                        let gb = ops::conv2d_backward_bias(grad);
                        self.accumulate(b, gb);
                    }
                }
            }
            Op::MaxPool2x2 { input, argmax } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::maxpool2x2_backward(grad, argmax, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::Upsample2x { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::bilinear_upsample2x_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::Concat { a, b, c_a } => {
                let (a, b, c_a) = (*a, *b, *c_a);
                let (ga, gb) = ops::concat_channels_backward(grad, c_a);
                if self.requires(a) {
                    self.accumulate(a, ga);
                }
                if self.requires(b) {
                    self.accumulate(b, gb);
                }
            }
            Op::Relu { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::relu_backward(grad, self.value(input));
                    self.accumulate(input, g);
                }
            }
            Op::Sigmoid { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::sigmoid_backward(grad, &self.nodes[i].value);
                    self.accumulate(input, g);
                }
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let g = ops::reduce_to_shape(grad, self.shape_of(a));
                    self.accumulate(a, g);
                }
                if self.requires(b) {
                    let g = ops::reduce_to_shape(grad, self.shape_of(b));
                    self.accumulate(b, g);
                }
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let g = ops::reduce_to_shape(grad, self.shape_of(a));
                    self.accumulate(a, g);
                }
                if self.requires(b) {
                    let neg = ops::scalar_mul(grad, E::from_f64(-1.0));
                    let g = ops::reduce_to_shape(&neg, self.shape_of(b));
                    self.accumulate(b, g);
                }
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let ga = ops::mul(grad, self.value(b))?;
                    self.accumulate(a, ops::reduce_to_shape(&ga, self.shape_of(a)));
                }
                if self.requires(b) {
                    let gb = ops::mul(grad, self.value(a))?;
                    self.accumulate(b, ops::reduce_to_shape(&gb, self.shape_of(b)));
                }
            }
            Op::Div { a, b } => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let ga = ops::div(grad, self.value(b))?;
                    self.accumulate(a, ops::reduce_to_shape(&ga, self.shape_of(a)));
                }
                if self.requires(b) {
                    // d(a/b)/db = -a / b^2
                    let bb = ops::mul(self.value(b), self.value(b))?;
                    let ab2 = ops::div(self.value(a), &bb)?;
                    let gb = ops::mul(grad, &ab2)?;
                    let gb = ops::scalar_mul(&gb, E::from_f64(-1.0));
                    self.accumulate(b, ops::reduce_to_shape(&gb, self.shape_of(b)));
                }
            }
            Op::ScalarMul { input, k } => {
                let (input, k) = (*input, *k);
                if self.requires(input) {
                    let g = ops::scalar_mul(grad, E::from_f64(k));
                    self.accumulate(input, g);
                }
            }
            Op::ScalarAdd { input } => {
                let input = *input;
                if self.requires(input) {
                    self.accumulate(input, grad.clone());
                }
            }
            Op::Abs { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::abs_backward(grad, self.value(input));
                    self.accumulate(input, g);
                }
            }
            Op::Clamp { input, lo, hi } => {
                let (input, lo, hi) = (*input, *lo, *hi);
                if self.requires(input) {
                    let g = ops::clamp_backward(
                        grad,
                        self.value(input),
                        E::from_f64(lo),
                        E::from_f64(hi),
                    );
                    self.accumulate(input, g);
                }
            }
            Op::GlobalAvgPool { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::global_avg_pool_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::GlobalMaxPool { input, argmax } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::global_max_pool_backward(grad, argmax, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::MeanChannels { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::mean_channels_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::MaxChannels { input, argmax } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::max_channels_backward(grad, argmax, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::DiffH { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::diff_h_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::DiffV { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::diff_v_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::SumAll { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::sum_all_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
            Op::MeanAll { input } => {
                let input = *input;
                if self.requires(input) {
                    let g = ops::mean_all_backward(grad, self.shape_of(input));
                    self.accumulate(input, g);
                }
            }
        }
        Ok(())
    }

    /// First node (in creation order) whose value holds a non-finite entry.
    pub fn first_non_finite(&self) -> Option<(usize, String)> {
        self.nodes.iter().enumerate().find_map(|(i, n)| {
            if n.value.all_finite() {
                None
            } else {
                let label = n
                    .label
                    .clone()
                    .unwrap_or_else(|| format!("{} (node {})", n.op.name(), i));
                Some((i, label))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(
            Tensor::from_fn(Shape::new(1, 2, 3, 3), |_, c, y, xx| {
                0.1 * (c + y + xx) as f64 + 0.3
            }),
            true,
        );
        let s = tape.sum_all(x);
        tape.backward(s).unwrap();
        assert!(tape.grad(x).unwrap().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn backward_of_half_square_sum_is_x() {
        let mut tape = Tape::<f64>::new();
        let xt = Tensor::from_fn(Shape::new(1, 1, 2, 2), |_, _, y, xx| {
            0.5 + 0.25 * (y * 2 + xx) as f64
        });
        let x = tape.leaf(xt.clone(), true);
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum_all(sq);
        let half = tape.scalar_mul(s, 0.5);
        tape.backward(half).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &xt);
    }

    #[test]
    fn backward_rejects_nonscalar_root() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(Shape::new(1, 1, 2, 2)), true);
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(Shape::new(1, 1, 1, 2), 2.0), true);
        let s = tape.sum_all(x);
        tape.backward(s).unwrap();
        tape.backward(s).unwrap();
        // Root grad was re-seeded, so leaf grads double.
        assert!(tape.grad(x).unwrap().iter().all(|&g| g == 2.0));
        tape.reset_grads();
        tape.backward(s).unwrap();
        assert!(tape.grad(x).unwrap().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn concat_backward_splits_identity() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::full(Shape::new(1, 2, 2, 2), 1.0), true);
        let b = tape.leaf(Tensor::full(Shape::new(1, 3, 2, 2), 2.0), true);
        let cat = tape.concat_channels(a, b).unwrap();
        let s = tape.sum_all(cat);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(a).unwrap().shape(), Shape::new(1, 2, 2, 2));
        assert_eq!(tape.grad(b).unwrap().shape(), Shape::new(1, 3, 2, 2));
        assert!(tape.grad(a).unwrap().iter().all(|&g| g == 1.0));
        assert!(tape.grad(b).unwrap().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn non_finite_scan_names_first_bad_node() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(Shape::new(1, 1, 1, 1), 0.0), false);
        let y = tape.leaf(Tensor::full(Shape::new(1, 1, 1, 1), 0.0), false);
        let d = tape.div(x, y).unwrap(); // 0/0 = NaN
        tape.set_label(d, "ratio");
        let (idx, label) = tape.first_non_finite().unwrap();
        assert_eq!(idx, d.0);
        assert_eq!(label, "ratio");
    }
}
