//! Execution contexts: one forward definition, several behaviours.
//!
//! Network and loss wiring is written once against the [`Ctx`] trait. Running
//! it with [`EvalCtx`] computes plain tensors (inference), with [`TapeCtx`] it
//! records an autodiff tape (training, gradient checks), and the profiler's
//! counting context measures multiply-accumulates. All contexts share the same
//! underlying op implementations, so their numeric results are identical.

use std::collections::HashMap;

use crate::autodiff::{NodeId, Tape};
use crate::error::Result;
use crate::ops::{self, PaddingMode};
use crate::tensor::{Element, Shape, Tensor};

pub trait Ctx<E: Element> {
    type V: Clone;

    /// Non-trainable input value (e.g. the image batch).
    fn input(&mut self, t: &Tensor<E>) -> Self::V;
    /// Trainable parameter; `path` is its canonical name. Inserted once per
    /// path, so repeated calls return the same underlying value.
    fn param(&mut self, path: &str, t: &Tensor<E>) -> Self::V;
    /// Fixed non-trainable tensor (e.g. the SSIM window).
    fn constant(&mut self, t: &Tensor<E>) -> Self::V;

    fn shape(&self, v: &Self::V) -> Shape;
    /// Attach a diagnostic name to a value (used by NaN reports). No-op by default.
    fn label(&mut self, _v: &Self::V, _name: &str) {}

    fn conv2d(
        &mut self,
        x: &Self::V,
        weight: &Self::V,
        bias: Option<&Self::V>,
        stride: usize,
        padding: PaddingMode,
        groups: usize,
    ) -> Result<Self::V>;
    fn maxpool2x2(&mut self, x: &Self::V) -> Result<Self::V>;
    fn upsample2x(&mut self, x: &Self::V) -> Self::V;
    fn concat_channels(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn relu(&mut self, x: &Self::V) -> Self::V;
    fn sigmoid(&mut self, x: &Self::V) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn div(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scalar_mul(&mut self, x: &Self::V, k: f64) -> Self::V;
    fn scalar_add(&mut self, x: &Self::V, k: f64) -> Self::V;
    fn abs(&mut self, x: &Self::V) -> Self::V;
    fn clamp(&mut self, x: &Self::V, lo: f64, hi: f64) -> Self::V;
    fn global_avg_pool(&mut self, x: &Self::V) -> Self::V;
    fn global_max_pool(&mut self, x: &Self::V) -> Self::V;
    fn mean_channels(&mut self, x: &Self::V) -> Self::V;
    fn max_channels(&mut self, x: &Self::V) -> Self::V;
    fn diff_h(&mut self, x: &Self::V) -> Result<Self::V>;
    fn diff_v(&mut self, x: &Self::V) -> Result<Self::V>;
    fn mean_all(&mut self, x: &Self::V) -> Self::V;
    fn sum_all(&mut self, x: &Self::V) -> Self::V;
}

/// Plain tensor evaluation.
#[derive(Debug, Default)]
pub struct EvalCtx;

impl EvalCtx {
    pub fn new() -> Self {
        EvalCtx
    }
}

impl<E: Element> Ctx<E> for EvalCtx {
    type V = Tensor<E>;

    fn input(&mut self, t: &Tensor<E>) -> Tensor<E> {
        t.clone()
    }
    fn param(&mut self, _path: &str, t: &Tensor<E>) -> Tensor<E> {
        t.clone()
    }
    fn constant(&mut self, t: &Tensor<E>) -> Tensor<E> {
        t.clone()
    }
    fn shape(&self, v: &Tensor<E>) -> Shape {
        v.shape()
    }

    fn conv2d(
        &mut self,
        x: &Tensor<E>,
        weight: &Tensor<E>,
        bias: Option<&Tensor<E>>,
        stride: usize,
        padding: PaddingMode,
        groups: usize,
    ) -> Result<Tensor<E>> {
        ops::conv2d(x, weight, bias, stride, padding, groups)
    }
    fn maxpool2x2(&mut self, x: &Tensor<E>) -> Result<Tensor<E>> {
        Ok(ops::maxpool2x2(x)?.0)
    }
    fn upsample2x(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::bilinear_upsample2x(x)
    }
    fn concat_channels(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        ops::concat_channels(a, b)
    }
    fn relu(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::relu(x)
    }
    fn sigmoid(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::sigmoid(x)
    }
    fn add(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        ops::add(a, b)
    }
    fn sub(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        ops::sub(a, b)
    }
    fn mul(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        ops::mul(a, b)
    }
    fn div(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        ops::div(a, b)
    }
    fn scalar_mul(&mut self, x: &Tensor<E>, k: f64) -> Tensor<E> {
        ops::scalar_mul(x, E::from_f64(k))
    }
    fn scalar_add(&mut self, x: &Tensor<E>, k: f64) -> Tensor<E> {
        ops::scalar_add(x, E::from_f64(k))
    }
    fn abs(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::abs(x)
    }
    fn clamp(&mut self, x: &Tensor<E>, lo: f64, hi: f64) -> Tensor<E> {
        ops::clamp(x, E::from_f64(lo), E::from_f64(hi))
    }
    fn global_avg_pool(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::global_avg_pool(x)
    }
    fn global_max_pool(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::global_max_pool(x).0
    }
    fn mean_channels(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::mean_channels(x)
    }
    fn max_channels(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::max_channels(x).0
    }
    fn diff_h(&mut self, x: &Tensor<E>) -> Result<Tensor<E>> {
        ops::diff_h(x)
    }
    fn diff_v(&mut self, x: &Tensor<E>) -> Result<Tensor<E>> {
        ops::diff_v(x)
    }
    fn mean_all(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::mean_all(x)
    }
    fn sum_all(&mut self, x: &Tensor<E>) -> Tensor<E> {
        ops::sum_all(x)
    }
}

/// Tape-recording context for training and gradient checking.
pub struct TapeCtx<E: Element> {
    pub tape: Tape<E>,
    params: HashMap<String, NodeId>,
}

impl<E: Element> Default for TapeCtx<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> TapeCtx<E> {
    pub fn new() -> Self {
        TapeCtx {
            tape: Tape::new(),
            params: HashMap::new(),
        }
    }

    pub fn param_node(&self, path: &str) -> Option<NodeId> {
        self.params.get(path).copied()
    }

    /// Gradient of a named parameter after `tape.backward`.
    pub fn param_grad(&self, path: &str) -> Option<&Tensor<E>> {
        self.params.get(path).and_then(|id| self.tape.grad(*id))
    }

    pub fn param_paths(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }
}

impl<E: Element> Ctx<E> for TapeCtx<E> {
    type V = NodeId;

    fn input(&mut self, t: &Tensor<E>) -> NodeId {
        self.tape.leaf(t.clone(), false)
    }
    fn param(&mut self, path: &str, t: &Tensor<E>) -> NodeId {
        if let Some(id) = self.params.get(path) {
            return *id;
        }
        let id = self.tape.leaf(t.clone(), true);
        self.tape.set_label(id, path);
        self.params.insert(path.to_string(), id);
        id
    }
    fn constant(&mut self, t: &Tensor<E>) -> NodeId {
        self.tape.leaf(t.clone(), false)
    }
    fn shape(&self, v: &NodeId) -> Shape {
        self.tape.shape_of(*v)
    }
    fn label(&mut self, v: &NodeId, name: &str) {
        self.tape.set_label(*v, name);
    }

    fn conv2d(
        &mut self,
        x: &NodeId,
        weight: &NodeId,
        bias: Option<&NodeId>,
        stride: usize,
        padding: PaddingMode,
        groups: usize,
    ) -> Result<NodeId> {
        self.tape
            .conv2d(*x, *weight, bias.copied(), stride, padding, groups)
    }
    fn maxpool2x2(&mut self, x: &NodeId) -> Result<NodeId> {
        self.tape.maxpool2x2(*x)
    }
    fn upsample2x(&mut self, x: &NodeId) -> NodeId {
        self.tape.upsample2x(*x)
    }
    fn concat_channels(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.tape.concat_channels(*a, *b)
    }
    fn relu(&mut self, x: &NodeId) -> NodeId {
        self.tape.relu(*x)
    }
    fn sigmoid(&mut self, x: &NodeId) -> NodeId {
        self.tape.sigmoid(*x)
    }
    fn add(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.tape.add(*a, *b)
    }
    fn sub(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.tape.sub(*a, *b)
    }
    fn mul(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.tape.mul(*a, *b)
    }
    fn div(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        self.tape.div(*a, *b)
    }
    fn scalar_mul(&mut self, x: &NodeId, k: f64) -> NodeId {
        self.tape.scalar_mul(*x, k)
    }
    fn scalar_add(&mut self, x: &NodeId, k: f64) -> NodeId {
        self.tape.scalar_add(*x, k)
    }
    fn abs(&mut self, x: &NodeId) -> NodeId {
        self.tape.abs(*x)
    }
    fn clamp(&mut self, x: &NodeId, lo: f64, hi: f64) -> NodeId {
        self.tape.clamp(*x, lo, hi)
    }
    fn global_avg_pool(&mut self, x: &NodeId) -> NodeId {
        self.tape.global_avg_pool(*x)
    }
    fn global_max_pool(&mut self, x: &NodeId) -> NodeId {
        self.tape.global_max_pool(*x)
    }
    fn mean_channels(&mut self, x: &NodeId) -> NodeId {
        self.tape.mean_channels(*x)
    }
    fn max_channels(&mut self, x: &NodeId) -> NodeId {
        self.tape.max_channels(*x)
    }
    fn diff_h(&mut self, x: &NodeId) -> Result<NodeId> {
        self.tape.diff_h(*x)
    }
    fn diff_v(&mut self, x: &NodeId) -> Result<NodeId> {
        self.tape.diff_v(*x)
    }
    fn mean_all(&mut self, x: &NodeId) -> NodeId {
        self.tape.mean_all(*x)
    }
    fn sum_all(&mut self, x: &NodeId) -> NodeId {
        self.tape.sum_all(*x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_tape_paths_agree_bitwise() {
        let x = Tensor::<f32>::from_fn(Shape::new(1, 2, 6, 6), |_, c, y, xx| {
            ((c * 36 + y * 6 + xx) as f32 * 0.013).sin()
        });
        let w = Tensor::<f32>::from_fn(Shape::new(3, 2, 3, 3), |n, c, y, xx| {
            ((n * 18 + c * 9 + y * 3 + xx) as f32 * 0.07).cos() * 0.2
        });

        let mut ev = EvalCtx::new();
        let xe = Ctx::<f32>::input(&mut ev, &x);
        let we = ev.param("w", &w);
        let ce = ev.conv2d(&xe, &we, None, 1, PaddingMode::ZeroSame, 1).unwrap();
        let re = ev.relu(&ce);
        let pe = ev.maxpool2x2(&re).unwrap();
        let ye = ev.mean_all(&pe);

        let mut tc = TapeCtx::<f32>::new();
        let xt = tc.input(&x);
        let wt = tc.param("w", &w);
        let ct = tc.conv2d(&xt, &wt, None, 1, PaddingMode::ZeroSame, 1).unwrap();
        let rt = tc.relu(&ct);
        let pt = tc.maxpool2x2(&rt).unwrap();
        let yt = tc.mean_all(&pt);

        assert_eq!(&ye, tc.tape.value(yt));
    }

    #[test]
    fn tape_param_inserted_once() {
        let w = Tensor::<f32>::full(Shape::new(1, 1, 1, 1), 2.0);
        let mut tc = TapeCtx::<f32>::new();
        let a = tc.param("w", &w);
        let b = tc.param("w", &w);
        assert_eq!(a, b);
        assert_eq!(tc.tape.len(), 1);
    }
}
