//! Analytic complexity accounting (parameters, MACs, FLOPs) and a wall-clock
//! benchmark harness.
//!
//! Conventions: conv MACs = h_out * w_out * c_out * (c_in/groups) * k^2;
//! pointwise attention MLPs count the same way; elementwise ops, pooling and
//! interpolation count zero. FLOPs are reported as exactly 2 x MACs. GMACs
//! use decimal giga (1e9).

use std::time::Instant;

use crate::context::{Ctx, EvalCtx};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::ops::PaddingMode;
use crate::rng::Prng;
use crate::tensor::{Element, Shape, Tensor};

/// Cost of one layer at a given input resolution.
#[derive(Debug, Clone)]
pub struct LayerCost {
    pub path: String,
    pub params: usize,
    pub macs: u64,
}

/// Whole-model complexity at one input resolution.
#[derive(Debug, Clone)]
pub struct ComplexityReport {
    /// Resolution the MACs were counted at (after padding to multiples of 4).
    pub h: usize,
    pub w: usize,
    pub rows: Vec<LayerCost>,
    pub total_params: usize,
    pub total_macs: u64,
}

impl ComplexityReport {
    pub fn total_flops(&self) -> u64 {
        2 * self.total_macs
    }

    pub fn gmacs(&self) -> f64 {
        self.total_macs as f64 / 1e9
    }

    pub fn gflops(&self) -> f64 {
        self.total_flops() as f64 / 1e9
    }
}

/// Round a dimension up to the next multiple of 4 (the forward contract).
pub fn pad_dim(d: usize) -> usize {
    d.div_ceil(4) * 4
}

/// Exact scalar count of all weights and biases.
pub fn count_params<E: Element>(model: &Model<E>) -> usize {
    model.param_count()
}

/// Analytic per-layer MACs at the given input resolution.
pub fn count_macs<E: Element>(model: &Model<E>, h: usize, w: usize) -> ComplexityReport {
    let (h, w) = (pad_dim(h), pad_dim(w));
    let mut rows = Vec::new();
    let mut total_macs = 0u64;
    let mut total_params = 0usize;
    for u in model.conv_uses(h, w) {
        let macs = u.macs();
        total_macs += macs;
        total_params += u.params;
        rows.push(LayerCost {
            path: u.path,
            params: u.params,
            macs,
        });
    }
    ComplexityReport {
        h,
        w,
        rows,
        total_params,
        total_macs,
    }
}

/// FLOPs at each requested resolution (2 x MACs, resolutions padded to
/// multiples of 4 first).
pub fn flops_table<E: Element>(
    model: &Model<E>,
    resolutions: &[(usize, usize)],
) -> Vec<(usize, usize, f64)> {
    resolutions
        .iter()
        .map(|&(h, w)| {
            let r = count_macs(model, h, w);
            (r.h, r.w, r.gflops())
        })
        .collect()
}

/// Format a giga count with three significant digits.
pub fn format_giga(value: f64) -> String {
    if value == 0.0 {
        return "0.00".to_string();
    }
    let digits = value.abs().log10().floor() as i32;
    let decimals = (2 - digits).max(0) as usize;
    format!("{value:.decimals$}")
}

/// Result of a wall-clock forward benchmark.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub h: usize,
    pub w: usize,
    pub warmup: usize,
    /// Per-iteration wall times, warmups excluded.
    pub times_s: Vec<f64>,
    pub mean_s: f64,
    pub min_s: f64,
    pub threads: usize,
    pub gflops: f64,
}

/// Conservative estimate of forward-pass activation memory: every conv output
/// plus the input, f32, doubled for the producer/consumer pair alive at once.
pub fn activation_estimate_bytes<E: Element>(model: &Model<E>, h: usize, w: usize) -> u64 {
    let (h, w) = (pad_dim(h), pad_dim(w));
    let mut bytes = (3 * h * w * 4) as u64;
    for u in model.conv_uses(h, w) {
        bytes += (u.h_out * u.w_out * u.c_out * 4) as u64;
    }
    2 * bytes
}

/// Time `iters` forward passes at the given resolution on a deterministic
/// input, after `warmup` untimed passes. Refuses to run when the activation
/// estimate exceeds `mem_budget_mb`.
pub fn benchmark(
    model: &Model<f32>,
    h: usize,
    w: usize,
    iters: usize,
    warmup: usize,
    mem_budget_mb: u64,
) -> Result<BenchResult> {
    if iters < 5 {
        return Err(Error::arg("benchmark", format!("iters {iters} must be >= 5")));
    }
    if warmup < 2 {
        return Err(Error::arg("benchmark", format!("warmup {warmup} must be >= 2")));
    }
    let needed_mb = activation_estimate_bytes(model, h, w) / (1024 * 1024);
    if needed_mb > mem_budget_mb {
        return Err(Error::OutOfMemory {
            h,
            w,
            needed_mb,
            budget_mb: mem_budget_mb,
        });
    }
    let mut rng = Prng::seed(0x1bench);
    let mut input = Tensor::<f32>::zeros(Shape::new(1, 3, h, w));
    for v in input.as_mut_slice() {
        *v = rng.uniform() as f32;
    }
    for _ in 0..warmup {
        let _ = model.forward(&input)?;
    }
    let mut times = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t0 = Instant::now();
        let out = model.forward(&input)?;
        times.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(&out);
    }
    let mean_s = times.iter().sum::<f64>() / times.len() as f64;
    let min_s = times.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(BenchResult {
        h,
        w,
        warmup,
        times_s: times,
        mean_s,
        min_s,
        threads: rayon::current_num_threads(),
        gflops: count_macs(model, h, w).gflops(),
    })
}

/// Text table over benchmark rows: FLOPs, resolution, mean runtime.
pub fn render_bench_table(rows: &[BenchResult]) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:>10}  {:>12}  {:>12}  {:>12}  {:>6}\n",
        "FLOPs (G)", "Resolution", "mean (s)", "min (s)", "iters"
    ));
    for r in rows {
        s.push_str(&format!(
            "{:>10}  {:>12}  {:>12.4}  {:>12.4}  {:>6}\n",
            format_giga(r.gflops),
            format!("{}x{}", r.h, r.w),
            r.mean_s,
            r.min_s,
            r.times_s.len()
        ));
    }
    s
}

/// Instrumented evaluation context: convolutions run through a dense
/// reference loop that increments a counter per multiply-accumulate (padding
/// taps included, matching the analytic formula). Everything else delegates
/// to the normal ops.
pub struct CountingCtx {
    inner: EvalCtx,
    pub macs: u64,
}

impl CountingCtx {
    pub fn new() -> Self {
        CountingCtx {
            inner: EvalCtx::new(),
            macs: 0,
        }
    }
}

impl Default for CountingCtx {
    fn default() -> Self {
        Self::new()
    }
}

fn counting_conv2d(
    x: &Tensor<f32>,
    weight: &Tensor<f32>,
    bias: Option<&Tensor<f32>>,
    stride: usize,
    padding: PaddingMode,
    groups: usize,
    macs: &mut u64,
) -> Result<Tensor<f32>> {
    let g = crate::ops::conv2d_geometry(x.shape(), weight.shape(), stride, padding, groups)?;
    let s = x.shape();
    let ws = weight.shape();
    let mut out = Tensor::<f32>::zeros(Shape::new(s.n, ws.n, g.h_out, g.w_out));
    for n in 0..s.n {
        for co in 0..ws.n {
            let gi = co / g.cout_per_group;
            for oh in 0..g.h_out {
                for ow in 0..g.w_out {
                    let mut acc = bias.map(|b| b.as_slice()[co]).unwrap_or(0.0);
                    for cig in 0..g.cin_per_group {
                        let ci = gi * g.cin_per_group + cig;
                        for kh in 0..g.k {
                            for kw in 0..g.k {
                                let ih = (oh * stride + kh) as isize - g.pad as isize;
                                let iw = (ow * stride + kw) as isize - g.pad as isize;
                                let v = if ih < 0
                                    || iw < 0
                                    || ih >= s.h as isize
                                    || iw >= s.w as isize
                                {
                                    0.0
                                } else {
                                    x.at(n, ci, ih as usize, iw as usize)
                                };
                                acc += v * weight.at(co, cig, kh, kw);
                                *macs += 1;
                            }
                        }
                    }
                    out.set(n, co, oh, ow, acc);
                }
            }
        }
    }
    Ok(out)
}

impl Ctx<f32> for CountingCtx {
    type V = Tensor<f32>;

    fn input(&mut self, t: &Tensor<f32>) -> Tensor<f32> {
        Ctx::<f32>::input(&mut self.inner, t)
    }
    fn param(&mut self, path: &str, t: &Tensor<f32>) -> Tensor<f32> {
        self.inner.param(path, t)
    }
    fn constant(&mut self, t: &Tensor<f32>) -> Tensor<f32> {
        Ctx::<f32>::constant(&mut self.inner, t)
    }
    fn shape(&self, v: &Tensor<f32>) -> Shape {
        v.shape()
    }

    fn conv2d(
        &mut self,
        x: &Tensor<f32>,
        weight: &Tensor<f32>,
        bias: Option<&Tensor<f32>>,
        stride: usize,
        padding: PaddingMode,
        groups: usize,
    ) -> Result<Tensor<f32>> {
        counting_conv2d(x, weight, bias, stride, padding, groups, &mut self.macs)
    }
    fn maxpool2x2(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.maxpool2x2(x)
    }
    fn upsample2x(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.upsample2x(x)
    }
    fn concat_channels(&mut self, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.concat_channels(a, b)
    }
    fn relu(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.relu(x)
    }
    fn sigmoid(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.sigmoid(x)
    }
    fn add(&mut self, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.add(a, b)
    }
    fn sub(&mut self, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.sub(a, b)
    }
    fn mul(&mut self, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.mul(a, b)
    }
    fn div(&mut self, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.div(a, b)
    }
    fn scalar_mul(&mut self, x: &Tensor<f32>, k: f64) -> Tensor<f32> {
        self.inner.scalar_mul(x, k)
    }
    fn scalar_add(&mut self, x: &Tensor<f32>, k: f64) -> Tensor<f32> {
        self.inner.scalar_add(x, k)
    }
    fn abs(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.abs(x)
    }
    fn clamp(&mut self, x: &Tensor<f32>, lo: f64, hi: f64) -> Tensor<f32> {
        self.inner.clamp(x, lo, hi)
    }
    fn global_avg_pool(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.global_avg_pool(x)
    }
    fn global_max_pool(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.global_max_pool(x)
    }
    fn mean_channels(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.mean_channels(x)
    }
    fn max_channels(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.max_channels(x)
    }
    fn diff_h(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.diff_h(x)
    }
    fn diff_v(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.inner.diff_v(x)
    }
    fn mean_all(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.mean_all(x)
    }
    fn sum_all(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.inner.sum_all(x)
    }
}

/// Count MACs by actually executing an instrumented forward pass.
pub fn instrumented_macs(model: &Model<f32>, h: usize, w: usize) -> Result<u64> {
    let mut ctx = CountingCtx::new();
    let input = Tensor::<f32>::full(Shape::new(1, 3, pad_dim(h), pad_dim(w)), 0.5);
    let x = ctx.input(&input);
    let _ = model.forward_on(&mut ctx, &x)?;
    Ok(ctx.macs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LpienetConfig;

    #[test]
    fn single_conv_hand_arithmetic() {
        // A 3x3 conv 3 -> 16 with bias holds 3*16*9 + 16 = 448 scalars.
        let model = Model::<f32>::build(LpienetConfig::default(), 0).unwrap();
        let stem = &model.conv_uses(256, 256)[0];
        assert_eq!(stem.path, "stem");
        assert_eq!(stem.params, 448);
        // Pointwise 16 -> 32 at 256x256 would cost 256*256*32*16 MACs.
        assert_eq!(256u64 * 256 * 32 * 16, 33_554_432);
    }

    #[test]
    fn macs_proportional_to_pixels_up_to_attention_constant() {
        let model = Model::<f32>::build(LpienetConfig::default(), 0).unwrap();
        let a = count_macs(&model, 64, 64).total_macs as f64;
        let b = count_macs(&model, 128, 128).total_macs as f64;
        let rel = (b - 4.0 * a).abs() / b;
        assert!(rel < 1e-4, "rel {rel}");
    }

    #[test]
    fn params_are_resolution_independent() {
        let model = Model::<f32>::build(LpienetConfig::default(), 0).unwrap();
        let a = count_macs(&model, 64, 64);
        let b = count_macs(&model, 256, 256);
        assert_eq!(a.total_params, b.total_params);
        assert_eq!(a.total_params, count_params(&model));
    }

    #[test]
    fn analytic_count_matches_instrumented_run() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 0).unwrap();
        let analytic = count_macs(&model, 16, 16).total_macs;
        let measured = instrumented_macs(&model, 16, 16).unwrap();
        assert_eq!(analytic, measured);
    }

    #[test]
    fn flops_is_twice_macs() {
        let model = Model::<f32>::build(LpienetConfig::default(), 0).unwrap();
        let r = count_macs(&model, 256, 256);
        assert_eq!(r.total_flops(), 2 * r.total_macs);
        let table = flops_table(&model, &[(256, 256)]);
        assert_eq!(table[0].2, r.gflops());
    }

    #[test]
    fn bench_memory_guard_trips() {
        let model = Model::<f32>::build(LpienetConfig::default(), 0).unwrap();
        match benchmark(&model, 4096, 4096, 5, 2, 1) {
            Err(Error::OutOfMemory { .. }) => {}
            other => panic!("expected out-of-memory report, got {other:?}"),
        }
    }

    #[test]
    fn format_giga_three_significant_digits() {
        assert_eq!(format_giga(1.4782), "1.48");
        assert_eq!(format_giga(23.95), "24.0");
        assert_eq!(format_giga(310.4), "310");
        assert_eq!(format_giga(0.0775), "0.0775");
    }
}
