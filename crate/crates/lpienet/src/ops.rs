//! Forward tensor operations and their backward rules.
//!
//! Every operation the network needs lives here as a pure function over
//! [`Tensor`] values; the autodiff tape and the plain inference path both call
//! into these. Reductions use a fixed accumulation order per output element,
//! so results are identical no matter how many threads run the outer loops.

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};
use rayon::prelude::*;

/// Padding behaviour for [`conv2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingMode {
    /// Zero padding of (k-1)/2 on each side; stride-1 output keeps h, w.
    ZeroSame,
    /// No padding; output shrinks by k-1.
    Valid,
}

/// Shape bookkeeping of one conv2d call.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub h_out: usize,
    pub w_out: usize,
    pub pad: usize,
    pub k: usize,
    pub cin_per_group: usize,
    pub cout_per_group: usize,
}

pub fn conv2d_geometry(
    input: Shape,
    weight: Shape,
    stride: usize,
    padding: PaddingMode,
    groups: usize,
) -> Result<ConvGeometry> {
    let k = weight.h;
    if weight.w != k {
        return Err(Error::arg(
            "conv2d",
            format!("kernel must be square, got {}x{}", weight.h, weight.w),
        ));
    }
    if k % 2 == 0 {
        return Err(Error::arg("conv2d", format!("kernel size {k} must be odd")));
    }
    if stride != 1 && stride != 2 {
        return Err(Error::arg("conv2d", format!("stride {stride} not in {{1, 2}}")));
    }
    if groups == 0 || input.c % groups != 0 {
        return Err(Error::shape(
            "conv2d",
            format!("input channels {} not divisible by groups {}", input.c, groups),
        ));
    }
    if weight.n % groups != 0 {
        return Err(Error::shape(
            "conv2d",
            format!("output channels {} not divisible by groups {}", weight.n, groups),
        ));
    }
    if weight.c != input.c / groups {
        return Err(Error::shape(
            "conv2d",
            format!(
                "weight expects {} input channels per group, input has {} ({} groups)",
                weight.c,
                input.c / groups,
                groups
            ),
        ));
    }
    let pad = match padding {
        PaddingMode::ZeroSame => (k - 1) / 2,
        PaddingMode::Valid => 0,
    };
    let h_eff = input.h + 2 * pad;
    let w_eff = input.w + 2 * pad;
    if h_eff < k || w_eff < k {
        return Err(Error::EmptySpatialOutput {
            op: "conv2d",
            h: input.h,
            w: input.w,
            k,
        });
    }
    let h_out = (h_eff - k) / stride + 1;
    let w_out = (w_eff - k) / stride + 1;
    if h_out == 0 || w_out == 0 {
        return Err(Error::EmptySpatialOutput {
            op: "conv2d",
            h: input.h,
            w: input.w,
            k,
        });
    }
    Ok(ConvGeometry {
        h_out,
        w_out,
        pad,
        k,
        cin_per_group: input.c / groups,
        cout_per_group: weight.n / groups,
    })
}

fn check_bias<E: Element>(bias: Option<&Tensor<E>>, c_out: usize) -> Result<()> {
    if let Some(b) = bias {
        let s = b.shape();
        if s.len() != c_out || s.c != c_out {
            return Err(Error::shape(
                "conv2d",
                format!("bias shape {} does not hold {} per-channel values", s, c_out),
            ));
        }
    }
    Ok(())
}

/// 2-D convolution (cross-correlation, the CNN convention).
///
/// `weight` has shape (c_out, c_in/groups, k, k); `bias` is (1, c_out, 1, 1).
/// `groups == c_in == c_out` gives a depthwise convolution, `k == 1` with
/// `groups == 1` a pointwise one.
pub fn conv2d<E: Element>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: usize,
    padding: PaddingMode,
    groups: usize,
) -> Result<Tensor<E>> {
    let ishape = input.shape();
    let wshape = weight.shape();
    let g = conv2d_geometry(ishape, wshape, stride, padding, groups)?;
    check_bias(bias, wshape.n)?;

    let out_shape = Shape::new(ishape.n, wshape.n, g.h_out, g.w_out);
    let mut out = Tensor::zeros(out_shape);
    let hw_out = g.h_out * g.w_out;
    let work_per_plane = hw_out * g.cin_per_group * g.k * g.k;

    let run_plane = |plane_idx: usize, out_plane: &mut [E]| {
        let n = plane_idx / wshape.n;
        let co = plane_idx % wshape.n;
        let gi = co / g.cout_per_group;
        if let Some(b) = bias {
            let bv = b.as_slice()[co];
            out_plane.iter_mut().for_each(|v| *v = bv);
        }
        for cig in 0..g.cin_per_group {
            let ci = gi * g.cin_per_group + cig;
            let in_plane = input.plane(n, ci);
            let w_base = ((co * g.cin_per_group) + cig) * g.k * g.k;
            let w_taps = &weight.as_slice()[w_base..w_base + g.k * g.k];
            accumulate_taps(
                out_plane, in_plane, w_taps, ishape.h, ishape.w, g.h_out, g.w_out, g.k, g.pad,
                stride,
            );
        }
    };

    let planes = ishape.n * wshape.n;
    if planes > 1 && work_per_plane * planes > 250_000 {
        out.as_mut_slice()
            .par_chunks_mut(hw_out)
            .enumerate()
            .for_each(|(i, p)| run_plane(i, p));
    } else {
        for (i, p) in out.as_mut_slice().chunks_mut(hw_out).enumerate() {
            run_plane(i, p);
        }
    }
    Ok(out)
}

/// Accumulate one (input plane, k x k tap set) into an output plane.
/// Tap order (kh, kw) then rows is fixed; it defines the reduction order.
#[allow(clippy::too_many_arguments)]
fn accumulate_taps<E: Element>(
    out_plane: &mut [E],
    in_plane: &[E],
    w_taps: &[E],
    h: usize,
    w: usize,
    h_out: usize,
    w_out: usize,
    k: usize,
    pad: usize,
    stride: usize,
) {
    for kh in 0..k {
        for kw in 0..k {
            let wv = w_taps[kh * k + kw];
            for oh in 0..h_out {
                let ih = (oh * stride + kh) as isize - pad as isize;
                if ih < 0 || ih >= h as isize {
                    continue;
                }
                let in_row = &in_plane[ih as usize * w..(ih as usize + 1) * w];
                let out_row = &mut out_plane[oh * w_out..(oh + 1) * w_out];
                // Valid ow range: 0 <= ow*stride + kw - pad < w
                let lo_num = pad as isize - kw as isize;
                let ow_start = if lo_num > 0 {
                    ((lo_num as usize) + stride - 1) / stride
                } else {
                    0
                };
                let hi_num = w as isize - 1 + pad as isize - kw as isize;
                if hi_num < 0 {
                    continue;
                }
                let ow_end = ((hi_num as usize) / stride + 1).min(w_out);
                if ow_start >= ow_end {
                    continue;
                }
                if stride == 1 {
                    let base = (ow_start as isize + kw as isize - pad as isize) as usize;
                    for (o, i) in out_row[ow_start..ow_end]
                        .iter_mut()
                        .zip(in_row[base..base + (ow_end - ow_start)].iter())
                    {
                        *o += wv * *i;
                    }
                } else {
                    for ow in ow_start..ow_end {
                        let iw = (ow * stride + kw) as isize - pad as isize;
                        out_row[ow] += wv * in_row[iw as usize];
                    }
                }
            }
        }
    }
}

/// Gradient of [`conv2d`] with respect to its input.
pub fn conv2d_backward_input<E: Element>(
    grad_out: &Tensor<E>,
    input_shape: Shape,
    weight: &Tensor<E>,
    stride: usize,
    padding: PaddingMode,
    groups: usize,
) -> Result<Tensor<E>> {
    let wshape = weight.shape();
    let g = conv2d_geometry(input_shape, wshape, stride, padding, groups)?;
    let mut grad_in = Tensor::zeros(input_shape);
    let hw_in = input_shape.h * input_shape.w;

    let run_plane = |plane_idx: usize, gin_plane: &mut [E]| {
        let n = plane_idx / input_shape.c;
        let ci = plane_idx % input_shape.c;
        let gi = ci / g.cin_per_group;
        let cig = ci % g.cin_per_group;
        for co in gi * g.cout_per_group..(gi + 1) * g.cout_per_group {
            let gout_plane = grad_out.plane(n, co);
            let w_base = ((co * g.cin_per_group) + cig) * g.k * g.k;
            let w_taps = &weight.as_slice()[w_base..w_base + g.k * g.k];
            for kh in 0..g.k {
                for kw in 0..g.k {
                    let wv = w_taps[kh * g.k + kw];
                    for ih in 0..input_shape.h {
                        let oh_num = ih as isize + g.pad as isize - kh as isize;
                        if oh_num < 0 {
                            continue;
                        }
                        let oh_num = oh_num as usize;
                        if oh_num % stride != 0 {
                            continue;
                        }
                        let oh = oh_num / stride;
                        if oh >= g.h_out {
                            continue;
                        }
                        let gout_row = &gout_plane[oh * g.w_out..(oh + 1) * g.w_out];
                        let gin_row =
                            &mut gin_plane[ih * input_shape.w..(ih + 1) * input_shape.w];
                        for iw in 0..input_shape.w {
                            let ow_num = iw as isize + g.pad as isize - kw as isize;
                            if ow_num < 0 {
                                continue;
                            }
                            let ow_num = ow_num as usize;
                            if ow_num % stride != 0 {
                                continue;
                            }
                            let ow = ow_num / stride;
                            if ow >= g.w_out {
                                continue;
                            }
                            gin_row[iw] += wv * gout_row[ow];
                        }
                    }
                }
            }
        }
    };

    let planes = input_shape.n * input_shape.c;
    let work = grad_out.len() * g.cin_per_group * g.k * g.k;
    if planes > 1 && work > 250_000 {
        grad_in
            .as_mut_slice()
            .par_chunks_mut(hw_in)
            .enumerate()
            .for_each(|(i, p)| run_plane(i, p));
    } else {
        for (i, p) in grad_in.as_mut_slice().chunks_mut(hw_in).enumerate() {
            run_plane(i, p);
        }
    }
    Ok(grad_in)
}

/// Gradient of [`conv2d`] with respect to its weight.
pub fn conv2d_backward_weight<E: Element>(
    grad_out: &Tensor<E>,
    input: &Tensor<E>,
    weight_shape: Shape,
    stride: usize,
    padding: PaddingMode,
    groups: usize,
) -> Result<Tensor<E>> {
    let ishape = input.shape();
    let g = conv2d_geometry(ishape, weight_shape, stride, padding, groups)?;
    let mut grad_w = Tensor::zeros(weight_shape);
    let per_co = g.cin_per_group * g.k * g.k;

    let run_co = |co: usize, gw_co: &mut [E]| {
        let gi = co / g.cout_per_group;
        for cig in 0..g.cin_per_group {
            let ci = gi * g.cin_per_group + cig;
            for kh in 0..g.k {
                for kw in 0..g.k {
                    let mut acc = E::ZERO;
                    for n in 0..ishape.n {
                        let gout_plane = grad_out.plane(n, co);
                        let in_plane = input.plane(n, ci);
                        for oh in 0..g.h_out {
                            let ih = (oh * stride + kh) as isize - g.pad as isize;
                            if ih < 0 || ih >= ishape.h as isize {
                                continue;
                            }
                            let in_row =
                                &in_plane[ih as usize * ishape.w..(ih as usize + 1) * ishape.w];
                            let gout_row = &gout_plane[oh * g.w_out..(oh + 1) * g.w_out];
                            for ow in 0..g.w_out {
                                let iw = (ow * stride + kw) as isize - g.pad as isize;
                                if iw < 0 || iw >= ishape.w as isize {
                                    continue;
                                }
                                acc += gout_row[ow] * in_row[iw as usize];
                            }
                        }
                    }
                    gw_co[cig * g.k * g.k + kh * g.k + kw] = acc;
                }
            }
        }
    };

    if weight_shape.n > 1 && grad_out.len() * per_co > 250_000 {
        grad_w
            .as_mut_slice()
            .par_chunks_mut(per_co)
            .enumerate()
            .for_each(|(co, p)| run_co(co, p));
    } else {
        for (co, p) in grad_w.as_mut_slice().chunks_mut(per_co).enumerate() {
            run_co(co, p);
        }
    }
    Ok(grad_w)
}

/// Gradient of [`conv2d`] with respect to its bias: per-channel sum of grad_out.
pub fn conv2d_backward_bias<E: Element>(grad_out: &Tensor<E>) -> Tensor<E> {
    let s = grad_out.shape();
    let mut grad_b = Tensor::zeros(Shape::new(1, s.c, 1, 1));
    for n in 0..s.n {
        for c in 0..s.c {
            let mut acc = E::ZERO;
            for v in grad_out.plane(n, c) {
                acc += *v;
            }
            grad_b.as_mut_slice()[c] += acc;
        }
    }
    grad_b
}

/// 2x2 max pooling with stride 2. Requires even h and w.
/// Returns the pooled tensor and the argmax index (within the input plane)
/// per output element; ties resolve to the first occurrence in row-major
/// window order.
pub fn maxpool2x2<E: Element>(input: &Tensor<E>) -> Result<(Tensor<E>, Vec<u32>)> {
    let s = input.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::shape(
            "maxpool2x2",
            format!("spatial dims must be even, got {}x{}", s.h, s.w),
        ));
    }
    let out_shape = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let mut out = Tensor::zeros(out_shape);
    let mut argmax = vec![0u32; out_shape.len()];
    let mut oi = 0;
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = input.plane(n, c);
            for oh in 0..out_shape.h {
                for ow in 0..out_shape.w {
                    let mut best_idx = (2 * oh) * s.w + 2 * ow;
                    let mut best = plane[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = (2 * oh + dy) * s.w + 2 * ow + dx;
                        if plane[idx] > best {
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                    out.as_mut_slice()[oi] = best;
                    argmax[oi] = best_idx as u32;
                    oi += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Scatter pooled gradients back to the argmax positions.
pub fn maxpool2x2_backward<E: Element>(
    grad_out: &Tensor<E>,
    argmax: &[u32],
    input_shape: Shape,
) -> Tensor<E> {
    let mut grad_in = Tensor::zeros(input_shape);
    let hw_in = input_shape.h * input_shape.w;
    let os = grad_out.shape();
    let hw_out = os.h * os.w;
    for p in 0..os.n * os.c {
        let gin = &mut grad_in.as_mut_slice()[p * hw_in..(p + 1) * hw_in];
        let gout = &grad_out.as_slice()[p * hw_out..(p + 1) * hw_out];
        let am = &argmax[p * hw_out..(p + 1) * hw_out];
        for (g, &idx) in gout.iter().zip(am.iter()) {
            gin[idx as usize] += *g;
        }
    }
    grad_in
}

/// Source-coordinate table for one axis of the 2x bilinear upsample
/// (align-corners = false, edge clamped): src = (dst + 0.5) / 2 - 0.5.
fn upsample_axis(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    (0..len_out)
        .map(|d| {
            let src = (d as f64 + 0.5) / 2.0 - 0.5;
            let x0 = src.floor();
            let frac = src - x0;
            let x0 = x0 as isize;
            let c0 = x0.clamp(0, len_in as isize - 1) as usize;
            let c1 = (x0 + 1).clamp(0, len_in as isize - 1) as usize;
            (c0, c1, frac)
        })
        .collect()
}

/// Bilinear 2x upsampling, align-corners = false with edge clamping.
pub fn bilinear_upsample2x<E: Element>(input: &Tensor<E>) -> Tensor<E> {
    let s = input.shape();
    let out_shape = Shape::new(s.n, s.c, s.h * 2, s.w * 2);
    let ys = upsample_axis(s.h, out_shape.h);
    let xs = upsample_axis(s.w, out_shape.w);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = input.plane(n, c);
            let out_plane = out.plane_mut(n, c);
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                let row0 = &plane[y0 * s.w..(y0 + 1) * s.w];
                let row1 = &plane[y1 * s.w..(y1 + 1) * s.w];
                let orow = &mut out_plane[oy * out_shape.w..(oy + 1) * out_shape.w];
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let top = row0[x0].to_f64() * (1.0 - fx) + row0[x1].to_f64() * fx;
                    let bot = row1[x0].to_f64() * (1.0 - fx) + row1[x1].to_f64() * fx;
                    orow[ox] = E::from_f64(top * (1.0 - fy) + bot * fy);
                }
            }
        }
    }
    out
}

/// Transpose of [`bilinear_upsample2x`]: scatter output gradients through the
/// same interpolation weights.
pub fn bilinear_upsample2x_backward<E: Element>(
    grad_out: &Tensor<E>,
    input_shape: Shape,
) -> Tensor<E> {
    let os = grad_out.shape();
    let ys = upsample_axis(input_shape.h, os.h);
    let xs = upsample_axis(input_shape.w, os.w);
    let mut grad_in = Tensor::zeros(input_shape);
    for n in 0..input_shape.n {
        for c in 0..input_shape.c {
            let gout_plane = grad_out.plane(n, c);
            let gin_plane = grad_in.plane_mut(n, c);
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                let grow = &gout_plane[oy * os.w..(oy + 1) * os.w];
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let g = grow[ox].to_f64();
                    gin_plane[y0 * input_shape.w + x0] +=
                        E::from_f64(g * (1.0 - fy) * (1.0 - fx));
                    gin_plane[y0 * input_shape.w + x1] += E::from_f64(g * (1.0 - fy) * fx);
                    gin_plane[y1 * input_shape.w + x0] += E::from_f64(g * fy * (1.0 - fx));
                    gin_plane[y1 * input_shape.w + x1] += E::from_f64(g * fy * fx);
                }
            }
        }
    }
    grad_in
}

/// Concatenate along the channel axis; `a`'s channels come first.
pub fn concat_channels<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return Err(Error::shape(
            "concat_channels",
            format!("non-channel dims differ: {} vs {}", sa, sb),
        ));
    }
    let out_shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
    let mut out = Tensor::zeros(out_shape);
    let hw = sa.h * sa.w;
    for n in 0..sa.n {
        for c in 0..sa.c {
            out.plane_mut(n, c).copy_from_slice(a.plane(n, c));
        }
        for c in 0..sb.c {
            out.plane_mut(n, sa.c + c).copy_from_slice(b.plane(n, c));
        }
    }
    debug_assert_eq!(out.len(), (sa.c + sb.c) * sa.n * hw);
    Ok(out)
}

/// Split a channel-concat gradient back into the two parts.
pub fn concat_channels_backward<E: Element>(
    grad_out: &Tensor<E>,
    c_a: usize,
) -> (Tensor<E>, Tensor<E>) {
    let s = grad_out.shape();
    let c_b = s.c - c_a;
    let mut ga = Tensor::zeros(Shape::new(s.n, c_a, s.h, s.w));
    let mut gb = Tensor::zeros(Shape::new(s.n, c_b, s.h, s.w));
    for n in 0..s.n {
        for c in 0..c_a {
            ga.plane_mut(n, c).copy_from_slice(grad_out.plane(n, c));
        }
        for c in 0..c_b {
            gb.plane_mut(n, c).copy_from_slice(grad_out.plane(n, c_a + c));
        }
    }
    (ga, gb)
}

pub fn relu<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    x.map(|v| v.max_e(E::ZERO))
}

pub fn relu_backward<E: Element>(grad_out: &Tensor<E>, input: &Tensor<E>) -> Tensor<E> {
    let mut g = grad_out.clone();
    for (gv, iv) in g.as_mut_slice().iter_mut().zip(input.as_slice()) {
        if !(*iv > E::ZERO) {
            *gv = E::ZERO;
        }
    }
    g
}

pub fn sigmoid<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    x.map(|v| {
        // Split by sign for numerical stability at large |v|.
        if v.to_f64() >= 0.0 {
            let e = (-v).exp();
            E::ONE / (E::ONE + e)
        } else {
            let e = v.exp();
            e / (E::ONE + e)
        }
    })
}

pub fn sigmoid_backward<E: Element>(grad_out: &Tensor<E>, output: &Tensor<E>) -> Tensor<E> {
    let mut g = grad_out.clone();
    for (gv, y) in g.as_mut_slice().iter_mut().zip(output.as_slice()) {
        *gv = *gv * *y * (E::ONE - *y);
    }
    g
}

/// Numpy-style broadcast of two 4-D shapes: each dim must match or be 1.
pub fn broadcast_shape(op: &'static str, a: Shape, b: Shape) -> Result<Shape> {
    let dim = |x: usize, y: usize| -> Result<usize> {
        if x == y || y == 1 {
            Ok(x)
        } else if x == 1 {
            Ok(y)
        } else {
            Err(Error::shape(
                op,
                format!("incompatible broadcast: {} vs {}", a, b),
            ))
        }
    };
    Ok(Shape::new(
        dim(a.n, b.n)?,
        dim(a.c, b.c)?,
        dim(a.h, b.h)?,
        dim(a.w, b.w)?,
    ))
}

fn binary_broadcast<E: Element>(
    op: &'static str,
    a: &Tensor<E>,
    b: &Tensor<E>,
    f: impl Fn(E, E) -> E,
) -> Result<Tensor<E>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa == sb {
        let mut out = a.clone();
        for (o, bv) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *o = f(*o, *bv);
        }
        return Ok(out);
    }
    let os = broadcast_shape(op, sa, sb)?;
    let pick = |s: Shape, n: usize, c: usize, y: usize, x: usize| {
        (
            if s.n == 1 { 0 } else { n },
            if s.c == 1 { 0 } else { c },
            if s.h == 1 { 0 } else { y },
            if s.w == 1 { 0 } else { x },
        )
    };
    Ok(Tensor::from_fn(os, |n, c, y, x| {
        let (an, ac, ay, ax) = pick(sa, n, c, y, x);
        let (bn, bc, by, bx) = pick(sb, n, c, y, x);
        f(a.at(an, ac, ay, ax), b.at(bn, bc, by, bx))
    }))
}

/// Sum `grad` down to `target` along every broadcast (size-1) dim.
pub fn reduce_to_shape<E: Element>(grad: &Tensor<E>, target: Shape) -> Tensor<E> {
    if grad.shape() == target {
        return grad.clone();
    }
    let gs = grad.shape();
    let mut out = Tensor::zeros(target);
    for n in 0..gs.n {
        for c in 0..gs.c {
            for y in 0..gs.h {
                for x in 0..gs.w {
                    let tn = if target.n == 1 { 0 } else { n };
                    let tc = if target.c == 1 { 0 } else { c };
                    let ty = if target.h == 1 { 0 } else { y };
                    let tx = if target.w == 1 { 0 } else { x };
                    let i = out.idx(tn, tc, ty, tx);
                    out.as_mut_slice()[i] += grad.at(n, c, y, x);
                }
            }
        }
    }
    out
}

pub fn add<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    binary_broadcast("add", a, b, |x, y| x + y)
}

pub fn sub<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    binary_broadcast("sub", a, b, |x, y| x - y)
}

pub fn mul<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    binary_broadcast("mul", a, b, |x, y| x * y)
}

pub fn div<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    binary_broadcast("div", a, b, |x, y| x / y)
}

pub fn scalar_mul<E: Element>(x: &Tensor<E>, s: E) -> Tensor<E> {
    x.map(|v| v * s)
}

pub fn scalar_add<E: Element>(x: &Tensor<E>, s: E) -> Tensor<E> {
    x.map(|v| v + s)
}

pub fn abs<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    x.map(|v| v.abs())
}

pub fn abs_backward<E: Element>(grad_out: &Tensor<E>, input: &Tensor<E>) -> Tensor<E> {
    let mut g = grad_out.clone();
    for (gv, iv) in g.as_mut_slice().iter_mut().zip(input.as_slice()) {
        if *iv < E::ZERO {
            *gv = -*gv;
        } else if !(*iv > E::ZERO) {
            *gv = E::ZERO;
        }
    }
    g
}

pub fn clamp<E: Element>(x: &Tensor<E>, lo: E, hi: E) -> Tensor<E> {
    x.map(|v| v.max_e(lo).min_e(hi))
}

/// Clamp gradient: passes through strictly inside (lo, hi), zero elsewhere.
pub fn clamp_backward<E: Element>(
    grad_out: &Tensor<E>,
    input: &Tensor<E>,
    lo: E,
    hi: E,
) -> Tensor<E> {
    let mut g = grad_out.clone();
    for (gv, iv) in g.as_mut_slice().iter_mut().zip(input.as_slice()) {
        if !(*iv > lo) || !(*iv < hi) {
            *gv = E::ZERO;
        }
    }
    g
}

/// Mean over h and w, output (n, c, 1, 1).
pub fn global_avg_pool<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    let s = x.shape();
    let hw = E::from_f64((s.h * s.w) as f64);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    for n in 0..s.n {
        for c in 0..s.c {
            let mut acc = E::ZERO;
            for v in x.plane(n, c) {
                acc += *v;
            }
            let i = out.idx(n, c, 0, 0);
            out.as_mut_slice()[i] = acc / hw;
        }
    }
    out
}

pub fn global_avg_pool_backward<E: Element>(grad_out: &Tensor<E>, input_shape: Shape) -> Tensor<E> {
    let hw = E::from_f64((input_shape.h * input_shape.w) as f64);
    let mut g = Tensor::zeros(input_shape);
    for n in 0..input_shape.n {
        for c in 0..input_shape.c {
            let gv = grad_out.at(n, c, 0, 0) / hw;
            g.plane_mut(n, c).iter_mut().for_each(|v| *v = gv);
        }
    }
    g
}

/// Max over h and w, output (n, c, 1, 1) plus per-plane argmax (first occurrence).
pub fn global_max_pool<E: Element>(x: &Tensor<E>) -> (Tensor<E>, Vec<u32>) {
    let s = x.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    let mut argmax = vec![0u32; s.n * s.c];
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            let mut best = plane[0];
            let mut best_i = 0usize;
            for (i, v) in plane.iter().enumerate().skip(1) {
                if *v > best {
                    best = *v;
                    best_i = i;
                }
            }
            let oi = out.idx(n, c, 0, 0);
            out.as_mut_slice()[oi] = best;
            argmax[n * s.c + c] = best_i as u32;
        }
    }
    (out, argmax)
}

pub fn global_max_pool_backward<E: Element>(
    grad_out: &Tensor<E>,
    argmax: &[u32],
    input_shape: Shape,
) -> Tensor<E> {
    let mut g = Tensor::zeros(input_shape);
    for n in 0..input_shape.n {
        for c in 0..input_shape.c {
            let idx = argmax[n * input_shape.c + c] as usize;
            g.plane_mut(n, c)[idx] += grad_out.at(n, c, 0, 0);
        }
    }
    g
}

/// Mean over the channel axis, output (n, 1, h, w).
pub fn mean_channels<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    let s = x.shape();
    let cn = E::from_f64(s.c as f64);
    let mut out = Tensor::zeros(Shape::new(s.n, 1, s.h, s.w));
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            let out_plane = out.plane_mut(n, 0);
            for (o, v) in out_plane.iter_mut().zip(plane) {
                *o += *v;
            }
        }
        out.plane_mut(n, 0).iter_mut().for_each(|v| *v = *v / cn);
    }
    out
}

pub fn mean_channels_backward<E: Element>(grad_out: &Tensor<E>, input_shape: Shape) -> Tensor<E> {
    let cn = E::from_f64(input_shape.c as f64);
    let mut g = Tensor::zeros(input_shape);
    for n in 0..input_shape.n {
        for c in 0..input_shape.c {
            let gout = grad_out.plane(n, 0).to_vec();
            let gin = g.plane_mut(n, c);
            for (o, v) in gin.iter_mut().zip(gout) {
                *o = v / cn;
            }
        }
    }
    g
}

/// Max over the channel axis, output (n, 1, h, w) plus per-pixel channel argmax.
pub fn max_channels<E: Element>(x: &Tensor<E>) -> (Tensor<E>, Vec<u32>) {
    let s = x.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, 1, s.h, s.w));
    let hw = s.h * s.w;
    let mut argmax = vec![0u32; s.n * hw];
    for n in 0..s.n {
        out.plane_mut(n, 0).copy_from_slice(x.plane(n, 0));
        for c in 1..s.c {
            let plane = x.plane(n, c);
            let out_plane = out.plane_mut(n, 0);
            for i in 0..hw {
                if plane[i] > out_plane[i] {
                    out_plane[i] = plane[i];
                    argmax[n * hw + i] = c as u32;
                }
            }
        }
    }
    (out, argmax)
}

pub fn max_channels_backward<E: Element>(
    grad_out: &Tensor<E>,
    argmax: &[u32],
    input_shape: Shape,
) -> Tensor<E> {
    let mut g = Tensor::zeros(input_shape);
    let hw = input_shape.h * input_shape.w;
    for n in 0..input_shape.n {
        for i in 0..hw {
            let c = argmax[n * hw + i] as usize;
            g.plane_mut(n, c)[i] += grad_out.plane(n, 0)[i];
        }
    }
    g
}

/// Horizontal forward difference: out[..., x] = in[..., x+1] - in[..., x];
/// output width shrinks by one.
pub fn diff_h<E: Element>(t: &Tensor<E>) -> Result<Tensor<E>> {
    let s = t.shape();
    if s.w < 2 {
        return Err(Error::shape("diff_h", format!("width {} < 2", s.w)));
    }
    Ok(Tensor::from_fn(
        Shape::new(s.n, s.c, s.h, s.w - 1),
        |n, c, y, x| t.at(n, c, y, x + 1) - t.at(n, c, y, x),
    ))
}

pub fn diff_h_backward<E: Element>(grad_out: &Tensor<E>, input_shape: Shape) -> Tensor<E> {
    let mut g = Tensor::zeros(input_shape);
    let os = grad_out.shape();
    for n in 0..os.n {
        for c in 0..os.c {
            for y in 0..os.h {
                for x in 0..os.w {
                    let gv = grad_out.at(n, c, y, x);
                    let i1 = g.idx(n, c, y, x + 1);
                    g.as_mut_slice()[i1] += gv;
                    let i0 = g.idx(n, c, y, x);
                    g.as_mut_slice()[i0] += -gv;
                }
            }
        }
    }
    g
}

/// Vertical forward difference: out[..., y, :] = in[..., y+1, :] - in[..., y, :].
pub fn diff_v<E: Element>(t: &Tensor<E>) -> Result<Tensor<E>> {
    let s = t.shape();
    if s.h < 2 {
        return Err(Error::shape("diff_v", format!("height {} < 2", s.h)));
    }
    Ok(Tensor::from_fn(
        Shape::new(s.n, s.c, s.h - 1, s.w),
        |n, c, y, x| t.at(n, c, y + 1, x) - t.at(n, c, y, x),
    ))
}

pub fn diff_v_backward<E: Element>(grad_out: &Tensor<E>, input_shape: Shape) -> Tensor<E> {
    let mut g = Tensor::zeros(input_shape);
    let os = grad_out.shape();
    for n in 0..os.n {
        for c in 0..os.c {
            for y in 0..os.h {
                for x in 0..os.w {
                    let gv = grad_out.at(n, c, y, x);
                    let i1 = g.idx(n, c, y + 1, x);
                    g.as_mut_slice()[i1] += gv;
                    let i0 = g.idx(n, c, y, x);
                    g.as_mut_slice()[i0] += -gv;
                }
            }
        }
    }
    g
}

/// Sum of all elements, as a 1x1x1x1 tensor.
pub fn sum_all<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    let mut acc = E::ZERO;
    for v in x.as_slice() {
        acc += *v;
    }
    Tensor::scalar(acc)
}

pub fn sum_all_backward<E: Element>(grad_out: &Tensor<E>, input_shape: Shape) -> Tensor<E> {
    Tensor::full(input_shape, grad_out.scalar_value())
}

/// Mean of all elements, as a 1x1x1x1 tensor.
pub fn mean_all<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    let n = E::from_f64(x.len() as f64);
    let s = sum_all(x);
    Tensor::scalar(s.scalar_value() / n)
}

pub fn mean_all_backward<E: Element>(grad_out: &Tensor<E>, input_shape: Shape) -> Tensor<E> {
    let n = E::from_f64(input_shape.len() as f64);
    Tensor::full(input_shape, grad_out.scalar_value() / n)
}

/// Rotate 90 degrees counter-clockwise `quarters` times.
pub fn rot90<E: Element>(t: &Tensor<E>, quarters: u8) -> Tensor<E> {
    let s = t.shape();
    match quarters % 4 {
        0 => t.clone(),
        1 => Tensor::from_fn(Shape::new(s.n, s.c, s.w, s.h), |n, c, y, x| {
            t.at(n, c, x, s.w - 1 - y)
        }),
        2 => Tensor::from_fn(s, |n, c, y, x| t.at(n, c, s.h - 1 - y, s.w - 1 - x)),
        _ => Tensor::from_fn(Shape::new(s.n, s.c, s.w, s.h), |n, c, y, x| {
            t.at(n, c, s.h - 1 - x, y)
        }),
    }
}

/// Mirror along the horizontal axis (flip columns).
pub fn flip_h<E: Element>(t: &Tensor<E>) -> Tensor<E> {
    let s = t.shape();
    Tensor::from_fn(s, |n, c, y, x| t.at(n, c, y, s.w - 1 - x))
}

/// One of the 8 symmetries of the square: rotation by `rot` quarter turns,
/// optionally preceded by a horizontal flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dihedral {
    pub rot: u8,
    pub flip: bool,
}

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral { rot: 0, flip: false },
        Dihedral { rot: 1, flip: false },
        Dihedral { rot: 2, flip: false },
        Dihedral { rot: 3, flip: false },
        Dihedral { rot: 0, flip: true },
        Dihedral { rot: 1, flip: true },
        Dihedral { rot: 2, flip: true },
        Dihedral { rot: 3, flip: true },
    ];

    pub fn index(self) -> usize {
        self.rot as usize + if self.flip { 4 } else { 0 }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 8]
    }

    pub fn apply<E: Element>(self, t: &Tensor<E>) -> Tensor<E> {
        let flipped;
        let src = if self.flip {
            flipped = flip_h(t);
            &flipped
        } else {
            t
        };
        rot90(src, self.rot)
    }

    /// Inverse transform: un-rotate, then un-flip.
    pub fn invert<E: Element>(self, t: &Tensor<E>) -> Tensor<E> {
        let unrot = rot90(t, (4 - self.rot % 4) % 4);
        if self.flip {
            flip_h(&unrot)
        } else {
            unrot
        }
    }
}

/// Reflect-pad on the bottom/right so h and w become multiples of `m`.
/// Returns the padded tensor and the original (h, w) for cropping back.
pub fn reflect_pad_to_multiple<E: Element>(t: &Tensor<E>, m: usize) -> Result<(Tensor<E>, (usize, usize))> {
    let s = t.shape();
    let pad_h = (m - s.h % m) % m;
    let pad_w = (m - s.w % m) % m;
    if pad_h == 0 && pad_w == 0 {
        return Ok((t.clone(), (s.h, s.w)));
    }
    if pad_h >= s.h || pad_w >= s.w {
        return Err(Error::shape(
            "reflect_pad",
            format!("input {}x{} too small to reflect-pad to a multiple of {}", s.h, s.w, m),
        ));
    }
    let out = Tensor::from_fn(
        Shape::new(s.n, s.c, s.h + pad_h, s.w + pad_w),
        |n, c, y, x| {
            let sy = if y < s.h { y } else { 2 * s.h - 2 - y };
            let sx = if x < s.w { x } else { 2 * s.w - 2 - x };
            t.at(n, c, sy, sx)
        },
    );
    Ok((out, (s.h, s.w)))
}

/// Crop the top-left (h, w) region.
pub fn crop<E: Element>(t: &Tensor<E>, h: usize, w: usize) -> Tensor<E> {
    let s = t.shape();
    Tensor::from_fn(Shape::new(s.n, s.c, h, w), |n, c, y, x| t.at(n, c, y, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Shape, data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn conv_all_ones_valid_gives_nine() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 3, 3), 1.0);
        let w = Tensor::<f64>::full(Shape::new(1, 1, 3, 3), 1.0);
        let y = conv2d(&x, &w, None, 1, PaddingMode::Valid, 1).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 1, 1));
        assert_eq!(y.scalar_value(), 9.0);
    }

    #[test]
    fn conv_dirac_depthwise_is_identity() {
        let x = Tensor::<f64>::from_fn(Shape::new(2, 3, 5, 7), |n, c, y, xx| {
            (n * 100 + c * 17 + y * 3 + xx) as f64 * 0.1 - 1.0
        });
        let mut w = Tensor::<f64>::zeros(Shape::new(3, 1, 3, 3));
        for c in 0..3 {
            w.set(c, 0, 1, 1, 1.0);
        }
        let y = conv2d(&x, &w, None, 1, PaddingMode::ZeroSame, 3).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn conv_rejects_bad_geometry() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 3, 4, 4));
        let w = Tensor::<f64>::zeros(Shape::new(4, 3, 2, 2));
        assert!(conv2d(&x, &w, None, 1, PaddingMode::ZeroSame, 1).is_err());
        let w = Tensor::<f64>::zeros(Shape::new(4, 2, 3, 3));
        assert!(conv2d(&x, &w, None, 1, PaddingMode::ZeroSame, 1).is_err());
        let w = Tensor::<f64>::zeros(Shape::new(4, 3, 5, 5));
        let x1 = Tensor::<f64>::zeros(Shape::new(1, 3, 4, 4));
        assert!(conv2d(&x1, &w, None, 1, PaddingMode::Valid, 1).is_err());
    }

    #[test]
    fn maxpool_takes_window_max_and_first_tie() {
        let x = t(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]);
        let (y, am) = maxpool2x2(&x).unwrap();
        assert_eq!(y.scalar_value(), 4.0);
        assert_eq!(am, vec![3]);

        let c = Tensor::<f64>::full(Shape::new(1, 1, 4, 4), 0.5);
        let (y, am) = maxpool2x2(&c).unwrap();
        assert!(y.iter().all(|&v| v == 0.5));
        // Tie-break: all gradient lands on the first (top-left) cell of each window.
        assert_eq!(am, vec![0, 2, 8, 10]);
        let g = maxpool2x2_backward(&Tensor::full(y.shape(), 1.0), &am, c.shape());
        assert_eq!(g.at(0, 0, 0, 0), 1.0);
        assert_eq!(g.at(0, 0, 0, 1), 0.0);
        assert_eq!(g.at(0, 0, 2, 2), 1.0);
    }

    #[test]
    fn maxpool_rejects_odd_dims() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 1, 3, 4));
        assert!(maxpool2x2(&x).is_err());
    }

    #[test]
    fn upsample_matches_hand_computed_points() {
        let x = t(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]);
        let y = bilinear_upsample2x(&x);
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 4));
        let row: Vec<f64> = y.as_slice()[0..4].to_vec();
        assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn upsample_keeps_constants() {
        let x = Tensor::<f64>::full(Shape::new(2, 3, 4, 5), 0.7);
        let y = bilinear_upsample2x(&x);
        assert!(y.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        // maxpool of the upsampled constant restores the original.
        let (z, _) = maxpool2x2(&y).unwrap();
        assert_eq!(z.shape(), x.shape());
        assert!(z.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn upsample_then_avg_downsample_recovers_interior_ramp() {
        // Ramp along x; interior columns reproduce exactly, edges are clamped.
        let x = Tensor::<f64>::from_fn(Shape::new(1, 1, 8, 8), |_, _, _, xx| 0.1 * xx as f64);
        let up = bilinear_upsample2x(&x);
        let s = up.shape();
        let mut down = Tensor::<f64>::zeros(x.shape());
        for y in 0..8 {
            for xx in 0..8 {
                let mut acc = 0.0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    acc += up.at(0, 0, 2 * y + dy, 2 * xx + dx);
                }
                down.set(0, 0, y, xx, acc / 4.0);
            }
        }
        let _ = s;
        for y in 1..7 {
            for xx in 1..7 {
                assert!(
                    (down.at(0, 0, y, xx) - x.at(0, 0, y, xx)).abs() < 1e-6,
                    "at ({y},{xx})"
                );
            }
        }
    }

    #[test]
    fn concat_shapes_and_split() {
        let a = Tensor::<f64>::full(Shape::new(1, 2, 4, 4), 1.0);
        let b = Tensor::<f64>::full(Shape::new(1, 3, 4, 4), 2.0);
        let y = concat_channels(&a, &b).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 5, 4, 4));
        assert_eq!(y.at(0, 1, 0, 0), 1.0);
        assert_eq!(y.at(0, 2, 0, 0), 2.0);
        let (ga, gb) = concat_channels_backward(&y, 2);
        assert_eq!(ga, a);
        assert_eq!(gb, b);

        let b_bad = Tensor::<f64>::zeros(Shape::new(1, 3, 5, 4));
        assert!(concat_channels(&a, &b_bad).is_err());
    }

    #[test]
    fn activations_basic_values() {
        let x = t(Shape::new(1, 1, 1, 3), vec![-1.0, 0.0, 2.0]);
        let r = relu(&x);
        assert_eq!(r.as_slice(), &[0.0, 0.0, 2.0]);
        let s = sigmoid(&Tensor::scalar(0.0));
        assert_eq!(s.scalar_value(), 0.5);
        let s_neg = sigmoid(&Tensor::scalar(-500.0f64));
        assert!(s_neg.scalar_value() > 0.0 && s_neg.scalar_value() < 1e-100);
    }

    #[test]
    fn global_pools_small_values() {
        let x = t(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(global_avg_pool(&x).scalar_value(), 2.5);
        let (m, am) = global_max_pool(&x);
        assert_eq!(m.scalar_value(), 4.0);
        assert_eq!(am, vec![3]);
    }

    #[test]
    fn broadcast_add_and_reject() {
        let x = Tensor::<f64>::full(Shape::new(1, 2, 3, 3), 1.0);
        let b = t(Shape::new(1, 2, 1, 1), vec![10.0, 20.0]);
        let y = add(&x, &b).unwrap();
        assert_eq!(y.at(0, 0, 2, 2), 11.0);
        assert_eq!(y.at(0, 1, 0, 0), 21.0);
        let bad = Tensor::<f64>::zeros(Shape::new(1, 3, 3, 3));
        assert!(add(&x, &bad).is_err());
    }

    #[test]
    fn reduce_to_shape_sums_broadcast_dims() {
        let g = Tensor::<f64>::full(Shape::new(2, 3, 4, 4), 1.0);
        let r = reduce_to_shape(&g, Shape::new(2, 3, 1, 1));
        assert!(r.iter().all(|&v| v == 16.0));
        let r2 = reduce_to_shape(&g, Shape::new(2, 1, 4, 4));
        assert!(r2.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn diff_ops_shapes_and_values() {
        let x = t(Shape::new(1, 1, 2, 3), vec![0.0, 1.0, 3.0, 2.0, 2.0, 2.0]);
        let dh = diff_h(&x).unwrap();
        assert_eq!(dh.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(dh.as_slice(), &[1.0, 2.0, 0.0, 0.0]);
        let dv = diff_v(&x).unwrap();
        assert_eq!(dv.shape(), Shape::new(1, 1, 1, 3));
        assert_eq!(dv.as_slice(), &[2.0, 1.0, -1.0]);
    }

    #[test]
    fn dihedral_roundtrip_all_eight() {
        let x = Tensor::<f64>::from_fn(Shape::new(1, 2, 3, 5), |_, c, y, xx| {
            (c * 100 + y * 10 + xx) as f64
        });
        for d in Dihedral::ALL {
            let back = d.invert(&d.apply(&x));
            assert_eq!(back, x, "transform {:?}", d);
        }
    }

    #[test]
    fn reflect_pad_mirrors_and_crops_back() {
        let x = Tensor::<f64>::from_fn(Shape::new(1, 1, 5, 6), |_, _, y, xx| (y * 10 + xx) as f64);
        let (p, (h, w)) = reflect_pad_to_multiple(&x, 4).unwrap();
        assert_eq!(p.shape(), Shape::new(1, 1, 8, 8));
        // Reflection: row 5 mirrors row 3, row 6 mirrors row 2, row 7 mirrors row 1.
        assert_eq!(p.at(0, 0, 5, 0), x.at(0, 0, 3, 0));
        assert_eq!(p.at(0, 0, 7, 2), x.at(0, 0, 1, 2));
        assert_eq!(p.at(0, 0, 0, 6), x.at(0, 0, 0, 4));
        assert_eq!(crop(&p, h, w), x);
    }

    #[test]
    fn clamp_and_abs_backward_masks() {
        let x = t(Shape::new(1, 1, 1, 4), vec![-0.5, 0.2, 0.8, 1.5]);
        let g = Tensor::<f64>::full(x.shape(), 1.0);
        let cb = clamp_backward(&g, &x, 0.0, 1.0);
        assert_eq!(cb.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        let ab = abs_backward(&g, &x);
        assert_eq!(ab.as_slice(), &[-1.0, 1.0, 1.0, 1.0]);
    }
}
