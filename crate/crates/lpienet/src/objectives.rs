//! Training losses and evaluation metrics.
//!
//! All losses are written against [`Ctx`], so the same definition yields plain
//! values under [`EvalCtx`] and differentiable graphs under a tape context.

use crate::context::{Ctx, EvalCtx};
use crate::error::{Error, Result};
use crate::ops::PaddingMode;
use crate::tensor::{Element, Shape, Tensor};

/// Weights of the combined loss: alpha scales the SSIM term, beta the
/// gradient term; the L1 term is unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.5,
            beta: 0.1,
        }
    }
}

/// Image-gradient operator used by [`gradient_loss_on`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradOperator {
    /// Forward finite differences (exact adjoint, offset-blind).
    #[default]
    ForwardDiff,
    /// 3x3 Sobel filters, valid padding.
    Sobel,
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn check_same_shape<E: Element, C: Ctx<E>>(
    ctx: &C,
    op: &'static str,
    a: &C::V,
    b: &C::V,
) -> Result<()> {
    let (sa, sb) = (ctx.shape(a), ctx.shape(b));
    if sa != sb {
        return Err(Error::shape(op, format!("{} vs {}", sa, sb)));
    }
    Ok(())
}

/// Mean absolute difference over all elements.
pub fn l1_loss_on<E: Element, C: Ctx<E>>(ctx: &mut C, pred: &C::V, target: &C::V) -> Result<C::V> {
    check_same_shape(ctx, "l1_loss", pred, target)?;
    let d = ctx.sub(pred, target)?;
    let a = ctx.abs(&d);
    Ok(ctx.mean_all(&a))
}

/// 11x11 Gaussian window (sigma 1.5) replicated per channel as a depthwise
/// convolution weight, normalized to unit mass.
pub fn ssim_window<E: Element>(channels: usize) -> Tensor<E> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g1: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let mut w2 = vec![0.0f64; SSIM_WINDOW * SSIM_WINDOW];
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            w2[y * SSIM_WINDOW + x] = g1[y] * g1[x];
        }
    }
    let mass: f64 = w2.iter().sum();
    let mut t = Tensor::zeros(Shape::new(channels, 1, SSIM_WINDOW, SSIM_WINDOW));
    for c in 0..channels {
        for (i, v) in w2.iter().enumerate() {
            t.as_mut_slice()[c * SSIM_WINDOW * SSIM_WINDOW + i] = E::from_f64(*v / mass);
        }
    }
    t
}

/// Mean structural similarity with the standard constants
/// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2, computed on the valid region of a
/// per-channel Gaussian-weighted window.
pub fn ssim_on<E: Element, C: Ctx<E>>(
    ctx: &mut C,
    pred: &C::V,
    target: &C::V,
    peak: f64,
) -> Result<C::V> {
    check_same_shape(ctx, "ssim", pred, target)?;
    let s = ctx.shape(pred);
    if s.h < SSIM_WINDOW || s.w < SSIM_WINDOW {
        return Err(Error::shape(
            "ssim",
            format!("image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window", s.h, s.w),
        ));
    }
    if peak <= 0.0 {
        return Err(Error::arg("ssim", format!("peak {peak} must be positive")));
    }
    let win = ctx.constant(&ssim_window::<E>(s.c));
    let dw = |ctx: &mut C, x: &C::V| -> Result<C::V> {
        ctx.conv2d(x, &win, None, 1, PaddingMode::Valid, s.c)
    };

    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);

    let mu1 = dw(ctx, pred)?;
    let mu2 = dw(ctx, target)?;
    let mu1_sq = ctx.mul(&mu1, &mu1)?;
    let mu2_sq = ctx.mul(&mu2, &mu2)?;
    let mu1_mu2 = ctx.mul(&mu1, &mu2)?;

    let p_sq = ctx.mul(pred, pred)?;
    let t_sq = ctx.mul(target, target)?;
    let pt = ctx.mul(pred, target)?;
    let e_p_sq = dw(ctx, &p_sq)?;
    let e_t_sq = dw(ctx, &t_sq)?;
    let e_pt = dw(ctx, &pt)?;
    let sigma1_sq = ctx.sub(&e_p_sq, &mu1_sq)?;
    let sigma2_sq = ctx.sub(&e_t_sq, &mu2_sq)?;
    let sigma12 = ctx.sub(&e_pt, &mu1_mu2)?;

    let two_mu = ctx.scalar_mul(&mu1_mu2, 2.0);
    let num1 = ctx.scalar_add(&two_mu, c1);
    let two_s12 = ctx.scalar_mul(&sigma12, 2.0);
    let num2 = ctx.scalar_add(&two_s12, c2);
    let num = ctx.mul(&num1, &num2)?;

    let mu_sum = ctx.add(&mu1_sq, &mu2_sq)?;
    let den1 = ctx.scalar_add(&mu_sum, c1);
    let s_sum = ctx.add(&sigma1_sq, &sigma2_sq)?;
    let den2 = ctx.scalar_add(&s_sum, c2);
    let den = ctx.mul(&den1, &den2)?;

    let map = ctx.div(&num, &den)?;
    Ok(ctx.mean_all(&map))
}

/// 1 - ssim(pred, target, peak = 1).
pub fn ssim_loss_on<E: Element, C: Ctx<E>>(
    ctx: &mut C,
    pred: &C::V,
    target: &C::V,
) -> Result<C::V> {
    let s = ssim_on(ctx, pred, target, 1.0)?;
    let neg = ctx.scalar_mul(&s, -1.0);
    Ok(ctx.scalar_add(&neg, 1.0))
}

fn sobel_weights<E: Element>(channels: usize, horizontal: bool) -> Tensor<E> {
    let kx: [f64; 9] = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
    let ky: [f64; 9] = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];
    let k = if horizontal { kx } else { ky };
    let mut t = Tensor::zeros(Shape::new(channels, 1, 3, 3));
    for c in 0..channels {
        for (i, v) in k.iter().enumerate() {
            t.as_mut_slice()[c * 9 + i] = E::from_f64(*v);
        }
    }
    t
}

/// L1 distance between image gradients of prediction and target:
/// mean(|Gh(p) - Gh(t)|) + mean(|Gv(p) - Gv(t)|).
pub fn gradient_loss_on<E: Element, C: Ctx<E>>(
    ctx: &mut C,
    pred: &C::V,
    target: &C::V,
    operator: GradOperator,
) -> Result<C::V> {
    check_same_shape(ctx, "gradient_loss", pred, target)?;
    let (gh_p, gv_p, gh_t, gv_t) = match operator {
        GradOperator::ForwardDiff => (
            ctx.diff_h(pred)?,
            ctx.diff_v(pred)?,
            ctx.diff_h(target)?,
            ctx.diff_v(target)?,
        ),
        GradOperator::Sobel => {
            let c = ctx.shape(pred).c;
            let wx = ctx.constant(&sobel_weights::<E>(c, true));
            let wy = ctx.constant(&sobel_weights::<E>(c, false));
            (
                ctx.conv2d(pred, &wx, None, 1, PaddingMode::Valid, c)?,
                ctx.conv2d(pred, &wy, None, 1, PaddingMode::Valid, c)?,
                ctx.conv2d(target, &wx, None, 1, PaddingMode::Valid, c)?,
                ctx.conv2d(target, &wy, None, 1, PaddingMode::Valid, c)?,
            )
        }
    };
    let dh = ctx.sub(&gh_p, &gh_t)?;
    let dv = ctx.sub(&gv_p, &gv_t)?;
    let ah = ctx.abs(&dh);
    let av = ctx.abs(&dv);
    let mh = ctx.mean_all(&ah);
    let mv = ctx.mean_all(&av);
    ctx.add(&mh, &mv)
}

/// alpha * ssim_loss + l1 + beta * gradient_loss.
pub fn combined_loss_on<E: Element, C: Ctx<E>>(
    ctx: &mut C,
    pred: &C::V,
    target: &C::V,
    weights: LossWeights,
    operator: GradOperator,
) -> Result<C::V> {
    let l1 = l1_loss_on(ctx, pred, target)?;
    let ssim_l = ssim_loss_on(ctx, pred, target)?;
    let grad_l = gradient_loss_on(ctx, pred, target, operator)?;
    let a = ctx.scalar_mul(&ssim_l, weights.alpha);
    let b = ctx.scalar_mul(&grad_l, weights.beta);
    let s = ctx.add(&a, &l1)?;
    ctx.add(&s, &b)
}

/// Plain-value wrappers.
pub fn l1_loss<E: Element>(pred: &Tensor<E>, target: &Tensor<E>) -> Result<f64> {
    let mut ctx = EvalCtx::new();
    Ok(l1_loss_on(&mut ctx, pred, target)?.scalar_value().to_f64())
}

pub fn ssim<E: Element>(pred: &Tensor<E>, target: &Tensor<E>, peak: f64) -> Result<f64> {
    let mut ctx = EvalCtx::new();
    Ok(ssim_on(&mut ctx, pred, target, peak)?
        .scalar_value()
        .to_f64())
}

pub fn ssim_loss<E: Element>(pred: &Tensor<E>, target: &Tensor<E>) -> Result<f64> {
    let mut ctx = EvalCtx::new();
    Ok(ssim_loss_on(&mut ctx, pred, target)?
        .scalar_value()
        .to_f64())
}

pub fn gradient_loss<E: Element>(
    pred: &Tensor<E>,
    target: &Tensor<E>,
    operator: GradOperator,
) -> Result<f64> {
    let mut ctx = EvalCtx::new();
    Ok(gradient_loss_on(&mut ctx, pred, target, operator)?
        .scalar_value()
        .to_f64())
}

pub fn combined_loss<E: Element>(
    pred: &Tensor<E>,
    target: &Tensor<E>,
    weights: LossWeights,
    operator: GradOperator,
) -> Result<f64> {
    let mut ctx = EvalCtx::new();
    Ok(combined_loss_on(&mut ctx, pred, target, weights, operator)?
        .scalar_value()
        .to_f64())
}

/// Peak signal-to-noise ratio in dB: 10 log10(peak^2 / MSE).
/// Identical inputs (MSE = 0) return +infinity.
pub fn psnr<E: Element>(pred: &Tensor<E>, target: &Tensor<E>, peak: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "psnr",
            format!("{} vs {}", pred.shape(), target.shape()),
        ));
    }
    let mut acc = 0.0f64;
    for (p, t) in pred.iter().zip(target.iter()) {
        let d = p.to_f64() - t.to_f64();
        acc += d * d;
    }
    let mse = acc / pred.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn rand_img(shape: Shape, seed: u64) -> Tensor<f64> {
        let mut rng = Prng::seed(seed);
        let mut t = Tensor::zeros(shape);
        for v in t.as_mut_slice() {
            *v = rng.uniform();
        }
        t
    }

    #[test]
    fn l1_basic_values() {
        let x = rand_img(Shape::new(1, 3, 8, 8), 1);
        assert_eq!(l1_loss(&x, &x).unwrap(), 0.0);
        let y = x.map(|v| v + 0.5);
        assert!((l1_loss(&y, &x).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ssim_self_is_one() {
        let x = rand_img(Shape::new(1, 3, 16, 16), 2);
        let s = ssim(&x, &x, 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "ssim(x,x) = {s}");
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = rand_img(Shape::new(1, 1, 14, 14), 3);
        let b = rand_img(Shape::new(1, 1, 14, 14), 4);
        let s1 = ssim(&a, &b, 1.0).unwrap();
        let s2 = ssim(&b, &a, 1.0).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = rand_img(Shape::new(1, 1, 8, 8), 5);
        assert!(ssim(&a, &a, 1.0).is_err());
    }

    #[test]
    fn ssim_invariant_to_joint_peak_rescale() {
        let a = rand_img(Shape::new(1, 1, 16, 16), 6);
        let b = rand_img(Shape::new(1, 1, 16, 16), 7);
        let s1 = ssim(&a, &b, 1.0).unwrap();
        let a2 = a.map(|v| v * 2.0);
        let b2 = b.map(|v| v * 2.0);
        let s2 = ssim(&a2, &b2, 2.0).unwrap();
        assert!((s1 - s2).abs() < 1e-9, "{s1} vs {s2}");
    }

    #[test]
    fn gradient_loss_ignores_offsets_but_l1_does_not() {
        let x = rand_img(Shape::new(1, 1, 8, 8), 8);
        let y = x.map(|v| v + 0.3);
        assert_eq!(
            gradient_loss(&y, &x, GradOperator::ForwardDiff).unwrap(),
            0.0
        );
        assert!(l1_loss(&y, &x).unwrap() > 0.25);
    }

    #[test]
    fn combined_reduces_to_l1_at_zero_weights() {
        let x = rand_img(Shape::new(1, 1, 16, 16), 9);
        let y = rand_img(Shape::new(1, 1, 16, 16), 10);
        let c = combined_loss(
            &y,
            &x,
            LossWeights { alpha: 0.0, beta: 0.0 },
            GradOperator::ForwardDiff,
        )
        .unwrap();
        let l = l1_loss(&y, &x).unwrap();
        assert!((c - l).abs() < 1e-15);
    }

    #[test]
    fn combined_is_linear_in_alpha_and_beta() {
        let x = rand_img(Shape::new(1, 1, 16, 16), 11);
        let y = rand_img(Shape::new(1, 1, 16, 16), 12);
        let l1 = l1_loss(&y, &x).unwrap();
        let sl = ssim_loss(&y, &x).unwrap();
        let gl = gradient_loss(&y, &x, GradOperator::ForwardDiff).unwrap();
        for (a, b) in [(0.25, 0.05), (0.5, 0.1), (1.5, 0.7)] {
            let c = combined_loss(
                &y,
                &x,
                LossWeights { alpha: a, beta: b },
                GradOperator::ForwardDiff,
            )
            .unwrap();
            assert!((c - (a * sl + l1 + b * gl)).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_known_values() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 1, 8, 8));
        let y = x.map(|_| 0.1);
        let p = psnr(&y, &x, 1.0).unwrap();
        assert!((p - 20.0).abs() < 1e-9, "{p}");
        let z = x.map(|_| 0.5);
        let p2 = psnr(&z, &x, 1.0).unwrap();
        assert!((p2 - 6.020599913279624).abs() < 1e-9, "{p2}");
        assert!(psnr(&x, &x, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn sobel_gradient_loss_zero_on_identical() {
        let x = rand_img(Shape::new(1, 2, 8, 8), 13);
        assert_eq!(gradient_loss(&x, &x, GradOperator::Sobel).unwrap(), 0.0);
    }
}
