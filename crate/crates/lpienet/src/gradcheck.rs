//! Finite-difference verification of tape gradients.
//!
//! The checker compares analytic gradients against central differences at
//! sampled coordinates. A perturbed pair whose forward passes make different
//! discrete decisions (ReLU sign, pool argmax, clamp saturation) crossed a
//! kink; such coordinates are skipped and counted rather than reported as
//! gradient errors.

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// max over checked coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Check the gradients of `build` at the given inputs.
///
/// `build` must construct the same graph every call; all `inputs` become
/// grad-requiring leaves in order. Up to `coords_per_input` coordinates of
/// each input are probed with step `eps`.
pub fn gradcheck<E, F>(
    inputs: &[Tensor<E>],
    build: F,
    eps: f64,
    coords_per_input: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    E: Element,
    F: Fn(&mut Tape<E>, &[NodeId]) -> Result<NodeId>,
{
    // Analytic pass.
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let root = build(&mut tape, &ids)?;
    if tape.shape_of(root).len() != 1 {
        return Err(Error::arg("gradcheck", "graph root must be scalar"));
    }
    tape.backward(root)?;
    let analytic: Vec<Option<Tensor<E>>> = ids.iter().map(|id| tape.grad(*id).cloned()).collect();

    let eval = |perturbed: &[Tensor<E>]| -> Result<(f64, u64)> {
        let mut t = Tape::new();
        t.record_decisions();
        let ids: Vec<NodeId> = perturbed.iter().map(|x| t.leaf(x.clone(), false)).collect();
        let root = build(&mut t, &ids)?;
        Ok((
            t.value(root).scalar_value().to_f64(),
            t.decision_hash().unwrap(),
        ))
    };

    let mut rng = Prng::seed(seed);
    let mut max_rel_err = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;

    let mut work: Vec<Tensor<E>> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        let len = input.len();
        let coords: Vec<usize> = if len <= coords_per_input {
            (0..len).collect()
        } else {
            (0..coords_per_input)
                .map(|_| rng.below(len as u64) as usize)
                .collect()
        };
        for ci in coords {
            let orig = input.as_slice()[ci];
            work[ti].as_mut_slice()[ci] = orig + E::from_f64(eps);
            let (f_plus, h_plus) = eval(&work)?;
            work[ti].as_mut_slice()[ci] = orig - E::from_f64(eps);
            let (f_minus, h_minus) = eval(&work)?;
            work[ti].as_mut_slice()[ci] = orig;

            if h_plus != h_minus {
                skipped += 1;
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic[ti]
                .as_ref()
                .map(|g| g.as_slice()[ci].to_f64())
                .unwrap_or(0.0);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > max_rel_err {
                max_rel_err = rel;
            }
            checked += 1;
        }
    }

    Ok(GradCheckReport {
        max_rel_err,
        checked,
        skipped_kinks: skipped,
    })
}

/// Random tensor with entries in [0.1, 0.9], the checker's preferred range
/// (keeps sampled points away from activation kinks at zero).
pub fn smooth_random<E: Element>(shape: crate::tensor::Shape, rng: &mut Prng) -> Tensor<E> {
    let mut t = Tensor::zeros(shape);
    for v in t.as_mut_slice() {
        *v = E::from_f64(rng.uniform_in(0.1, 0.9));
    }
    t
}

/// Random tensor with entries in [-s, s].
pub fn signed_random<E: Element>(
    shape: crate::tensor::Shape,
    s: f64,
    rng: &mut Prng,
) -> Tensor<E> {
    let mut t = Tensor::zeros(shape);
    for v in t.as_mut_slice() {
        *v = E::from_f64(rng.uniform_in(-s, s));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::PaddingMode;
    use crate::tensor::Shape;

    #[test]
    fn linear_conv_gradcheck_is_nearly_exact() {
        let mut rng = Prng::seed(11);
        let x = smooth_random::<f64>(Shape::new(1, 2, 5, 5), &mut rng);
        let w = signed_random::<f64>(Shape::new(3, 2, 3, 3), 0.5, &mut rng);
        let report = gradcheck(
            &[x, w],
            |tape, ids| {
                let c = tape.conv2d(ids[0], ids[1], None, 1, PaddingMode::ZeroSame, 1)?;
                Ok(tape.sum_all(c))
            },
            1e-5,
            40,
            0,
        )
        .unwrap();
        assert!(report.checked > 0);
        assert!(
            report.max_rel_err < 1e-9,
            "linear map too inexact: {}",
            report.max_rel_err
        );
    }

    #[test]
    fn sigmoid_chain_is_accurate() {
        let mut rng = Prng::seed(5);
        let x = smooth_random::<f64>(Shape::new(1, 1, 4, 4), &mut rng);
        let report = gradcheck(
            &[x],
            |tape, ids| {
                let s1 = tape.sigmoid(ids[0]);
                let s2 = tape.sigmoid(s1);
                let m = tape.mul(s2, s2)?;
                Ok(tape.mean_all(m))
            },
            1e-5,
            16,
            1,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "err {}", report.max_rel_err);
    }

    #[test]
    fn relu_kinks_are_skipped_not_failed() {
        // Values straddle zero closer than eps, so perturbations cross the kink.
        let x = Tensor::<f64>::from_vec(
            Shape::new(1, 1, 1, 4),
            vec![5e-6, -5e-6, 0.5, -0.5],
        )
        .unwrap();
        let report = gradcheck(
            &[x],
            |tape, ids| {
                let r = tape.relu(ids[0]);
                Ok(tape.sum_all(r))
            },
            1e-5,
            8,
            2,
        )
        .unwrap();
        assert_eq!(report.skipped_kinks, 2);
        assert!(report.max_rel_err < 1e-9);
    }
}
