//! Finite-difference verification of the analytic gradients.
//!
//! Central differences with symmetric-pair perturbation for matrix
//! arguments: the loss only sees symmetric matrices, so entry `(i,j)` and
//! `(j,i)` are bumped together and the off-diagonal quotient is halved to
//! recover the per-entry gradient of the full grid.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::spd::{grad_r_spd, lem_distance_sq, SpdMatrix, SymMatrix};
use crate::svo::{svo_grad, svo_loss, ViewEmbeddingSequence, DEFAULT_MARGIN};

/// Outcome of one finite-difference sweep.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub name: String,
    pub seed: u64,
    pub instances: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `max_i |a_i − b_i|` scaled by the larger max-norm of the two gradients
/// (floored at 1e-12 so an all-zero pair compares clean).
pub fn norm_relative_error<'a>(
    analytic: impl IntoIterator<Item = &'a f64>,
    numeric: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    let a: Vec<f64> = analytic.into_iter().copied().collect();
    let b: Vec<f64> = numeric.into_iter().copied().collect();
    debug_assert_eq!(a.len(), b.len());
    let scale = a
        .iter()
        .chain(&b)
        .fold(1e-12_f64, |acc, x| acc.max(x.abs()));
    a.iter()
        .zip(&b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
        / scale
}

/// Central-difference gradient of a scalar function of a symmetric matrix.
pub fn fd_gradient_sym<F>(f: F, at: &SymMatrix, h: f64) -> Result<SymMatrix>
where
    F: Fn(&DMatrix<f64>) -> Result<f64>,
{
    let n = at.dim();
    let base = at.matrix().clone();
    let mut grid = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            if i != j {
                plus[(j, i)] += h;
                minus[(j, i)] -= h;
            }
            let q = (f(&plus)? - f(&minus)?) / (2.0 * h);
            let g = if i == j { q } else { q / 2.0 };
            grid[(i, j)] = g;
            grid[(j, i)] = g;
        }
    }
    SymMatrix::new(grid)
}

fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> SpdMatrix {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.25;
    SpdMatrix::new(c).expect("Gram matrix plus shift is positive definite")
}

/// Sweeps `instances` random SPD pairs of dimensions 2–6 and compares the
/// analytic distance gradient against central differences.
pub fn check_spd_gradients(seed: u64, instances: usize) -> Result<GradCheckReport> {
    const TOLERANCE: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-6;
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for k in 0..instances {
        let dim = 2 + k % 5;
        let current = random_spd(&mut rng, dim);
        let target = random_spd(&mut rng, dim);

        let analytic = grad_r_spd(&current, &target, eps)?;
        let numeric = fd_gradient_sym(
            |m| lem_distance_sq(&SpdMatrix::new(m.clone())?, &target, eps),
            current.as_sym(),
            h,
        )?;
        worst = worst.max(norm_relative_error(
            analytic.matrix().iter(),
            numeric.matrix().iter(),
        ));
    }
    Ok(GradCheckReport {
        name: "spd".into(),
        seed,
        instances,
        max_rel_error: worst,
        tolerance: TOLERANCE,
        passed: worst < TOLERANCE,
    })
}

/// Sweeps `instances` random embedding sequences (3–6 views, dimension
/// 4–8) and compares the analytic hinge gradient against central
/// differences. Draws whose hinge terms land within 1e-4 of the kink are
/// redrawn: the loss is not differentiable there, so a finite-difference
/// stencil would straddle the bend and measure nothing meaningful.
pub fn check_svo_gradients(seed: u64, instances: usize) -> Result<GradCheckReport> {
    const TOLERANCE: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = DEFAULT_MARGIN;
    let h = 1e-6;
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < instances {
        let k = 3 + (rng.gen::<u32>() as usize) % 4;
        let dim = 4 + (rng.gen::<u32>() as usize) % 5;
        let azimuths: Vec<f64> = (0..k).map(|i| i as f64 * 360.0 / k as f64).collect();
        let embeddings: Vec<DVector<f64>> = (0..k)
            .map(|_| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let seq = ViewEmbeddingSequence::new(azimuths.clone(), embeddings)?;

        let res = svo_loss(&seq, delta)?;
        let near_kink = res
            .sims
            .windows(2)
            .any(|p| (p[1] - p[0] + delta).abs() < 1e-4);
        if near_kink {
            continue;
        }
        done += 1;

        let analytic = svo_grad(&seq, delta)?.grads;
        let mut numeric = vec![DVector::zeros(dim); k];
        for j in 0..k {
            for c in 0..dim {
                let eval = |sign: f64| -> Result<f64> {
                    let mut emb: Vec<DVector<f64>> = seq.embeddings().to_vec();
                    emb[j][c] += sign * h;
                    Ok(svo_loss(&ViewEmbeddingSequence::new(azimuths.clone(), emb)?, delta)?.loss)
                };
                numeric[j][c] = (eval(1.0)? - eval(-1.0)?) / (2.0 * h);
            }
        }
        let flat_a: Vec<f64> = analytic.iter().flat_map(|v| v.iter().copied()).collect();
        let flat_n: Vec<f64> = numeric.iter().flat_map(|v| v.iter().copied()).collect();
        worst = worst.max(norm_relative_error(flat_a.iter(), flat_n.iter()));
    }
    Ok(GradCheckReport {
        name: "svo".into(),
        seed,
        instances,
        max_rel_error: worst,
        tolerance: TOLERANCE,
        passed: worst < TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_sweep_passes() {
        let report = check_spd_gradients(7, 20).unwrap();
        assert!(report.passed, "max rel error {}", report.max_rel_error);
        assert!(report.max_rel_error < 1e-6);
    }

    #[test]
    fn svo_sweep_passes() {
        let report = check_svo_gradients(7, 20).unwrap();
        assert!(report.passed, "max rel error {}", report.max_rel_error);
        assert!(report.max_rel_error < 1e-5);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let a = check_spd_gradients(99, 5).unwrap();
        let b = check_spd_gradients(99, 5).unwrap();
        assert_eq!(a.max_rel_error.to_bits(), b.max_rel_error.to_bits());
        let a = check_svo_gradients(99, 5).unwrap();
        let b = check_svo_gradients(99, 5).unwrap();
        assert_eq!(a.max_rel_error.to_bits(), b.max_rel_error.to_bits());
    }

    #[test]
    fn relative_error_scaling() {
        assert_eq!(norm_relative_error([0.0, 0.0].iter(), [0.0, 0.0].iter()), 0.0);
        // |2.0 − 1.0| / 2.0
        assert_eq!(norm_relative_error([2.0].iter(), [1.0].iter()), 0.5);
    }

    #[test]
    fn fd_helper_linear_function_is_exact() {
        // f(M) = <A, M> has gradient A for symmetric A
        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -3.0])).unwrap();
        let at = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.9])).unwrap();
        let a_grid = a.matrix().clone();
        let g = fd_gradient_sym(|m| Ok((&a_grid).iter().zip(m.iter()).map(|(x, y)| x * y).sum()), &at, 1e-4)
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.matrix()[(i, j)] - a.matrix()[(i, j)]).abs() < 1e-9);
            }
        }
    }
}
