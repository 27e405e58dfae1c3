//! Riemannian conjugate gradient on the product of unit circles.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{check_start, normalized, BaselineResult};
use crate::error::{Error, Result};
use crate::model::{channel_rng, objective, CVector, QuadraticProblem};

pub const DEFAULT_MANIFOLD_ITERS: usize = 5000;
pub const DEFAULT_GRAD_TOL: f64 = 1e-7;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

/// Projects `u` onto the tangent space at `v`: removes `Re(u_i conj(v_i)) v_i`.
fn project(v: &CVector, u: &CVector) -> CVector {
    v.zip_map(u, |vi, ui| ui - vi * (ui * vi.conj()).re)
}

fn retract(v: &CVector) -> CVector {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

fn re_inner(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Riemannian gradient of `v^H R v` at a unit-modulus `v`.
pub fn riemannian_gradient(prob: &QuadraticProblem, v: &CVector) -> CVector {
    project(v, &(&prob.r_mat * v).scale(2.0))
}

/// Polak-Ribiere+ conjugate gradient with Armijo backtracking (halving from
/// `1/(2||R||_F)`) and renormalization retraction. `grad_tol` applies to the
/// gradient of the problem normalized to `||R||_F = 1`.
pub fn manifold_solve(
    prob: &QuadraticProblem,
    v0: &CVector,
    max_iter: usize,
    grad_tol: f64,
) -> Result<BaselineResult> {
    check_start(prob, v0)?;
    let (np, s) = normalized(prob);
    let f = |v: &CVector| objective(&np, v);

    let mut v = retract(v0);
    let mut fv = f(&v)?;
    let mut g = riemannian_gradient(&np, &v);
    let mut d = -g.clone();
    let mut trace = vec![fv * s];
    let mut converged = false;
    let mut iterations = 0;
    // ||R||_F = 1 after normalization.
    let step0 = 0.5;

    while iterations < max_iter {
        let gg = g.norm_squared();
        if gg.sqrt() <= grad_tol {
            converged = true;
            break;
        }
        let mut slope = re_inner(&g, &d);
        if slope >= 0.0 {
            d = -g.clone();
            slope = -gg;
        }
        let mut alpha = step0;
        let mut accepted = None;
        while alpha >= MIN_STEP {
            let cand = retract(&(&v + d.scale(alpha)));
            let fc = f(&cand)?;
            if fc <= fv + ARMIJO * alpha * slope {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((v_new, f_new)) = accepted else {
            if slope == -gg {
                // No decrease even along the steepest direction: numerically stationary.
                converged = gg.sqrt() <= grad_tol.max(1e-12);
                break;
            }
            d = -g.clone();
            continue;
        };
        iterations += 1;
        let g_new = riemannian_gradient(&np, &v_new);
        let g_old = project(&v_new, &g);
        let d_old = project(&v_new, &d);
        let beta = (re_inner(&g_new, &(&g_new - &g_old)) / gg).max(0.0);
        d = -&g_new + d_old.scale(beta);
        v = v_new;
        fv = f_new;
        g = g_new;
        trace.push(fv * s);
    }
    Ok(BaselineResult {
        objective: objective(prob, &v)?,
        v,
        iterations,
        converged,
        trace,
        relaxation_bound: None,
    })
}

/// Best of `starts` runs: the all-ones vector first, then random phases drawn
/// from per-start streams of `seed`. Ties keep the earliest start.
pub fn manifold_multistart(
    prob: &QuadraticProblem,
    starts: usize,
    seed: u64,
    max_iter: usize,
    grad_tol: f64,
) -> Result<BaselineResult> {
    if starts == 0 {
        return Err(Error::InvalidInput(
            "manifold starts must be at least 1".into(),
        ));
    }
    let n = prob.dim();
    let runs: Vec<Result<BaselineResult>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let v0 = if k == 0 {
                CVector::from_element(n, Complex64::new(1.0, 0.0))
            } else {
                let mut rng = channel_rng(seed, k as u64);
                CVector::from_iterator(
                    n,
                    (0..n).map(|_| {
                        Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
                    }),
                )
            };
            manifold_solve(prob, &v0, max_iter, grad_tol)
        })
        .collect();
    let mut best: Option<BaselineResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}
