//! Plain semidefinite relaxation `min tr(R C)` s.t. `Diag(C) = 1`, `C >= 0`,
//! solved by ADMM between the PSD cone and the unit-diagonal affine set.
//!
//! This route shares no code with the interior-point solver and serves as an
//! independent check of the root relaxation.

use num_complex::Complex64;

use super::project_psd;
use crate::error::Result;
use crate::model::{CMatrix, QuadraticProblem};

#[derive(Debug, Clone)]
pub struct PlainSdrSolution {
    /// PSD iterate with unit diagonal enforced by rescaling.
    pub c_mat: CMatrix,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve_plain_sdr(
    prob: &QuadraticProblem,
    tol: f64,
    max_iter: usize,
) -> Result<PlainSdrSolution> {
    let n = prob.dim();
    let norm = prob.scale();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let cost = prob.r_mat.unscale(scale);
    let rho = 1.0;

    let mut w = CMatrix::identity(n, n);
    let mut dual = CMatrix::zeros(n, n);
    let mut psd = w.clone();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        psd = project_psd(&(&w - &dual - cost.unscale(rho)))?;
        let w_prev = w.clone();
        w = &psd + &dual;
        for k in 0..n {
            w[(k, k)] = Complex64::new(1.0, 0.0);
        }
        dual += &psd - &w;
        let primal = (&psd - &w).norm();
        let dual_res = rho * (&w - &w_prev).norm();
        if primal <= tol && dual_res <= tol {
            converged = true;
            break;
        }
    }
    // Congruence by the diagonal keeps the iterate PSD and makes it feasible.
    let d: Vec<f64> = (0..n)
        .map(|k| psd[(k, k)].re.max(f64::MIN_POSITIVE).sqrt().recip())
        .collect();
    for r in 0..n {
        for c in 0..n {
            psd[(r, c)] *= d[r] * d[c];
        }
    }
    let value = psd
        .iter()
        .zip(prob.r_mat.iter())
        .map(|(x, r)| (x.conj() * r).re)
        .sum();
    Ok(PlainSdrSolution {
        c_mat: psd,
        value,
        iterations,
        converged,
    })
}
