//! Semidefinite relaxation with Gaussian randomization.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BaselineResult;
use crate::error::{Error, Result};
use crate::model::{hermitian_part, objective, unt, CVector, QuadraticProblem};
use crate::relaxation::{solve_segment_relaxation, ArcBox, DEFAULT_TOL};

pub const DEFAULT_RANDOMIZATIONS: usize = 1000;

/// Solves the rank-relaxed problem (the full-circle segment relaxation, whose
/// `C` block is the plain SDR solution), then rounds: the dominant eigenvector
/// plus `n_rand` samples `unt(xi)`, `xi ~ CN(0, C)`. Keeps the best.
pub fn sdr_solve(prob: &QuadraticProblem, n_rand: usize, seed: u64) -> Result<BaselineResult> {
    if n_rand == 0 {
        return Err(Error::InvalidInput("n_rand must be at least 1".into()));
    }
    let n = prob.dim();
    let root = match solve_segment_relaxation(prob, &ArcBox::full(n), DEFAULT_TOL) {
        Ok(sol) => sol,
        Err(Error::IterationLimit { partial, .. }) => *partial,
        Err(e) => return Err(e),
    };
    let eig = SymmetricEigen::new(hermitian_part(&root.c_mat));
    let one = |_| Complex64::new(1.0, 0.0);

    let top = eig.eigenvalues.imax();
    let mut best_v = unt(&eig.eigenvectors.column(top).into_owned(), one);
    let mut best = objective(prob, &best_v)?;
    let mut trace = vec![best];

    // Square-root factor U diag(sqrt(lambda_+)).
    let mut factor = eig.eigenvectors.clone();
    for (j, mut col) in factor.column_iter_mut().enumerate() {
        col *= Complex64::new(eig.eigenvalues[j].max(0.0).sqrt(), 0.0);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..n_rand {
        let z = CVector::from_iterator(
            n,
            (0..n).map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(half * re, half * im)
            }),
        );
        let v = unt(&(&factor * z), one);
        let value = objective(prob, &v)?;
        if value < best {
            best = value;
            best_v = v;
            trace.push(best);
        }
    }
    Ok(BaselineResult {
        v: best_v,
        objective: best,
        iterations: n_rand,
        converged: true,
        trace,
        relaxation_bound: Some(root.certified_bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_quadratic, generate_channels_indexed, CMatrix, SystemGeometry};
    use approx::assert_relative_eq;

    #[test]
    fn rank_one_relaxation_rounds_to_the_optimum() {
        // R = -w w^H with unit-modulus w: the relaxation is tight at w w^H.
        let w = CVector::from_iterator(
            4,
            (0..4).map(|k| Complex64::from_polar(1.0, 0.7 * k as f64)),
        );
        let r: CMatrix = -(&w * w.adjoint());
        let prob = QuadraticProblem::from_matrix(r, 0.0).unwrap();
        let res = sdr_solve(&prob, 10, 1).unwrap();
        assert_relative_eq!(res.objective, -16.0, max_relative = 1e-6);
        assert!(res.relaxation_bound.unwrap() <= res.objective + 1e-6);
    }

    #[test]
    fn sdr_is_feasible_and_above_its_bound() {
        let geom = SystemGeometry {
            m: 4,
            n_t: 3,
            pl0_db: Some(0.0),
            ..Default::default()
        };
        for k in 0..5 {
            let prob = build_quadratic(&generate_channels_indexed(&geom, 3, k).unwrap()).unwrap();
            let res = sdr_solve(&prob, 200, k).unwrap();
            assert!(res.v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            assert_relative_eq!(res.objective, objective(&prob, &res.v).unwrap());
            assert!(res.relaxation_bound.unwrap() <= res.objective);
            assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_randomizations_rejected() {
        let prob = QuadraticProblem::from_matrix(CMatrix::zeros(2, 2), 0.0).unwrap();
        assert!(sdr_solve(&prob, 0, 0).is_err());
    }
}
