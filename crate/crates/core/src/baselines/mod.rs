//! Heuristics the branch-and-bound optimum is compared against.
//!
//! All iterative methods run on the problem normalized to `||R||_F = 1`;
//! tolerances are interpreted in those units and objectives are reported
//! on the original scale.

mod bcd;
mod manifold;
mod sdr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    spectral_efficiency, BeamformingSolution, CVector, ChannelRealization, QuadraticProblem,
    UNIT_MODULUS_TOL,
};

pub use bcd::{bcd_solve, DEFAULT_BCD_SWEEPS, DEFAULT_BCD_TOL};
pub use manifold::{
    manifold_multistart, manifold_solve, riemannian_gradient, DEFAULT_GRAD_TOL,
    DEFAULT_MANIFOLD_ITERS,
};
pub use sdr::{sdr_solve, DEFAULT_RANDOMIZATIONS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    #[serde(serialize_with = "crate::model::serialize_cvector")]
    pub v: CVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted update.
    pub trace: Vec<f64>,
    /// Certified value of the relaxation, for methods that solve one.
    pub relaxation_bound: Option<f64>,
}

/// `(R / s, s)` with `s = ||R||_F`, or `s = 1` for a zero matrix.
pub(crate) fn normalized(prob: &QuadraticProblem) -> (QuadraticProblem, f64) {
    let norm = prob.scale();
    let s = if norm > 0.0 { norm } else { 1.0 };
    (
        QuadraticProblem {
            r_mat: prob.r_mat.unscale(s),
            offset: prob.offset / s,
            m: prob.m,
        },
        s,
    )
}

pub(crate) fn check_start(prob: &QuadraticProblem, v0: &CVector) -> Result<()> {
    if v0.len() != prob.dim() {
        return Err(Error::DimensionMismatch(format!(
            "start has length {}, problem has {}",
            v0.len(),
            prob.dim()
        )));
    }
    for (index, z) in v0.iter().enumerate() {
        if (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(Error::NotUnitModulus {
                index,
                modulus: z.norm(),
            });
        }
    }
    Ok(())
}

/// Maximum ratio transmission on the direct link, ignoring the IRS.
pub fn mrt_no_irs(ch: &ChannelRealization) -> BeamformingSolution {
    let norm = ch.h.norm();
    let f = if norm > 0.0 {
        ch.h.scale(ch.p_watt.sqrt() / norm)
    } else {
        let mut f = DVector::zeros(ch.n_t());
        f[0] = Complex64::new(ch.p_watt.sqrt(), 0.0);
        f
    };
    BeamformingSolution {
        theta: Vec::new(),
        f,
        se_bits: spectral_efficiency(ch.p_watt * ch.h.norm_squared(), ch.sigma2_watt),
        objective: 0.0,
    }
}
