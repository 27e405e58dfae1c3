//! Brute-force ground truth for instances with at most three IRS elements.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, ChannelRealization, QuadraticProblem};

pub const MAX_GRID_DIMS: usize = 3;
pub const MIN_GRID_POINTS: usize = 8;

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub points_per_circle: usize,
    /// Free phases after pinning the auxiliary coordinate, i.e. `M`.
    pub dims: usize,
}

impl GridSpec {
    pub fn new(points_per_circle: usize, dims: usize) -> Result<Self> {
        if dims > MAX_GRID_DIMS {
            return Err(Error::GridTooLarge(dims));
        }
        if points_per_circle < MIN_GRID_POINTS {
            return Err(Error::InvalidInput(format!(
                "points_per_circle must be at least {MIN_GRID_POINTS}, got {points_per_circle}"
            )));
        }
        Ok(Self {
            points_per_circle,
            dims,
        })
    }

    /// Largest distance from a point of the torus to the grid.
    pub fn spacing_bound(&self) -> f64 {
        PI * (self.dims as f64).sqrt() / self.points_per_circle as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    #[serde(serialize_with = "crate::model::serialize_cvector")]
    pub v: CVector,
    pub value: f64,
    /// The true minimum lies in `[value - error_bound, value]`.
    pub error_bound: f64,
}

/// `||R||_2` by power iteration on `R^2`.
pub fn operator_norm(r: &CMatrix) -> f64 {
    let n = r.nrows();
    if n == 0 || r.norm() == 0.0 {
        return 0.0;
    }
    let r2 = r.adjoint() * r;
    let mut x = CVector::from_iterator(n, (0..n).map(|k| Complex64::new(1.0, 0.1 * k as f64)));
    x.unscale_mut(x.norm());
    let mut estimate = 0.0;
    for _ in 0..POWER_ITER_MAX {
        let y = &r2 * &x;
        let next = y.norm();
        if next == 0.0 {
            return 0.0;
        }
        x = y.unscale(next);
        if (next - estimate).abs() <= POWER_ITER_TOL * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.sqrt()
}

/// Exhaustive search over the uniform phase grid with `v_M = 1`.
pub fn grid_search(prob: &QuadraticProblem, spec: GridSpec) -> Result<GridResult> {
    if spec.dims > MAX_GRID_DIMS {
        return Err(Error::GridTooLarge(spec.dims));
    }
    if spec.dims != prob.m {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} dims, problem has M = {}",
            spec.dims, prob.m
        )));
    }
    let r = &prob.r_mat;
    let n = prob.dim();
    let pts = spec.points_per_circle;
    let phasors: Vec<Complex64> = (0..pts)
        .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / pts as f64))
        .collect();
    let error_bound = spec.spacing_bound() * 2.0 * operator_norm(r) * (n as f64).sqrt();

    let one = Complex64::new(1.0, 0.0);
    let grid_point = |flat: usize| -> CVector {
        let mut v = CVector::from_element(n, one);
        let mut rest = flat;
        for i in 0..spec.dims {
            v[i] = phasors[rest % pts];
            rest /= pts;
        }
        v
    };
    if spec.dims == 0 {
        return Ok(GridResult {
            v: grid_point(0),
            value: r[(0, 0)].re,
            error_bound,
        });
    }

    // Coordinate 0 varies fastest; for fixed outer coordinates
    // f = rest + R_00 + 2 Re(conj(v_0) q) with q = sum_{j>0} R_0j v_j.
    let outer = pts.pow(spec.dims as u32 - 1);
    let (value, flat) = (0..outer)
        .into_par_iter()
        .map(|o| {
            let mut v = grid_point(o * pts);
            v[0] = Complex64::new(0.0, 0.0);
            let rest = v.dotc(&(r * &v)).re + r[(0, 0)].re;
            let q: Complex64 = (1..n).map(|j| r[(0, j)] * v[j]).sum();
            let mut best = (f64::INFINITY, 0);
            for (k, w) in phasors.iter().enumerate() {
                let f = rest + 2.0 * (w.conj() * q).re;
                if f < best.0 {
                    best = (f, o * pts + k);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(GridResult {
        v: grid_point(flat),
        value,
        error_bound,
    })
}

/// Exact minimum at `M = 1`: `-(||a||^2 + 2 |a^H h|)` with `a = G^H diag(h_r) 1`.
pub fn analytic_m1(ch: &ChannelRealization) -> Result<f64> {
    if ch.m() != 1 {
        return Err(Error::NotSingleElement(ch.m()));
    }
    let a = ch.cascaded().column(0).into_owned();
    Ok(-(a.norm_squared() + 2.0 * a.dotc(&ch.h).norm()))
}
