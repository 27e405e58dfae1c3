//! Primal-dual interior-point method for the bordered segment SDP.
//!
//! Primal (over the cone `H^N_+ x R^q_+`):
//!
//! ```text
//! minimize   <K, X>
//! subject to X_kk = 1                          k = 0..N
//!            Re(conj(a_j) X_{p_j,0}) - s_j = b_j   j = 0..q
//!            X >= 0, s >= 0
//! ```
//!
//! Dual: maximize `sum(y_diag) + b . y_seg` subject to
//! `Z = K - Diag(y_diag) - sum_j y_seg_j S_j >= 0` and `y_seg >= 0`.
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector.
//! The starting point is primal and dual feasible, so residuals only come
//! from rounding.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::SegmentSdp;
use crate::model::{hermitian_part, CMatrix};

const STEP_FRACTION: f64 = 0.98;

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub x: CMatrix,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub converged: bool,
}

/// A sparse Hermitian constraint matrix: list of `(row, col, value)`.
type Entries = Vec<(usize, usize, Complex64)>;

struct Operator {
    n: usize,
    q: usize,
    entries: Vec<Entries>,
    b: Vec<f64>,
}

impl Operator {
    fn new(sdp: &SegmentSdp) -> Self {
        let n = sdp.cost.nrows();
        let q = sdp.seg_pos.len();
        let mut entries: Vec<Entries> = (0..n)
            .map(|k| vec![(k, k, Complex64::new(1.0, 0.0))])
            .collect();
        let mut b = vec![1.0; n];
        for j in 0..q {
            let p = sdp.seg_pos[j];
            let a = sdp.seg_a[j];
            entries.push(vec![(0, p, a.conj() * 0.5), (p, 0, a * 0.5)]);
            b.push(sdp.seg_b[j]);
        }
        Self { n, q, entries, b }
    }

    fn m(&self) -> usize {
        self.n + self.q
    }

    /// `Re tr(A_k Y)` for every constraint.
    fn eval(&self, y: &CMatrix) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.iter().map(|&(p, q, v)| (v * y[(q, p)]).re).sum())
            .collect()
    }

    /// `sum_k y_k A_k`.
    fn adjoint(&self, y: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (e, &yk) in self.entries.iter().zip(y) {
            for &(p, q, v) in e {
                out[(p, q)] += v * yk;
            }
        }
        out
    }

    /// Schur complement `M_kl = Re tr(A_k G A_l H)`.
    fn schur(&self, g: &CMatrix, h: &CMatrix) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(p, q, alpha) in &self.entries[k] {
                    for &(r, s, beta) in &self.entries[l] {
                        acc += alpha * beta * g[(q, r)] * h[(s, p)];
                    }
                }
                out[(k, l)] = acc.re;
                out[(l, k)] = acc.re;
            }
        }
        out
    }
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest `alpha <= 1` keeping `X + alpha dX` positive definite, damped.
fn psd_step(chol_l: &CMatrix, dx: &CMatrix) -> f64 {
    let Some(w) = chol_l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(p) = chol_l.solve_lower_triangular(&w.adjoint()) else {
        return 0.0;
    };
    let lam_min = hermitian_part(&p).symmetric_eigenvalues().min();
    if lam_min >= -STEP_FRACTION {
        1.0
    } else {
        -STEP_FRACTION / lam_min
    }
}

fn orthant_step(s: &[f64], ds: &[f64]) -> f64 {
    let mut alpha: f64 = 1.0;
    for (&si, &dsi) in s.iter().zip(ds) {
        if dsi < 0.0 {
            alpha = alpha.min(-STEP_FRACTION * si / dsi);
        }
    }
    alpha
}

struct Direction {
    dx: CMatrix,
    dz: CMatrix,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dw: Vec<f64>,
}

pub(crate) fn solve(sdp: &SegmentSdp, tol: f64, max_iter: usize) -> IpmOutcome {
    let op = Operator::new(sdp);
    let n = op.n;
    let q = op.q;
    let m = op.m();
    let k_mat = &sdp.cost;
    let nu = (n + q) as f64;
    let b_norm = op.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let k_norm = k_mat.norm();

    // Primal start: c_p = kappa_p a_p strictly inside each segment.
    let mut x = CMatrix::identity(n, n);
    let mut s = vec![0.0; q];
    for j in 0..q {
        let p = sdp.seg_pos[j];
        let kappa = 0.5 * (1.0 + sdp.seg_b[j]);
        x[(p, 0)] = sdp.seg_a[j] * kappa;
        x[(0, p)] = x[(p, 0)].conj();
        s[j] = 0.5 * (1.0 - sdp.seg_b[j]);
    }
    for j1 in 0..q {
        let p1 = sdp.seg_pos[j1];
        for j2 in 0..q {
            let p2 = sdp.seg_pos[j2];
            if p1 != p2 {
                x[(p1, p2)] = x[(p1, 0)] * x[(p2, 0)].conj();
            }
        }
    }

    // Dual start: y_seg = 1 and a diagonal shift making Z positive definite.
    let mut y = vec![0.0; m];
    for v in y.iter_mut().skip(n) {
        *v = 1.0;
    }
    let base = k_mat - op.adjoint(&y);
    let shift = (-hermitian_part(&base).symmetric_eigenvalues().min()).max(0.0) + 1.0;
    for v in y.iter_mut().take(n) {
        *v = -shift;
    }
    let mut z = hermitian_part(&(k_mat - op.adjoint(&y)));
    let mut w = vec![1.0; q];

    let mut outcome = IpmOutcome {
        x: x.clone(),
        y: y.clone(),
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        converged: false,
    };

    for it in 0..=max_iter {
        let ax = op.eval(&x);
        let mut rp: Vec<f64> = op.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        for j in 0..q {
            rp[n + j] += s[j];
        }
        let rd = hermitian_part(&(k_mat - op.adjoint(&y) - &z));
        let rw: Vec<f64> = (0..q).map(|j| w[j] - y[n + j]).collect();

        let pobj = inner(k_mat, &x);
        let dobj = dot(&op.b, &y);
        let mu = (inner(&x, &z) + dot(&s, &w)) / nu;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = dot(&rp, &rp).sqrt() / (1.0 + b_norm);
        let dinf = (rd.norm() + dot(&rw, &rw).sqrt()) / (1.0 + k_norm);

        outcome.x.copy_from(&x);
        outcome.y.copy_from_slice(&y);
        outcome.iterations = it;
        outcome.primal_residual = pinf;
        outcome.dual_residual = dinf;
        outcome.gap = gap;
        if gap <= tol && pinf <= tol && dinf <= tol && mu <= tol {
            outcome.converged = true;
            break;
        }
        if it == max_iter {
            break;
        }

        let Some(chol_x) = Cholesky::new(x.clone()) else {
            break;
        };
        let Some(chol_z) = Cholesky::new(z.clone()) else {
            break;
        };
        let z_inv = chol_z.inverse();
        let lx = chol_x.l();
        let lz = chol_z.l();

        let mut schur = op.schur(&x, &z_inv);
        for j in 0..q {
            schur[(n + j, n + j)] += s[j] / w[j];
        }
        let schur_chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let reg = 1e-14 * schur.diagonal().amax().max(1.0);
                for k in 0..m {
                    schur[(k, k)] += reg;
                }
                match Cholesky::new(schur) {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let x_rd_zinv = &x * &rd * &z_inv;
        let direction = |target: f64, corr: Option<(&CMatrix, &[f64])>| -> Direction {
            let mut hmat = z_inv.scale(target) - &x - &x_rd_zinv;
            if let Some((cx, _)) = corr {
                hmat -= cx;
            }
            let hs: Vec<f64> = (0..q)
                .map(|j| {
                    let mut v = target / w[j] - s[j] + s[j] / w[j] * rw[j];
                    if let Some((_, cs)) = corr {
                        v -= cs[j] / w[j];
                    }
                    v
                })
                .collect();
            let ah = op.eval(&hmat);
            let mut rhs: Vec<f64> = (0..m).map(|k| rp[k] - ah[k]).collect();
            for j in 0..q {
                rhs[n + j] += hs[j];
            }
            let dy = schur_chol.solve(&DVector::from_vec(rhs));
            let dy: Vec<f64> = dy.iter().copied().collect();
            let aty = op.adjoint(&dy);
            let dz = hermitian_part(&(&rd - &aty));
            let dx = hermitian_part(&(&x * &aty * &z_inv + hmat));
            let dw: Vec<f64> = (0..q).map(|j| dy[n + j] - rw[j]).collect();
            let ds: Vec<f64> = (0..q).map(|j| hs[j] - s[j] / w[j] * dy[n + j]).collect();
            Direction { dx, dz, dy, ds, dw }
        };

        let step_lengths = |d: &Direction| -> (f64, f64) {
            let ap = psd_step(&lx, &d.dx).min(orthant_step(&s, &d.ds));
            let ad = psd_step(&lz, &d.dz).min(orthant_step(&w, &d.dw));
            (ap, ad)
        };

        let pred = direction(0.0, None);
        let (ap, ad) = step_lengths(&pred);
        let x_aff = &x + pred.dx.scale(ap);
        let z_aff = &z + pred.dz.scale(ad);
        let sw_aff: f64 = (0..q)
            .map(|j| (s[j] + ap * pred.ds[j]) * (w[j] + ad * pred.dw[j]))
            .sum();
        let mu_aff = (inner(&x_aff, &z_aff) + sw_aff) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let corr_x = &pred.dx * &pred.dz * &z_inv;
        let corr_s: Vec<f64> = (0..q).map(|j| pred.ds[j] * pred.dw[j]).collect();
        let dir = direction(sigma * mu, Some((&corr_x, &corr_s)));
        let (ap, ad) = step_lengths(&dir);

        x = hermitian_part(&(&x + dir.dx.scale(ap)));
        z = hermitian_part(&(&z + dir.dz.scale(ad)));
        for j in 0..q {
            s[j] += ap * dir.ds[j];
            w[j] += ad * dir.dw[j];
        }
        for k in 0..m {
            y[k] += ad * dir.dy[k];
        }
    }
    outcome
}
