//! Circular-segment conic relaxation of a branch-and-bound subproblem.
//!
//! For a box of arcs `A_i = {e^{j phi} : phi in [l_i, u_i]}` the convex hull of
//! each arc is the circular segment `Re(conj(a_i) c_i) >= cos((u_i - l_i) / 2)`
//! intersected with the unit disk. Lifting `v v^H` to `C` and relaxing the
//! rank-one constraint to the bordered LMI `[[1, c^H], [c, C]] >= 0` gives a
//! small SDP whose dual yields a lower bound on `v^H R v` over the box.
//!
//! Lower bounds are certified from the dual multipliers alone: with
//! `Z = K - Diag(y) - sum_j z_j S_j` and `z >= 0`, every feasible bordered
//! matrix has trace `N`, so `b . y + N min(lambda_min(Z), 0)` can never exceed
//! the subproblem optimum, whatever the accuracy of the solver.

mod ipm;
mod plain;

use std::f64::consts::{PI, TAU};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{hermitian_part, CMatrix, CVector, QuadraticProblem};

pub use plain::{solve_plain_sdr, PlainSdrSolution};

/// Residual tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Interior-point iteration cap per subproblem.
pub const DEFAULT_MAX_ITER: usize = 200;

/// Product of circular arcs given by their argument intervals `[l_i, u_i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcBox {
    l: Vec<f64>,
    u: Vec<f64>,
}

impl ArcBox {
    pub fn new(l: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if l.len() != u.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} lower vs {} upper limits",
                l.len(),
                u.len()
            )));
        }
        for (i, (&lo, &hi)) in l.iter().zip(&u).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || hi - lo > TAU {
                return Err(Error::InvalidInput(format!(
                    "arc {i} = [{lo}, {hi}] is not a valid argument interval"
                )));
            }
        }
        Ok(Self { l, u })
    }

    /// The unconstrained box: every coordinate ranges over the full circle.
    pub fn full(n: usize) -> Self {
        Self {
            l: vec![0.0; n],
            u: vec![TAU; n],
        }
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    pub fn upper(&self) -> &[f64] {
        &self.u
    }

    pub fn width(&self, i: usize) -> f64 {
        self.u[i] - self.l[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.u[i] + self.l[i])
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.u[i] == self.l[i]
    }

    /// Splits arc `i` at its midpoint.
    pub fn bisect(&self, i: usize) -> (ArcBox, ArcBox) {
        let mid = self.midpoint(i);
        let mut left = self.clone();
        let mut right = self.clone();
        left.u[i] = mid;
        right.l[i] = mid;
        (left, right)
    }

    /// Whether `other` is contained in `self` coordinate by coordinate.
    pub fn contains_box(&self, other: &ArcBox) -> bool {
        self.len() == other.len()
            && (0..self.len()).all(|i| self.l[i] <= other.l[i] && other.u[i] <= self.u[i])
    }

    /// Representative of `phi` modulo `2 pi` inside arc `i`, or the nearest
    /// endpoint (in circular distance) when `phi` lies outside the arc.
    pub fn clamp_angle(&self, i: usize, phi: f64) -> f64 {
        let (l, u) = (self.l[i], self.u[i]);
        let rep = l + (phi - l).rem_euclid(TAU);
        if rep <= u {
            return rep;
        }
        let past_upper = rep - u;
        let before_lower = l + TAU - rep;
        if past_upper <= before_lower {
            u
        } else {
            l
        }
    }

    /// Whether `z` has an argument inside arc `i` (up to `slack` radians).
    pub fn contains_angle(&self, i: usize, phi: f64, slack: f64) -> bool {
        let rep = self.l[i] + (phi - self.l[i] + slack).rem_euclid(TAU) - slack;
        rep <= self.u[i] + slack
    }
}

/// Chord parameters of each arc: midpoint direction `a_i = e^{j(u_i+l_i)/2}`
/// and half-plane offset `cos((u_i - l_i)/2)`.
pub fn segment_parameters(bx: &ArcBox) -> (CVector, Vec<f64>) {
    let a = CVector::from_iterator(
        bx.len(),
        (0..bx.len()).map(|i| Complex64::from_polar(1.0, bx.midpoint(i))),
    );
    let rhs = (0..bx.len()).map(|i| (0.5 * bx.width(i)).cos()).collect();
    (a, rhs)
}

/// Dual multipliers of the bordered SDP, in the coordinates of a [`SegmentSdp`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCandidate {
    /// One multiplier per diagonal constraint of the bordered matrix.
    pub diag: Vec<f64>,
    /// One multiplier per segment constraint; clamped at zero when certified.
    pub seg: Vec<f64>,
}

/// Result of solving the segment relaxation of one box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationSolution {
    #[serde(serialize_with = "crate::model::serialize_cvector")]
    pub c: CVector,
    #[serde(skip)]
    pub c_mat: CMatrix,
    /// `tr(R C)`.
    pub primal_value: f64,
    /// Guaranteed lower bound on `v^H R v` over the box.
    pub certified_bound: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub dual: DualCandidate,
}

/// The bordered SDP of one box, after eliminating single-point arcs and
/// normalizing the cost to unit Frobenius norm.
///
/// A coordinate whose arc is a single point `e^{j phi}` forces row `i` of the
/// bordered matrix to equal `e^{j phi}` times row 0, so it is folded into the
/// border and dropped.
#[derive(Debug, Clone)]
pub struct SegmentSdp {
    /// Cost on the reduced bordered matrix (index 0 is the border).
    pub(crate) cost: CMatrix,
    /// Original objective equals `scale` times the reduced objective.
    pub(crate) scale: f64,
    /// Original coordinate of each reduced index `1..`.
    free: Vec<usize>,
    /// Fixed coordinates and their values.
    fixed: Vec<(usize, Complex64)>,
    /// Reduced index, direction and offset of each active segment constraint.
    pub(crate) seg_pos: Vec<usize>,
    pub(crate) seg_a: Vec<Complex64>,
    pub(crate) seg_b: Vec<f64>,
    n: usize,
}

impl SegmentSdp {
    pub fn new(prob: &QuadraticProblem, bx: &ArcBox) -> Result<Self> {
        let n = prob.dim();
        if bx.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "box has {} arcs, problem has {} coordinates",
                bx.len(),
                n
            )));
        }
        let (a, rhs) = segment_parameters(bx);
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        for i in 0..n {
            if bx.is_degenerate(i) {
                fixed.push((i, a[i]));
            } else {
                free.push(i);
            }
        }
        // Lift map T: reduced bordered vector -> full bordered vector.
        let dim = free.len() + 1;
        let mut t = CMatrix::zeros(n + 1, dim);
        t[(0, 0)] = Complex64::new(1.0, 0.0);
        for &(i, phi) in &fixed {
            t[(i + 1, 0)] = phi;
        }
        for (k, &i) in free.iter().enumerate() {
            t[(i + 1, k + 1)] = Complex64::new(1.0, 0.0);
        }
        let mut bordered = CMatrix::zeros(n + 1, n + 1);
        bordered.view_mut((1, 1), (n, n)).copy_from(&prob.r_mat);
        let cost = hermitian_part(&(t.adjoint() * bordered * &t));
        let norm = cost.norm();
        let scale = if norm > 0.0 { norm } else { 1.0 };

        let mut seg_pos = Vec::new();
        let mut seg_a = Vec::new();
        let mut seg_b = Vec::new();
        for (k, &i) in free.iter().enumerate() {
            // A full circle imposes nothing beyond the unit disk.
            if bx.width(i) < TAU {
                seg_pos.push(k + 1);
                seg_a.push(a[i]);
                seg_b.push(rhs[i]);
            }
        }
        Ok(Self {
            cost: cost.unscale(scale),
            scale,
            free,
            fixed,
            seg_pos,
            seg_a,
            seg_b,
            n,
        })
    }

    /// Size of the reduced bordered matrix, which is also its trace.
    pub fn order(&self) -> usize {
        self.cost.nrows()
    }

    pub fn num_segments(&self) -> usize {
        self.seg_pos.len()
    }

    /// Embeds a reduced bordered matrix into the full `(c, C)` pair.
    fn lift(&self, x: &CMatrix) -> (CVector, CMatrix) {
        let dim = self.order();
        let mut t = CMatrix::zeros(self.n + 1, dim);
        t[(0, 0)] = Complex64::new(1.0, 0.0);
        for &(i, phi) in &self.fixed {
            t[(i + 1, 0)] = phi;
        }
        for (k, &i) in self.free.iter().enumerate() {
            t[(i + 1, k + 1)] = Complex64::new(1.0, 0.0);
        }
        let full = hermitian_part(&(&t * x * t.adjoint()));
        let c = full.view((1, 0), (self.n, 1)).column(0).into_owned();
        let c_mat = full.view((1, 1), (self.n, self.n)).into_owned();
        (c, c_mat)
    }
}

/// Lower bound on the subproblem optimum implied by an arbitrary dual candidate.
pub fn certify_lower_bound(sdp: &SegmentSdp, dual: &DualCandidate) -> f64 {
    let dim = sdp.order();
    if dual.diag.len() != dim || dual.seg.len() != sdp.num_segments() {
        return f64::NEG_INFINITY;
    }
    let mut z = sdp.cost.clone();
    let mut objective = 0.0;
    for (k, &y) in dual.diag.iter().enumerate() {
        z[(k, k)] -= Complex64::new(y, 0.0);
        objective += y;
    }
    for j in 0..sdp.num_segments() {
        let w = dual.seg[j].max(0.0);
        let p = sdp.seg_pos[j];
        z[(p, 0)] -= sdp.seg_a[j] * (0.5 * w);
        z[(0, p)] -= sdp.seg_a[j].conj() * (0.5 * w);
        objective += w * sdp.seg_b[j];
    }
    if !z.iter().all(|v| v.re.is_finite() && v.im.is_finite()) || !objective.is_finite() {
        return f64::NEG_INFINITY;
    }
    let lam_min = hermitian_part(&z).symmetric_eigenvalues().min();
    sdp.scale * (objective + dim as f64 * lam_min.min(0.0))
}

#[derive(Debug, Clone, Copy)]
pub struct RelaxationOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Solves the segment relaxation of `prob` restricted to `bx`.
pub fn solve_segment_relaxation(
    prob: &QuadraticProblem,
    bx: &ArcBox,
    tol: f64,
) -> Result<RelaxationSolution> {
    solve_segment_relaxation_with(
        prob,
        bx,
        &RelaxationOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_segment_relaxation_with(
    prob: &QuadraticProblem,
    bx: &ArcBox,
    opts: &RelaxationOptions,
) -> Result<RelaxationSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(
            "relaxation tolerance must be positive".into(),
        ));
    }
    let sdp = SegmentSdp::new(prob, bx)?;
    let dim = sdp.order();
    let out = if dim == 1 {
        // Every coordinate is pinned: X = [1] and the bound is exact.
        ipm::IpmOutcome {
            x: CMatrix::identity(1, 1),
            y: vec![sdp.cost[(0, 0)].re],
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            converged: true,
        }
    } else {
        ipm::solve(&sdp, opts.tol, opts.max_iter)
    };

    // Rescale to an exactly unit diagonal; congruence keeps X PSD.
    let mut x = out.x.clone();
    let d: Vec<f64> = (0..dim)
        .map(|k| x[(k, k)].re.max(f64::MIN_POSITIVE).sqrt().recip())
        .collect();
    for r in 0..dim {
        for c in 0..dim {
            x[(r, c)] *= d[r] * d[c];
        }
    }
    let (c, c_mat) = sdp.lift(&x);
    let primal_value = c_mat
        .iter()
        .zip(prob.r_mat.iter())
        .map(|(x, r)| (x.conj() * r).re)
        .sum::<f64>();
    let mut dual = DualCandidate {
        diag: out.y[..dim].to_vec(),
        seg: out.y[dim..].to_vec(),
    };
    if sdp.cost.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        // Identically zero objective: the zero multiplier is exactly optimal.
        dual.diag
            .iter_mut()
            .chain(dual.seg.iter_mut())
            .for_each(|y| *y = 0.0);
    }
    let certified_bound = certify_lower_bound(&sdp, &dual);

    let (a, rhs) = segment_parameters(bx);
    let seg_violation = (0..bx.len())
        .filter(|&i| bx.width(i) < TAU)
        .map(|i| (rhs[i] - (a[i].conj() * c[i]).re).max(0.0))
        .fold(0.0, f64::max);
    let solution = RelaxationSolution {
        c,
        c_mat,
        primal_value,
        certified_bound,
        primal_residual: out.primal_residual.max(seg_violation),
        dual_residual: out.dual_residual,
        iterations: out.iterations,
        dual,
    };
    if out.converged {
        Ok(solution)
    } else {
        Err(Error::IterationLimit {
            iterations: out.iterations,
            primal_residual: out.primal_residual,
            dual_residual: out.dual_residual,
            gap: out.gap,
            partial: Box::new(solution),
        })
    }
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(mat: &CMatrix) -> Result<CMatrix> {
    if !mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if mat.nrows() != mat.ncols() {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    let asym = (mat - mat.adjoint()).norm();
    if asym > 1e-10 * mat.norm().max(1.0) {
        return Err(Error::NotHermitian(asym));
    }
    let eig = SymmetricEigen::new(hermitian_part(mat));
    let clamped = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0), 0.0));
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= clamped[j];
    }
    Ok(hermitian_part(&(scaled * u.adjoint())))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(mat: &CMatrix) -> f64 {
    hermitian_part(mat).symmetric_eigenvalues().min()
}

/// Bordered matrix `[[1, c^H], [c, C]]`.
pub fn bordered(c: &CVector, c_mat: &CMatrix) -> CMatrix {
    let n = c.len();
    let mut out = CMatrix::zeros(n + 1, n + 1);
    out[(0, 0)] = Complex64::new(1.0, 0.0);
    for i in 0..n {
        out[(i + 1, 0)] = c[i];
        out[(0, i + 1)] = c[i].conj();
    }
    out.view_mut((1, 1), (n, n)).copy_from(c_mat);
    out
}

/// Half-width of the widest arc, used to report how far a box is from a point.
pub fn max_half_width(bx: &ArcBox) -> f64 {
    (0..bx.len())
        .map(|i| 0.5 * bx.width(i))
        .fold(0.0, f64::max)
        .min(PI)
}
