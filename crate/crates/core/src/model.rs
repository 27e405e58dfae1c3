//! System model of IRS-assisted single-user MISO downlink.
//!
//! Channels are drawn as independent Rayleigh fading scaled by a
//! distance-dependent path loss. The beamforming problem is homogenized
//! into `minimize v^H R v` over `M + 1` unit-modulus coordinates, where the
//! last coordinate is an auxiliary phase `t` absorbing the direct link.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Speed of light in m/s.
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance on `|v_i| = 1` accepted by [`recover_solution`].
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Deployment geometry and link budget. Distances are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemGeometry {
    /// Number of AP antennas.
    pub n_t: usize,
    /// Number of IRS elements.
    pub m: usize,
    /// AP to user distance.
    pub r_au: f64,
    /// AP to IRS distance.
    pub r_ai: f64,
    /// IRS to user distance.
    pub r_iu: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Reference distance of the path-loss model.
    pub d0: f64,
    pub carrier_ghz: f64,
    pub p_dbm: f64,
    pub noise_dbm: f64,
    /// Path loss at `d0` in dB; the free-space value at the carrier when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pl0_db: Option<f64>,
}

impl Default for SystemGeometry {
    fn default() -> Self {
        Self {
            n_t: 4,
            m: 8,
            r_au: 50.0,
            r_ai: 30.0,
            r_iu: 20.0,
            alpha: 3.0,
            d0: 10.0,
            carrier_ghz: 2.4,
            p_dbm: 10.0,
            noise_dbm: -90.0,
            pl0_db: None,
        }
    }
}

impl SystemGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| {
            Err(Error::Config {
                path: format!("geometry.{field}"),
                message: why.into(),
            })
        };
        if self.n_t < 1 {
            return bad("n_t", "must be at least 1");
        }
        for (name, d) in [
            ("r_au", self.r_au),
            ("r_ai", self.r_ai),
            ("r_iu", self.r_iu),
            ("d0", self.d0),
        ] {
            if !(d.is_finite() && d > 0.0) {
                return bad(name, "must be a positive distance");
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad("alpha", "must be positive");
        }
        if !(self.carrier_ghz.is_finite() && self.carrier_ghz > 0.0) {
            return bad("carrier_ghz", "must be positive");
        }
        if !self.p_dbm.is_finite() {
            return bad("p_dbm", "must be finite");
        }
        if !self.noise_dbm.is_finite() {
            return bad("noise_dbm", "must be finite");
        }
        if self.pl0_db.is_some_and(|v| !v.is_finite()) {
            return bad("pl0_db", "must be finite");
        }
        Ok(())
    }

    /// Gain at the reference distance: `pl0_db` when set, otherwise the
    /// free-space value `(lambda / (4 pi d0))^2`.
    pub fn reference_path_loss(&self) -> f64 {
        if let Some(pl0_db) = self.pl0_db {
            return 10f64.powf(pl0_db / 10.0);
        }
        let wavelength = SPEED_OF_LIGHT / (self.carrier_ghz * 1e9);
        (wavelength / (4.0 * std::f64::consts::PI * self.d0)).powi(2)
    }

    /// Linear large-scale gain `PL0 * (d / d0)^-alpha`.
    pub fn path_loss(&self, distance: f64) -> f64 {
        self.reference_path_loss() * (distance / self.d0).powf(-self.alpha)
    }
}

/// One draw of the AP-IRS, IRS-user and AP-user channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// AP to IRS channel, `M x N_t`.
    pub g: CMatrix,
    /// IRS to user channel, length `M`.
    pub h_r: CVector,
    /// Direct AP to user channel, length `N_t`.
    pub h: CVector,
    pub p_watt: f64,
    pub sigma2_watt: f64,
}

impl ChannelRealization {
    pub fn new(
        g: CMatrix,
        h_r: CVector,
        h: CVector,
        p_watt: f64,
        sigma2_watt: f64,
    ) -> Result<Self> {
        if g.nrows() != h_r.len() || g.ncols() != h.len() {
            return Err(Error::DimensionMismatch(format!(
                "G is {}x{}, h_r has {} entries, h has {}",
                g.nrows(),
                g.ncols(),
                h_r.len(),
                h.len()
            )));
        }
        if h.is_empty() {
            return Err(Error::InvalidInput(
                "direct channel must have at least one antenna".into(),
            ));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !(g.iter().all(finite) && h_r.iter().all(finite) && h.iter().all(finite)) {
            return Err(Error::InvalidInput("channel entries must be finite".into()));
        }
        if !(p_watt.is_finite() && p_watt > 0.0 && sigma2_watt.is_finite() && sigma2_watt > 0.0) {
            return Err(Error::InvalidInput("powers must be positive".into()));
        }
        Ok(Self {
            g,
            h_r,
            h,
            p_watt,
            sigma2_watt,
        })
    }

    pub fn m(&self) -> usize {
        self.h_r.len()
    }

    pub fn n_t(&self) -> usize {
        self.h.len()
    }

    /// Keeps the first `m` IRS elements and the first `n_t` antennas.
    ///
    /// Used by sweeps so that every sweep point is a sub-system of the same
    /// channel draw.
    pub fn truncate(&self, m: usize, n_t: usize) -> Result<Self> {
        if m > self.m() || n_t > self.n_t() || n_t == 0 {
            return Err(Error::DimensionMismatch(format!(
                "cannot truncate {}x{} realization to {}x{}",
                self.m(),
                self.n_t(),
                m,
                n_t
            )));
        }
        Ok(Self {
            g: self.g.view((0, 0), (m, n_t)).into_owned(),
            h_r: self.h_r.rows(0, m).into_owned(),
            h: self.h.rows(0, n_t).into_owned(),
            p_watt: self.p_watt,
            sigma2_watt: self.sigma2_watt,
        })
    }

    /// Cascaded channel `G^H diag(h_r)`, an `N_t x M` matrix.
    pub fn cascaded(&self) -> CMatrix {
        let mut b = self.g.adjoint();
        for (j, mut col) in b.column_iter_mut().enumerate() {
            col *= self.h_r[j];
        }
        b
    }
}

/// Seeds the channel generator for realization `index` of a run with base
/// seed `seed`. Each realization reads its own ChaCha20 stream, so results do
/// not depend on the order in which realizations are evaluated.
pub fn channel_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn complex_gaussian<R: rand::Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// Draws a realization for stream 0 of `seed`.
pub fn generate_channels(geom: &SystemGeometry, seed: u64) -> Result<ChannelRealization> {
    generate_channels_indexed(geom, seed, 0)
}

/// Draws a realization from stream `index` of `seed`.
///
/// Draw order is `h`, then `G` row-major, then `h_r`.
pub fn generate_channels_indexed(
    geom: &SystemGeometry,
    seed: u64,
    index: u64,
) -> Result<ChannelRealization> {
    geom.validate()?;
    let mut rng = channel_rng(seed, index);
    let pl_direct = geom.path_loss(geom.r_au);
    let pl_ai = geom.path_loss(geom.r_ai);
    let pl_iu = geom.path_loss(geom.r_iu);

    let h = CVector::from_iterator(
        geom.n_t,
        (0..geom.n_t).map(|_| complex_gaussian(&mut rng, pl_direct)),
    );
    let mut g = CMatrix::zeros(geom.m, geom.n_t);
    for i in 0..geom.m {
        for j in 0..geom.n_t {
            g[(i, j)] = complex_gaussian(&mut rng, pl_ai);
        }
    }
    let h_r = CVector::from_iterator(
        geom.m,
        (0..geom.m).map(|_| complex_gaussian(&mut rng, pl_iu)),
    );
    ChannelRealization::new(
        g,
        h_r,
        h,
        dbm_to_watt(geom.p_dbm),
        dbm_to_watt(geom.noise_dbm),
    )
}

/// The homogenized instance `minimize v^H R v` s.t. `|v_i| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    /// Hermitian `(M+1) x (M+1)` matrix with a zero bottom-right corner.
    pub r_mat: CMatrix,
    /// `||h||^2`; the received signal power is `offset - v^H R v`.
    pub offset: f64,
    pub m: usize,
}

impl QuadraticProblem {
    /// Wraps an arbitrary Hermitian matrix. The matrix is symmetrized.
    pub fn from_matrix(r_mat: CMatrix, offset: f64) -> Result<Self> {
        if r_mat.nrows() != r_mat.ncols() || r_mat.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "R must be square and non-empty, got {}x{}",
                r_mat.nrows(),
                r_mat.ncols()
            )));
        }
        let asym = (&r_mat - r_mat.adjoint()).norm();
        if asym > 1e-10 * r_mat.norm() {
            return Err(Error::NotHermitian(asym));
        }
        let m = r_mat.nrows() - 1;
        Ok(Self {
            r_mat: hermitian_part(&r_mat),
            offset,
            m,
        })
    }

    pub fn dim(&self) -> usize {
        self.m + 1
    }

    /// Frobenius norm of `R`.
    pub fn scale(&self) -> f64 {
        self.r_mat.norm()
    }
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Builds `R` of the homogenized problem together with the offset `||h||^2`.
pub fn build_quadratic(ch: &ChannelRealization) -> Result<QuadraticProblem> {
    let m = ch.m();
    if ch.g.nrows() != m || ch.g.ncols() != ch.n_t() {
        return Err(Error::DimensionMismatch("channel blocks disagree".into()));
    }
    // b = diag(h_r^H) G, so the top-left block is b b^H and the border is b h.
    let b = ch.cascaded().adjoint();
    let top_left = &b * b.adjoint();
    let border = &b * &ch.h;
    let mut r = CMatrix::zeros(m + 1, m + 1);
    r.view_mut((0, 0), (m, m)).copy_from(&(-top_left));
    for i in 0..m {
        r[(i, m)] = -border[i];
        r[(m, i)] = -border[i].conj();
    }
    let mut r = hermitian_part(&r);
    r[(m, m)] = Complex64::new(0.0, 0.0);
    Ok(QuadraticProblem {
        r_mat: r,
        offset: ch.h.norm_squared(),
        m,
    })
}

/// `v^H R v` as a complex number (real for Hermitian `R`).
pub fn quadratic_form(r: &CMatrix, v: &CVector) -> Complex64 {
    v.dotc(&(r * v))
}

/// Evaluates `f(v) = v^H R v`.
pub fn objective(prob: &QuadraticProblem, v: &CVector) -> Result<f64> {
    if v.len() != prob.dim() {
        return Err(Error::DimensionMismatch(format!(
            "v has {} entries, expected {}",
            v.len(),
            prob.dim()
        )));
    }
    let q = quadratic_form(&prob.r_mat, v);
    let scale = prob.scale() * v.norm_squared();
    if q.im.abs() > 1e-9 * scale {
        return Err(Error::NotHermitian(q.im.abs()));
    }
    Ok(q.re)
}

/// Beamformers recovered from a unit-modulus solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamformingSolution {
    /// IRS phase shifts in radians.
    pub theta: Vec<f64>,
    /// Active beamformer at the AP.
    #[serde(serialize_with = "serialize_cvector")]
    pub f: CVector,
    /// Spectral efficiency in bit/s/Hz.
    pub se_bits: f64,
    /// `f(v)` of the solution; zero for the no-IRS reference.
    pub objective: f64,
}

pub(crate) fn serialize_cvector<S: serde::Serializer>(
    v: &CVector,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v.iter() {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn spectral_efficiency(received_power: f64, sigma2_watt: f64) -> f64 {
    (1.0 + received_power.max(0.0) / sigma2_watt).log2()
}

/// MRT beamformer `sqrt(P) e / ||e||` on an effective channel `e`.
fn mrt(effective: &CVector, p_watt: f64) -> CVector {
    let norm = effective.norm();
    if norm > 0.0 {
        effective.scale(p_watt.sqrt() / norm)
    } else {
        let mut f = CVector::zeros(effective.len());
        f[0] = Complex64::new(p_watt.sqrt(), 0.0);
        f
    }
}

/// Recovers the phase shifts, the MRT beamformer and the spectral efficiency.
///
/// `v` is first de-rotated so that its auxiliary coordinate equals one, which
/// makes the output independent of the global phase of `v`.
pub fn recover_solution(ch: &ChannelRealization, v: &CVector) -> Result<BeamformingSolution> {
    let m = ch.m();
    if v.len() != m + 1 {
        return Err(Error::DimensionMismatch(format!(
            "v has {} entries, expected {}",
            v.len(),
            m + 1
        )));
    }
    if let Some((i, z)) = v
        .iter()
        .enumerate()
        .find(|(_, z)| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL)
    {
        return Err(Error::NotUnitModulus {
            index: i,
            modulus: z.norm(),
        });
    }
    let t_conj = v[m].conj();
    let x = CVector::from_iterator(m, v.iter().take(m).map(|z| z * t_conj));
    let theta: Vec<f64> = x.iter().map(|z| -z.arg()).collect();

    let effective = ch.cascaded() * &x + &ch.h;
    let f = mrt(&effective, ch.p_watt);

    // Received amplitude from the physical model: (h_r^H Phi G + h^H) f.
    let phi = CVector::from_iterator(m, theta.iter().map(|&t| Complex64::from_polar(1.0, t)));
    let row = ch.h_r.adjoint() * CMatrix::from_diagonal(&phi) * &ch.g + ch.h.adjoint();
    let gain = (row * &f)[(0, 0)].norm_sqr();

    Ok(BeamformingSolution {
        theta,
        se_bits: spectral_efficiency(gain, ch.sigma2_watt),
        objective: ch.h.norm_squared() - effective.norm_squared(),
        f,
    })
}

/// Spectral efficiency implied by an objective value, `log2(1 + P (offset - f) / sigma^2)`.
pub fn se_from_objective(prob: &QuadraticProblem, ch: &ChannelRealization, value: f64) -> f64 {
    spectral_efficiency(ch.p_watt * (prob.offset - value), ch.sigma2_watt)
}

/// Per-coordinate normalization `z / |z|`; zero entries map to `fallback[i]`.
pub fn unt(c: &CVector, fallback: impl Fn(usize) -> Complex64) -> CVector {
    CVector::from_iterator(
        c.len(),
        c.iter().enumerate().map(|(i, z)| {
            let n = z.norm();
            if n > 0.0 && n.is_finite() {
                z / n
            } else {
                fallback(i)
            }
        }),
    )
}
