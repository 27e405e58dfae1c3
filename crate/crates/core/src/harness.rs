//! Experiment configuration and Monte Carlo orchestration.
//!
//! Output files (all CSV, fixed column order):
//!
//! - `sweep_results.csv`: one row per (sweep value, realization, algorithm),
//!   columns `realization, algorithm, m, n_t, objective, se_bits, iterations,
//!   gap, wall_time_s`.
//! - `sweep_summary.csv`: per (sweep value, algorithm) means of the detail rows.
//! - `sweep_failures.csv`: cells whose algorithm returned an error.
//! - `convergence/trace_NNNN.csv`: `t, U, L` per realization, divided by the
//!   magnitude of the final upper bound.
//! - `convergence_summary.csv`: iteration counts and termination status.
//!
//! `gap` is only filled for branch-and-bound rows. `wall_time_s` is written
//! as 0 unless `record_wall_time` is set, so that reruns are byte-identical.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    bcd_solve, manifold_multistart, mrt_no_irs, sdr_solve, DEFAULT_BCD_SWEEPS, DEFAULT_BCD_TOL,
    DEFAULT_GRAD_TOL, DEFAULT_MANIFOLD_ITERS, DEFAULT_RANDOMIZATIONS,
};
use crate::bnb::{self, BnbOptions, SolveReport, Termination, DEFAULT_EPS, DEFAULT_NODE_CAP};
use crate::error::{Error, Result};
use crate::model::{
    build_quadratic, channel_rng, generate_channels_indexed, recover_solution, CVector,
    ChannelRealization, QuadraticProblem, SystemGeometry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bnb,
    Manifold,
    Sdr,
    Bcd,
    MrtNoIrs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Bnb,
        Algorithm::Manifold,
        Algorithm::Sdr,
        Algorithm::Bcd,
        Algorithm::MrtNoIrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bnb => "bnb",
            Algorithm::Manifold => "manifold",
            Algorithm::Sdr => "sdr",
            Algorithm::Bcd => "bcd",
            Algorithm::MrtNoIrs => "mrt_no_irs",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    M,
    NT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    pub node_cap: usize,
    pub time_cap_s: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            node_cap: DEFAULT_NODE_CAP,
            time_cap_s: bnb::DEFAULT_TIME_CAP.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: SystemGeometry,
    pub realizations: usize,
    pub seed: u64,
    /// Relative tolerance of branch-and-bound.
    pub eps: f64,
    pub algorithms: Vec<Algorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub caps: Caps,
    /// Gaussian randomization samples for SDR.
    pub n_rand: usize,
    /// Manifold starts: all-ones first, then random phases.
    pub manifold_starts: usize,
    pub output_dir: PathBuf,
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: SystemGeometry::default(),
            realizations: 50,
            seed: 0,
            eps: DEFAULT_EPS,
            algorithms: Algorithm::ALL.to_vec(),
            sweep: None,
            caps: Caps::default(),
            n_rand: DEFAULT_RANDOMIZATIONS,
            manifold_starts: 1,
            output_dir: PathBuf::from("results"),
            record_wall_time: false,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.realizations < 1 {
            return Err(config_error("realizations", "must be at least 1"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(config_error("eps", "must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(config_error("algorithms", "must not be empty"));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return Err(config_error(
                    &format!("algorithms[{i}]"),
                    format!("duplicate algorithm `{a}`"),
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(config_error("sweep.values", "must not be empty"));
            }
            for (i, w) in sweep.values.windows(2).enumerate() {
                if w[1] <= w[0] {
                    return Err(config_error(
                        &format!("sweep.values[{}]", i + 1),
                        "values must be strictly increasing",
                    ));
                }
            }
            if sweep.variable == SweepVariable::NT && sweep.values[0] < 1 {
                return Err(config_error("sweep.values[0]", "n_t must be at least 1"));
            }
        }
        if self.caps.node_cap < 1 {
            return Err(config_error("caps.node_cap", "must be at least 1"));
        }
        if !(self.caps.time_cap_s.is_finite() && self.caps.time_cap_s > 0.0) {
            return Err(config_error("caps.time_cap_s", "must be positive"));
        }
        if self.n_rand < 1 {
            return Err(config_error("n_rand", "must be at least 1"));
        }
        if self.manifold_starts < 1 {
            return Err(config_error("manifold_starts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn bnb_options(&self) -> BnbOptions {
        BnbOptions {
            eps: self.eps,
            node_cap: self.caps.node_cap,
            time_cap: Duration::from_secs_f64(self.caps.time_cap_s),
            ..Default::default()
        }
    }

    /// The `(m, n_t)` points of the sweep, or the geometry's own point.
    pub fn points(&self) -> Vec<(usize, usize)> {
        match &self.sweep {
            None => vec![(self.geometry.m, self.geometry.n_t)],
            Some(s) => s
                .values
                .iter()
                .map(|&x| match s.variable {
                    SweepVariable::M => (x, self.geometry.n_t),
                    SweepVariable::NT => (self.geometry.m, x),
                })
                .collect(),
        }
    }
}

/// Parses a JSON config; unknown keys and invalid values are reported with
/// their field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub realization: usize,
    pub algorithm: Algorithm,
    pub m: usize,
    pub n_t: usize,
    pub objective: f64,
    pub se_bits: f64,
    pub iterations: usize,
    /// Certified relative gap; branch-and-bound only.
    pub gap: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRow {
    pub realization: usize,
    pub algorithm: Algorithm,
    pub m: usize,
    pub n_t: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub m: usize,
    pub n_t: usize,
    pub runs: usize,
    pub failures: usize,
    pub cap_hits: usize,
    pub mean_objective: f64,
    pub mean_se_bits: f64,
    pub mean_iterations: f64,
}

/// Outcome of every configured algorithm on one channel draw.
#[derive(Debug, Clone, Default)]
pub struct CellOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
    /// Algorithms whose branch-and-bound run stopped on a cap.
    pub cap_hits: Vec<Algorithm>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
    pub summary: Vec<SummaryRow>,
}

const MANIFOLD_SALT: u64 = 0x6d61_6e69_666f_6c64;
const SDR_SALT: u64 = 0x7364_7200_0000_0000;

/// Seed for an algorithm's own randomness, independent of the channel stream.
fn derived_seed(seed: u64, salt: u64, realization: usize) -> u64 {
    channel_rng(seed ^ salt, realization as u64).next_u64()
}

/// Runs every configured algorithm on the same channel draw.
pub fn run_cell(
    cfg: &ExperimentConfig,
    ch: &ChannelRealization,
    realization: usize,
) -> CellOutcome {
    let mut out = CellOutcome::default();
    let (m, n_t) = (ch.m(), ch.n_t());
    let prob = match build_quadratic(ch) {
        Ok(p) => p,
        Err(e) => {
            for &algorithm in &cfg.algorithms {
                out.failures.push(FailureRow {
                    realization,
                    algorithm,
                    m,
                    n_t,
                    error: e.to_string(),
                });
            }
            return out;
        }
    };
    for &algorithm in &cfg.algorithms {
        let start = Instant::now();
        match run_algorithm(cfg, algorithm, ch, &prob, realization) {
            Ok(run) => {
                if run.capped {
                    out.cap_hits.push(algorithm);
                }
                let wall = if cfg.record_wall_time {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                out.rows.push(ResultRow {
                    realization,
                    algorithm,
                    m,
                    n_t,
                    objective: run.objective,
                    se_bits: run.se_bits,
                    iterations: run.iterations,
                    gap: run.gap,
                    wall_time_s: wall,
                });
            }
            Err(e) => {
                log::warn!(
                    "{algorithm} failed on realization {realization} (m={m}, n_t={n_t}): {e}"
                );
                out.failures.push(FailureRow {
                    realization,
                    algorithm,
                    m,
                    n_t,
                    error: e.to_string(),
                });
            }
        }
    }
    out
}

struct AlgorithmRun {
    objective: f64,
    se_bits: f64,
    iterations: usize,
    gap: Option<f64>,
    capped: bool,
}

fn run_algorithm(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    ch: &ChannelRealization,
    prob: &QuadraticProblem,
    realization: usize,
) -> Result<AlgorithmRun> {
    let ones = CVector::from_element(prob.dim(), Complex64::new(1.0, 0.0));
    let from_v = |v: &CVector, objective: f64, iterations: usize| -> Result<AlgorithmRun> {
        let sol = recover_solution(ch, v)?;
        Ok(AlgorithmRun {
            objective,
            se_bits: sol.se_bits,
            iterations,
            gap: None,
            capped: false,
        })
    };
    match algorithm {
        Algorithm::Bnb => {
            let report = bnb::solve_with(prob, &cfg.bnb_options())?;
            let mut run = from_v(&report.v_star, report.objective, report.iterations)?;
            run.gap = Some(report.gap);
            run.capped = !report.converged();
            Ok(run)
        }
        Algorithm::Manifold => {
            let seed = derived_seed(cfg.seed, MANIFOLD_SALT, realization);
            let res = manifold_multistart(
                prob,
                cfg.manifold_starts,
                seed,
                DEFAULT_MANIFOLD_ITERS,
                DEFAULT_GRAD_TOL,
            )?;
            from_v(&res.v, res.objective, res.iterations)
        }
        Algorithm::Sdr => {
            let res = sdr_solve(
                prob,
                cfg.n_rand,
                derived_seed(cfg.seed, SDR_SALT, realization),
            )?;
            from_v(&res.v, res.objective, res.iterations)
        }
        Algorithm::Bcd => {
            let res = bcd_solve(prob, &ones, DEFAULT_BCD_SWEEPS, DEFAULT_BCD_TOL)?;
            from_v(&res.v, res.objective, res.iterations)
        }
        Algorithm::MrtNoIrs => {
            let sol = mrt_no_irs(ch);
            Ok(AlgorithmRun {
                objective: sol.objective,
                se_bits: sol.se_bits,
                iterations: 0,
                gap: None,
                capped: false,
            })
        }
    }
}

/// Channel for `realization` at every sweep point: drawn once at the largest
/// dimensions of the sweep and truncated, so that points share their draws.
pub fn sweep_channels(
    cfg: &ExperimentConfig,
    realization: usize,
) -> Result<Vec<ChannelRealization>> {
    let points = cfg.points();
    let m_max = points.iter().map(|p| p.0).max().unwrap_or(cfg.geometry.m);
    let n_max = points.iter().map(|p| p.1).max().unwrap_or(cfg.geometry.n_t);
    let geom = SystemGeometry {
        m: m_max,
        n_t: n_max,
        ..cfg.geometry.clone()
    };
    let full = generate_channels_indexed(&geom, cfg.seed, realization as u64)?;
    points
        .iter()
        .map(|&(m, n_t)| full.truncate(m, n_t))
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "realization",
    "algorithm",
    "m",
    "n_t",
    "objective",
    "se_bits",
    "iterations",
    "gap",
    "wall_time_s",
];
const FAILURE_COLUMNS: [&str; 5] = ["realization", "algorithm", "m", "n_t", "error"];
const SUMMARY_COLUMNS: [&str; 9] = [
    "algorithm",
    "m",
    "n_t",
    "runs",
    "failures",
    "cap_hits",
    "mean_objective",
    "mean_se_bits",
    "mean_iterations",
];

fn summarize(cfg: &ExperimentConfig, cells: &[(usize, CellOutcome)]) -> Vec<SummaryRow> {
    let mut summary = Vec::new();
    for (p, &(m, n_t)) in cfg.points().iter().enumerate() {
        for &algorithm in &cfg.algorithms {
            let in_point = cells.iter().filter(|(q, _)| *q == p).map(|(_, c)| c);
            let mut rows = Vec::new();
            let mut failures = 0;
            let mut cap_hits = 0;
            for cell in in_point {
                rows.extend(cell.rows.iter().filter(|r| r.algorithm == algorithm));
                failures += cell
                    .failures
                    .iter()
                    .filter(|f| f.algorithm == algorithm)
                    .count();
                cap_hits += cell.cap_hits.iter().filter(|&&a| a == algorithm).count();
            }
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&ResultRow) -> f64| {
                if rows.is_empty() {
                    f64::NAN
                } else {
                    rows.iter().map(|r| f(r)).sum::<f64>() / n
                }
            };
            summary.push(SummaryRow {
                algorithm,
                m,
                n_t,
                runs: rows.len(),
                failures,
                cap_hits,
                mean_objective: mean(&|r| r.objective),
                mean_se_bits: mean(&|r| r.se_bits),
                mean_iterations: mean(&|r| r.iterations as f64),
            });
        }
    }
    summary
}

/// Runs every algorithm on every (sweep point, realization) cell without
/// writing files. Without a sweep axis the geometry's own point is used.
pub fn compute_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let points = cfg.points().len();
    let per_realization: Vec<Result<Vec<ChannelRealization>>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|k| sweep_channels(cfg, k))
        .collect();
    let channels = per_realization.into_iter().collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..points)
        .flat_map(|p| (0..cfg.realizations).map(move |k| (p, k)))
        .collect();
    let cells: Vec<(usize, CellOutcome)> = jobs
        .par_iter()
        .map(|&(p, k)| (p, run_cell(cfg, &channels[k][p], k)))
        .collect();

    let summary = summarize(cfg, &cells);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (_, cell) in cells {
        rows.extend(cell.rows);
        failures.extend(cell.failures);
    }
    Ok(SweepOutput {
        rows,
        failures,
        summary,
    })
}

/// [`compute_sweep`] plus `sweep_results.csv`, `sweep_summary.csv` and
/// `sweep_failures.csv` in the output directory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    if cfg.sweep.is_none() {
        return Err(config_error("sweep", "a sweep axis is required"));
    }
    let out = compute_sweep(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_csv(
        &cfg.output_dir.join("sweep_results.csv"),
        &out.rows,
        &RESULT_COLUMNS,
    )?;
    write_csv(
        &cfg.output_dir.join("sweep_summary.csv"),
        &out.summary,
        &SUMMARY_COLUMNS,
    )?;
    write_csv(
        &cfg.output_dir.join("sweep_failures.csv"),
        &out.failures,
        &FAILURE_COLUMNS,
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub realization: usize,
    pub m: usize,
    pub n_t: usize,
    pub iterations: usize,
    pub nodes_explored: usize,
    pub max_depth: usize,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub status: Termination,
    pub wall_time_s: f64,
}

const CONVERGENCE_COLUMNS: [&str; 11] = [
    "realization",
    "m",
    "n_t",
    "iterations",
    "nodes_explored",
    "max_depth",
    "objective",
    "lower_bound",
    "gap",
    "status",
    "wall_time_s",
];

#[derive(Debug, Clone)]
pub struct ConvergenceOutput {
    pub reports: Vec<SolveReport>,
    pub summary: Vec<ConvergenceRow>,
}

impl ConvergenceOutput {
    /// Median iteration count over realizations (mean of the middle pair for
    /// even counts).
    pub fn median_iterations(&self) -> f64 {
        median(self.reports.iter().map(|r| r.iterations as f64).collect())
    }

    pub fn cap_hits(&self) -> usize {
        self.reports.iter().filter(|r| !r.converged()).count()
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[derive(Serialize)]
struct TraceRow {
    t: usize,
    #[serde(rename = "U")]
    upper: f64,
    #[serde(rename = "L")]
    lower: f64,
}

/// Bound trace divided by `|final U|` (left unscaled when that is zero).
pub fn normalized_trace(report: &SolveReport) -> Vec<(usize, f64, f64)> {
    let last = report.trace.last().map_or(0.0, |p| p.upper.abs());
    let s = if last > 0.0 { last } else { 1.0 };
    report
        .trace
        .iter()
        .map(|p| (p.iteration, p.upper / s, p.lower / s))
        .collect()
}

/// Runs branch-and-bound on every realization at the geometry's `(m, n_t)`
/// without writing files.
pub fn compute_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceOutput> {
    cfg.validate()?;
    if cfg.sweep.is_some() {
        return Err(config_error(
            "sweep",
            "convergence runs use the single point given by the geometry",
        ));
    }
    let opts = cfg.bnb_options();
    let results: Vec<Result<SolveReport>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|k| {
            let ch = generate_channels_indexed(&cfg.geometry, cfg.seed, k as u64)?;
            bnb::solve_with(&build_quadratic(&ch)?, &opts)
        })
        .collect();
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = reports
        .iter()
        .enumerate()
        .map(|(k, r)| ConvergenceRow {
            realization: k,
            m: cfg.geometry.m,
            n_t: cfg.geometry.n_t,
            iterations: r.iterations,
            nodes_explored: r.nodes_explored,
            max_depth: r.max_depth,
            objective: r.objective,
            lower_bound: r.lower_bound,
            gap: r.gap,
            status: r.status,
            wall_time_s: if cfg.record_wall_time {
                r.wall_time
            } else {
                0.0
            },
        })
        .collect();
    Ok(ConvergenceOutput { reports, summary })
}

/// [`compute_convergence`] plus one trace file per realization under
/// `convergence/` and `convergence_summary.csv`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceOutput> {
    let out = compute_convergence(cfg)?;
    let dir = cfg.output_dir.join("convergence");
    fs::create_dir_all(&dir)?;
    for (k, report) in out.reports.iter().enumerate() {
        let rows: Vec<TraceRow> = normalized_trace(report)
            .into_iter()
            .map(|(t, upper, lower)| TraceRow { t, upper, lower })
            .collect();
        write_csv(
            &dir.join(format!("trace_{k:04}.csv")),
            &rows,
            &["t", "U", "L"],
        )?;
    }
    write_csv(
        &cfg.output_dir.join("convergence_summary.csv"),
        &out.summary,
        &CONVERGENCE_COLUMNS,
    )?;
    Ok(out)
}
