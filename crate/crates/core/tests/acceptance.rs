//! Acceptance criteria. Runs as a plain binary so that the per-criterion
//! verdicts are printed on every `cargo test` run.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Duration;

use num_complex::Complex64;
use rand::Rng;

use irs_bnb::bnb::{self, relative_gap, BnbOptions, SolveReport};
use irs_bnb::harness::{self, Algorithm, Caps, ExperimentConfig, ResultRow, Sweep, SweepVariable};
use irs_bnb::model::{
    build_quadratic, channel_rng, generate_channels_indexed, objective, CVector, SystemGeometry,
};
use irs_bnb::oracle::{analytic_m1, grid_search, GridSpec};
use irs_bnb::relaxation::{solve_segment_relaxation, ArcBox, DEFAULT_TOL};

const EPS: f64 = 1e-5;
const SEED: u64 = 20_190_601;

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Flag,
}

struct Outcome {
    id: usize,
    name: &'static str,
    verdict: Verdict,
    detail: String,
}

fn outcome(id: usize, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn report_line(o: &Outcome) {
    let tag = match o.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Flag => "FLAG",
    };
    println!("[{tag}] criterion {} ({}): {}", o.id, o.name, o.detail);
}

fn opts() -> BnbOptions {
    BnbOptions {
        eps: EPS,
        time_cap: Duration::from_secs(600),
        ..Default::default()
    }
}

fn geometry(m: usize, n_t: usize) -> SystemGeometry {
    SystemGeometry {
        m,
        n_t,
        ..Default::default()
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// BnB against exhaustive search, and against the closed form at one element.
fn oracle_equivalence(runs: &mut Vec<SolveReport>) -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for m in 1..=3 {
        for n_t in [2, 4] {
            let points = if m <= 2 { 4096 } else { 256 };
            for k in 0..20 {
                let ch = generate_channels_indexed(&geometry(m, n_t), SEED, k).unwrap();
                let prob = build_quadratic(&ch).unwrap();
                let report = bnb::solve_with(&prob, &opts()).unwrap();
                let grid = grid_search(&prob, GridSpec::new(points, m).unwrap()).unwrap();
                let (u, l) = (report.objective, report.lower_bound);
                let slack = EPS * u.abs().max(l.abs()) + grid.error_bound;
                let mut ok = report.converged() && (u - grid.value).abs() <= slack;
                if m == 1 {
                    let exact = analytic_m1(&ch).unwrap();
                    ok &= (u - exact).abs() <= 1e-6 * exact.abs();
                }
                if !ok {
                    failures.push(format!(
                        "m={m} n_t={n_t} k={k}: U={u:e} grid={:e}",
                        grid.value
                    ));
                }
                checked += 1;
                runs.push(report);
            }
        }
    }
    outcome(
        1,
        "oracle equivalence",
        failures.is_empty(),
        format!(
            "{} of {checked} instances agree with grid search{}",
            checked - failures.len(),
            list(&failures)
        ),
    )
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!(
            "; first mismatches: {}",
            items
                .iter()
                .take(3)
                .cloned()
                .collect::<Vec<_>>()
                .join(" | ")
        )
    }
}

/// Monotone traces and final gap on every run collected by the other criteria.
fn bound_behaviour(runs: &[SolveReport]) -> Outcome {
    let mut bad = 0;
    for r in runs {
        let upper_ok = r.trace.windows(2).all(|w| w[1].upper <= w[0].upper);
        let lower_ok = r.trace.windows(2).all(|w| w[1].lower >= w[0].lower);
        let last = r.trace.last().unwrap();
        let gap_ok = relative_gap(last.upper, last.lower) <= EPS && r.gap <= EPS;
        if !(upper_ok && lower_ok && gap_ok) {
            bad += 1;
        }
    }
    outcome(
        2,
        "bound behaviour",
        bad == 0 && !runs.is_empty(),
        format!(
            "{} of {} traces monotone with final gap <= {EPS:e}",
            runs.len() - bad,
            runs.len()
        ),
    )
}

/// Median iteration count at M = 8 over 10 realizations.
fn convergence_scale(runs: &mut Vec<SolveReport>) -> Outcome {
    let cfg = ExperimentConfig {
        geometry: geometry(8, 4),
        realizations: 10,
        seed: SEED,
        eps: EPS,
        caps: Caps {
            time_cap_s: 600.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = harness::compute_convergence(&cfg).unwrap();
    let median = out.median_iterations();
    let caps = out.cap_hits();
    let counts: Vec<usize> = out.reports.iter().map(|r| r.iterations).collect();
    runs.extend(out.reports);
    outcome(
        3,
        "convergence scale",
        (300.0..=40_000.0).contains(&median) && caps == 0,
        format!(
            "median iterations {median} (band [300, 40000]), cap hits {caps}, counts {counts:?}"
        ),
    )
}

fn rows_for(rows: &[ResultRow], algorithm: Algorithm) -> Vec<&ResultRow> {
    rows.iter().filter(|r| r.algorithm == algorithm).collect()
}

/// Relaxed root value <= BnB <= every heuristic, then the manifold SE ratio.
fn sandwich_and_manifold(runs: &mut Vec<SolveReport>) -> (Outcome, Outcome) {
    let cfg = ExperimentConfig {
        geometry: geometry(6, 4),
        realizations: 100,
        seed: SEED,
        eps: EPS,
        algorithms: vec![
            Algorithm::Bnb,
            Algorithm::Manifold,
            Algorithm::Bcd,
            Algorithm::Sdr,
        ],
        manifold_starts: 3,
        ..Default::default()
    };
    let out = harness::compute_sweep(&cfg).unwrap();
    let bnb_rows = rows_for(&out.rows, Algorithm::Bnb);
    let mut violations = Vec::new();
    let mut disordered = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..cfg.realizations {
        let prob =
            build_quadratic(&generate_channels_indexed(&cfg.geometry, cfg.seed, k as u64).unwrap())
                .unwrap();
        let report = bnb::solve_with(&prob, &cfg.bnb_options()).unwrap();
        let root = solve_segment_relaxation(&prob, &ArcBox::full(prob.dim()), DEFAULT_TOL).unwrap();
        // 1e-6 slack on the problem normalized to unit Frobenius norm.
        let slack = 1e-6 * prob.scale();
        let bnb_row = bnb_rows[k];
        assert_eq!(bnb_row.objective, report.objective);
        if root.certified_bound > report.objective + slack {
            violations.push(format!("k={k}: root bound above BnB"));
        }
        for a in [Algorithm::Manifold, Algorithm::Bcd, Algorithm::Sdr] {
            let row = out
                .rows
                .iter()
                .find(|r| r.realization == k && r.algorithm == a)
                .unwrap();
            if report.objective > row.objective + slack {
                violations.push(format!(
                    "k={k}: BnB above {a} by {:e}",
                    (report.objective - row.objective) / prob.scale()
                ));
            }
            if a == Algorithm::Manifold {
                ratios.push(row.se_bits / bnb_row.se_bits);
            }
        }
        if violations
            .last()
            .is_some_and(|v| v.starts_with(&format!("k={k}:")))
        {
            disordered.push(k);
        }
        runs.push(report);
    }
    let sandwich = outcome(
        4,
        "baseline ordering",
        violations.is_empty() && out.failures.is_empty(),
        format!(
            "{} of {} realizations ordered, {} solver failures{}",
            cfg.realizations - disordered.len(),
            cfg.realizations,
            out.failures.len(),
            list(&violations)
        ),
    );
    let ratio = mean(ratios.iter().copied());
    let manifold = Outcome {
        id: 5,
        name: "manifold near-optimality (soft)",
        verdict: if ratio >= 0.99 {
            Verdict::Pass
        } else {
            Verdict::Flag
        },
        detail: format!("mean SE_manifold / SE_bnb = {ratio:.6} (floor 0.99)"),
    };
    (sandwich, manifold)
}

/// IRS benefit at M = 5 and strictly increasing BnB SE over M = 1..8.
fn irs_benefit() -> Outcome {
    let cfg = ExperimentConfig {
        geometry: SystemGeometry {
            n_t: 5,
            r_ai: 50.0,
            r_au: 50.0,
            r_iu: 20.0,
            ..Default::default()
        },
        realizations: 50,
        seed: SEED,
        eps: EPS,
        algorithms: vec![Algorithm::Bnb, Algorithm::MrtNoIrs],
        sweep: Some(Sweep {
            variable: SweepVariable::M,
            values: (1..=8).collect(),
        }),
        ..Default::default()
    };
    let out = harness::compute_sweep(&cfg).unwrap();
    let avg = |alg: Algorithm, m: usize| {
        out.summary
            .iter()
            .find(|s| s.algorithm == alg && s.m == m)
            .map(|s| s.mean_se_bits)
            .unwrap()
    };
    let bnb_se: Vec<f64> = (1..=8).map(|m| avg(Algorithm::Bnb, m)).collect();
    let mrt = avg(Algorithm::MrtNoIrs, 5);
    let increasing = bnb_se.windows(2).all(|w| w[1] > w[0]);
    let benefit = bnb_se[4] > mrt;
    let complete = out.failures.is_empty() && out.summary.iter().all(|s| s.cap_hits == 0);
    outcome(
        6,
        "IRS benefit",
        increasing && benefit && complete,
        format!(
            "BnB SE at M=5 {:.6} vs MRT {mrt:.6} bits; BnB SE over M=1..8 {}; strictly increasing: {increasing}",
            bnb_se[4],
            bnb_se.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Certified bounds never exceed the objective at sampled points of the box.
fn relaxation_validity() -> Outcome {
    let mut rng = channel_rng(SEED, 7);
    let mut violations = 0;
    let mut pairs = 0;
    let mut worst = f64::NEG_INFINITY;
    for (pair, m) in (0..50).map(|p| (p, [2, 4, 6][p % 3])) {
        let prob = build_quadratic(
            &generate_channels_indexed(&geometry(m, 4), SEED, 1000 + pair as u64).unwrap(),
        )
        .unwrap();
        let n = prob.dim();
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.0..TAU)).collect();
        let bx = ArcBox::new(lower, upper).unwrap();
        let bound = match solve_segment_relaxation(&prob, &bx, DEFAULT_TOL) {
            Ok(sol) => sol.certified_bound,
            Err(irs_bnb::Error::IterationLimit { partial, .. }) => partial.certified_bound,
            Err(e) => panic!("relaxation failed: {e}"),
        };
        let slack = 1e-9 * prob.scale();
        for _ in 0..10_000 {
            let v = CVector::from_iterator(
                n,
                (0..n).map(|i| {
                    Complex64::from_polar(1.0, rng.gen_range(bx.lower()[i]..=bx.upper()[i]))
                }),
            );
            let f = objective(&prob, &v).unwrap();
            worst = worst.max((bound - f) / prob.scale());
            if bound > f + slack {
                violations += 1;
            }
        }
        pairs += 1;
    }
    outcome(
        7,
        "relaxation validity",
        violations == 0,
        format!("{violations} violations over {pairs} boxes x 10^4 samples; max (bound - f)/||R||_F = {worst:.3e}"),
    )
}

/// SDR quadratic-gain ratio against BnB at M = 4.
fn sdr_quality(runs: &mut Vec<SolveReport>) -> Outcome {
    let cfg = ExperimentConfig {
        geometry: geometry(4, 4),
        realizations: 100,
        seed: SEED,
        eps: EPS,
        algorithms: vec![Algorithm::Bnb, Algorithm::Sdr],
        ..Default::default()
    };
    let out = harness::compute_sweep(&cfg).unwrap();
    let mut ratios = Vec::new();
    for k in 0..cfg.realizations {
        let ch = generate_channels_indexed(&cfg.geometry, cfg.seed, k as u64).unwrap();
        let prob = build_quadratic(&ch).unwrap();
        let get = |a| {
            out.rows
                .iter()
                .find(|r: &&ResultRow| r.realization == k && r.algorithm == a)
                .unwrap()
                .objective
        };
        ratios.push((prob.offset - get(Algorithm::Sdr)) / (prob.offset - get(Algorithm::Bnb)));
        runs.push(bnb::solve_with(&prob, &cfg.bnb_options()).unwrap());
    }
    let ratio = mean(ratios);
    outcome(
        8,
        "SDR quality",
        ratio >= 0.7 && out.failures.is_empty(),
        format!("mean gain ratio {ratio:.6} (floor 0.7)"),
    )
}

/// Two sweeps with identical config produce identical bytes, under
/// different thread counts.
fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut contents = Vec::new();
    for (dir, threads) in dirs.iter().zip([1, 3]) {
        let cfg = ExperimentConfig {
            geometry: geometry(1, 3),
            realizations: 6,
            seed: SEED,
            eps: EPS,
            sweep: Some(Sweep {
                variable: SweepVariable::M,
                values: vec![1, 2, 4],
            }),
            n_rand: 100,
            manifold_starts: 2,
            output_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| harness::run_sweep(&cfg)).unwrap();
        let files: Vec<Vec<u8>> = [
            "sweep_results.csv",
            "sweep_summary.csv",
            "sweep_failures.csv",
        ]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect();
        contents.push(files);
    }
    let same = contents[0] == contents[1];
    outcome(
        9,
        "determinism",
        same,
        format!("sweep outputs byte-identical across runs: {same}"),
    )
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let mut outcomes = Vec::new();
    let mut record = |o: Outcome| outcomes.push(o);
    record(oracle_equivalence(&mut runs));
    record(convergence_scale(&mut runs));
    let (sandwich, manifold) = sandwich_and_manifold(&mut runs);
    record(sandwich);
    record(manifold);
    record(irs_benefit());
    record(relaxation_validity());
    record(sdr_quality(&mut runs));
    record(determinism());
    record(bound_behaviour(&runs));

    outcomes.sort_by_key(|o| o.id);
    for o in &outcomes {
        report_line(o);
    }
    let failed: Vec<usize> = outcomes
        .iter()
        .filter(|o| o.verdict == Verdict::Fail)
        .map(|o| o.id)
        .collect();
    if failed.is_empty() {
        println!("all hard criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
