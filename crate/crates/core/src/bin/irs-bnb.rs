use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use irs_bnb::bnb;
use irs_bnb::harness::{self, Algorithm, ExperimentConfig, SummaryRow};
use irs_bnb::model::{build_quadratic, generate_channels_indexed};
use irs_bnb::oracle::{grid_search, GridSpec, MAX_GRID_DIMS};

#[derive(Parser)]
#[command(
    name = "irs-bnb",
    version,
    about = "Globally optimal IRS beamforming by branch-and-bound"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization and print the report as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Realization index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Write per-realization bound traces and an iteration summary.
    Convergence(Common),
    /// Run every algorithm over the configured sweep axis.
    Sweep(Common),
    /// Cross-check branch-and-bound against exhaustive grid search (M <= 3).
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Grid points per circle; 4096 for M <= 2 and 256 for M = 3 by default.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Print a paired table of all algorithms at the configured point.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative tolerance of branch-and-bound.
    #[arg(long)]
    eps: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of bnb, manifold, sdr, bcd, mrt_no_irs.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Exit nonzero when any run fails or stops on a cap.
    #[arg(long)]
    strict: bool,
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                harness::load_config(path).with_context(|| format!("loading {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(eps) = self.eps {
            cfg.eps = eps;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(list) = &self.algorithms {
            cfg.algorithms = list
                .iter()
                .map(|s| s.parse::<Algorithm>())
                .collect::<Result<_, _>>()?;
        }
        cfg.validate()?;
        if let Some(threads) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()?;
        }
        Ok(cfg)
    }
}

fn print_summary(summary: &[SummaryRow]) {
    println!(
        "{:<11} {:>3} {:>4} {:>5} {:>9} {:>14} {:>12} {:>10}",
        "algorithm", "m", "n_t", "runs", "failures", "mean_se_bits", "mean_iters", "cap_hits"
    );
    for s in summary {
        println!(
            "{:<11} {:>3} {:>4} {:>5} {:>9} {:>14.6} {:>12.1} {:>10}",
            s.algorithm.name(),
            s.m,
            s.n_t,
            s.runs,
            s.failures,
            s.mean_se_bits,
            s.mean_iterations,
            s.cap_hits
        );
    }
}

fn strict_exit(strict: bool, problems: usize) -> ExitCode {
    if strict && problems > 0 {
        eprintln!("{problems} run(s) failed or hit a cap");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve {
            common,
            realization,
        } => {
            let cfg = common.config()?;
            let ch = generate_channels_indexed(&cfg.geometry, cfg.seed, realization as u64)?;
            let report = bnb::solve_with(&build_quadratic(&ch)?, &cfg.bnb_options())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(strict_exit(common.strict, usize::from(!report.converged())))
        }
        Command::Convergence(common) => {
            let cfg = common.config()?;
            let out = harness::run_convergence(&cfg)?;
            println!(
                "{} realizations at m={}, n_t={}: median iterations {}, cap hits {}",
                out.reports.len(),
                cfg.geometry.m,
                cfg.geometry.n_t,
                out.median_iterations(),
                out.cap_hits()
            );
            println!(
                "traces written to {}",
                cfg.output_dir.join("convergence").display()
            );
            Ok(strict_exit(common.strict, out.cap_hits()))
        }
        Command::Sweep(common) => {
            let cfg = common.config()?;
            let out = harness::run_sweep(&cfg)?;
            print_summary(&out.summary);
            println!("results written to {}", cfg.output_dir.display());
            let caps: usize = out.summary.iter().map(|s| s.cap_hits).sum();
            Ok(strict_exit(common.strict, caps + out.failures.len()))
        }
        Command::Compare(common) => {
            let mut cfg = common.config()?;
            cfg.sweep = None;
            let out = harness::compute_sweep(&cfg)?;
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(std::io::stdout());
            w.write_record(harness::RESULT_COLUMNS)?;
            for row in &out.rows {
                w.serialize(row)?;
            }
            w.flush()?;
            println!();
            print_summary(&out.summary);
            for f in &out.failures {
                eprintln!(
                    "failure: realization {} {}: {}",
                    f.realization, f.algorithm, f.error
                );
            }
            let caps: usize = out.summary.iter().map(|s| s.cap_hits).sum();
            Ok(strict_exit(common.strict, caps + out.failures.len()))
        }
        Command::Oracle { common, points } => {
            let cfg = common.config()?;
            let m = cfg.geometry.m;
            if m > MAX_GRID_DIMS {
                bail!("oracle supports m <= {MAX_GRID_DIMS}, config has m = {m}");
            }
            let spec = GridSpec::new(points.unwrap_or(if m <= 2 { 4096 } else { 256 }), m)?;
            let mut mismatches = 0;
            println!(
                "{:>5} {:>16} {:>16} {:>12} {:>6}",
                "index", "bnb", "grid", "grid_bound", "ok"
            );
            for k in 0..cfg.realizations {
                let prob = build_quadratic(&generate_channels_indexed(
                    &cfg.geometry,
                    cfg.seed,
                    k as u64,
                )?)?;
                let report = bnb::solve_with(&prob, &cfg.bnb_options())?;
                let grid = grid_search(&prob, spec)?;
                let slack = cfg.eps * report.objective.abs().max(report.lower_bound.abs())
                    + grid.error_bound;
                let ok = report.converged()
                    && (report.objective - grid.value).abs() <= slack
                    && report.lower_bound <= grid.value + 1e-12 * grid.value.abs();
                if !ok {
                    mismatches += 1;
                }
                println!(
                    "{k:>5} {:>16.9e} {:>16.9e} {:>12.3e} {:>6}",
                    report.objective,
                    grid.value,
                    grid.error_bound,
                    if ok { "yes" } else { "NO" }
                );
            }
            println!(
                "{mismatches} mismatch(es) over {} realizations",
                cfg.realizations
            );
            Ok(strict_exit(common.strict, mismatches))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
