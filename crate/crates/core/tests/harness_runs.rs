use irs_bnb::bnb;
use irs_bnb::harness::{self, Algorithm, ExperimentConfig, Sweep, SweepVariable};
use irs_bnb::model::{build_quadratic, SystemGeometry};

fn sweep_config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        geometry: SystemGeometry {
            n_t: 3,
            r_ai: 50.0,
            r_au: 50.0,
            r_iu: 20.0,
            ..Default::default()
        },
        realizations: 5,
        seed: 11,
        sweep: Some(Sweep {
            variable: SweepVariable::M,
            values: vec![1, 2, 3, 5],
        }),
        n_rand: 200,
        manifold_starts: 2,
        output_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn summary_rows_are_means_of_detail_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let out = harness::run_sweep(&cfg).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.rows.len(), 4 * 5 * Algorithm::ALL.len());
    for s in &out.summary {
        let rows: Vec<_> = out
            .rows
            .iter()
            .filter(|r| r.algorithm == s.algorithm && r.m == s.m && r.n_t == s.n_t)
            .collect();
        assert_eq!(rows.len(), s.runs);
        let mean_se = rows.iter().map(|r| r.se_bits).sum::<f64>() / rows.len() as f64;
        let mean_obj = rows.iter().map(|r| r.objective).sum::<f64>() / rows.len() as f64;
        assert!((mean_se - s.mean_se_bits).abs() <= 1e-12 * mean_se.abs());
        assert!((mean_obj - s.mean_objective).abs() <= 1e-12 * mean_obj.abs().max(1e-300));
    }
    for r in &out.rows {
        assert!(r.se_bits >= 0.0);
        assert_eq!(r.gap.is_some(), r.algorithm == Algorithm::Bnb);
        assert!(r.gap.unwrap_or(0.0) >= 0.0);
        assert_eq!(r.wall_time_s, 0.0);
    }

    let text = std::fs::read_to_string(dir.path().join("sweep_results.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "realization,algorithm,m,n_t,objective,se_bits,iterations,gap,wall_time_s"
    );
    assert_eq!(text.lines().count(), out.rows.len() + 1);
    let summary = std::fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), out.summary.len() + 1);
}

#[test]
fn no_irs_rows_do_not_depend_on_the_surface_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let out = harness::compute_sweep(&cfg).unwrap();
    for k in 0..cfg.realizations {
        let se: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.realization == k && r.algorithm == Algorithm::MrtNoIrs)
            .map(|r| r.se_bits)
            .collect();
        assert_eq!(se.len(), 4);
        assert!(se.iter().all(|&x| x == se[0]));
    }
}

#[test]
fn averages_follow_the_optimality_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let out = harness::compute_sweep(&cfg).unwrap();
    for &(m, n_t) in &cfg.points() {
        let avg = |a: Algorithm| {
            out.summary
                .iter()
                .find(|s| s.algorithm == a && s.m == m && s.n_t == n_t)
                .unwrap()
                .mean_se_bits
        };
        let (b, man, sdr, mrt) = (
            avg(Algorithm::Bnb),
            avg(Algorithm::Manifold),
            avg(Algorithm::Sdr),
            avg(Algorithm::MrtNoIrs),
        );
        // BnB is optimal to its relative tolerance on the quadratic, which is far below 1e-9 in SE.
        assert!(b >= man - 1e-9 * b, "m={m}: bnb {b} < manifold {man}");
        assert!(man >= sdr - 1e-9 * man, "m={m}: manifold {man} < sdr {sdr}");
        assert!(b >= mrt);
    }
}

#[test]
fn cells_share_one_channel_draw() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let out = harness::compute_sweep(&cfg).unwrap();
    let k = 3;
    let channels = harness::sweep_channels(&cfg, k).unwrap();
    for (p, ch) in channels.iter().enumerate() {
        let report = bnb::solve_with(&build_quadratic(ch).unwrap(), &cfg.bnb_options()).unwrap();
        let row = out
            .rows
            .iter()
            .find(|r| {
                r.realization == k && r.algorithm == Algorithm::Bnb && r.m == cfg.points()[p].0
            })
            .unwrap();
        assert_eq!(row.objective, report.objective);
        assert_eq!(row.iterations, report.iterations);
    }
}

#[test]
fn convergence_writes_normalized_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        geometry: SystemGeometry {
            m: 4,
            n_t: 2,
            ..Default::default()
        },
        realizations: 3,
        seed: 5,
        output_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let out = harness::run_convergence(&cfg).unwrap();
    assert_eq!(out.reports.len(), 3);
    for k in 0..3 {
        let path = dir
            .path()
            .join("convergence")
            .join(format!("trace_{k:04}.csv"));
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(reader.headers().unwrap(), vec!["t", "U", "L"]);
        let rows: Vec<(usize, f64, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), out.reports[k].trace.len());
        let last = rows.last().unwrap();
        assert!((last.1.abs() - 1.0).abs() <= 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].1 <= w[0].1 && w[1].2 >= w[0].2);
        }
    }
    let summary = std::fs::read_to_string(dir.path().join("convergence_summary.csv")).unwrap();
    assert!(summary.starts_with("realization,m,n_t,iterations,"));
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.contains(",converged,")));

    let again = harness::compute_convergence(&cfg).unwrap();
    assert_eq!(again.summary, out.summary);
}

#[test]
fn config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"geometry": {"n_t": 5, "r_ai": 50}, "realizations": 7, "algorithms": ["bnb", "mrt_no_irs"],
        "sweep": {"variable": "m", "values": [1, 2, 4]}, "caps": {"time_cap_s": 30}}"#)
        .unwrap();
    let cfg = harness::load_config(&path).unwrap();
    assert_eq!(cfg.geometry.n_t, 5);
    assert_eq!(cfg.caps.node_cap, bnb::DEFAULT_NODE_CAP);
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(harness::load_config(&path).unwrap(), cfg);
    assert!(harness::load_config(dir.path().join("missing.json")).is_err());
}

#[test]
fn sweep_requires_an_axis_and_convergence_refuses_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sweep_config(dir.path());
    assert!(harness::compute_convergence(&cfg).is_err());
    cfg.sweep = None;
    assert!(harness::run_sweep(&cfg).is_err());
}

#[test]
fn bundled_configs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            harness::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 3);
}
