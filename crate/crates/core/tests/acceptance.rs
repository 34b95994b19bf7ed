//! Full acceptance run on the default scenario: Interval(0, 1), rho = (0.2, 0.8),
//! u = 0.5, phi = indicator of the right end point.
//!
//! Runs without the libtest harness so the per-criterion lines always reach the
//! output. Prints one line per criterion and a determinism line, then asserts all
//! of them.

use kvchaos::config::{CheckSettings, ExperimentConfig, Tolerances};
use kvchaos::verify::{run_verify, with_workers, Report};

fn pinned_config(out: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::acceptance();
    c.n = 2;
    c.mc.n_samples = 100_000;
    c.mc.dt = 1e-4;
    c.mc.seed = 20_240_601;
    c.mc.horizon = None;
    c.out = out.to_path_buf();
    c.tolerances = Tolerances {
        mc_sigmas: 3.0,
        harmonic_residual: 1e-8,
        normalization: 1e-8,
        semigroup: 1e-7,
        clark_relative: 0.01,
        clark_ratio_min: 1.6,
        clark_ratio_max: 2.6,
        identity_absolute: 1e-4,
        parseval_allowance: 0.10,
        isometry_allowance: 0.05,
        ks_level: 0.01,
        gradient: 1e-6,
        exact_floor: 1e-12,
    };
    c.checks = CheckSettings {
        alpha_times: vec![0.1, 0.5, 1.0],
        halfline_rho: 0.7,
        halfline_u: 1.0,
        halfline_t: 1.0,
        operator_times: vec![0.1, 0.5, 1.0],
        semigroup_s: 0.2,
        semigroup_t: 0.3,
        semigroup_functions: 5,
        identity_t: 0.5,
        expansion_samples: 20_000,
        wiener_t: 0.5,
        wiener_samples: 10_000,
        wiener_stride: 25,
        gradient_points: 20,
        finite_difference_step: 1e-5,
    };
    c
}

fn print_report(report: &Report) {
    for (check, passed) in report.check_summary() {
        let rows: Vec<_> = report.records.iter().filter(|r| r.check == check).collect();
        let runtime = rows.first().map_or(0.0, |r| r.runtime_s);
        let worst = rows
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{} computed {:.6e} oracle {:.6e} tol {:.3e} ({})", r.name, r.computed, r.oracle, r.tolerance, r.detail))
            .collect::<Vec<_>>()
            .join("; ");
        println!(
            "{check:<4} {} ({} records, {runtime:.1} s){}",
            if passed { "PASS" } else { "FAIL" },
            rows.len(),
            if worst.is_empty() { String::new() } else { format!(": {worst}") }
        );
        for r in rows {
            println!(
                "       {:<32} computed {:>13.6e} oracle {:>13.6e} tol {:>10.3e}",
                r.name, r.computed, r.oracle, r.tolerance
            );
        }
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let first = with_workers(Some(1), || run_verify(&pinned_config(&dir.path().join("a"))))
        .unwrap()
        .unwrap();
    print_report(&first);
    for file in ["report.json", "report.csv"] {
        assert!(dir.path().join("a").join(file).exists(), "{file} missing");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);

    let second = with_workers(Some(3), || run_verify(&pinned_config(&dir.path().join("b"))))
        .unwrap()
        .unwrap();
    let key = |r: &Report| r.records.iter().map(|x| x.numeric_key()).collect::<Vec<_>>();
    let deterministic = key(&first) == key(&second);
    println!(
        "DET  {} (1 worker vs 3 workers, {} records compared bitwise)",
        if deterministic { "PASS" } else { "FAIL" },
        first.records.len()
    );

    let summary = first.check_summary();
    let names: Vec<_> = summary.iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(names, ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "P10"]);
    let failed: Vec<_> = summary.iter().filter(|(_, p)| !p).map(|(c, _)| c.clone()).collect();
    println!(
        "acceptance: {}/{} criteria passed, determinism {}",
        summary.len() - failed.len(),
        summary.len(),
        if deterministic { "ok" } else { "violated" }
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(deterministic, "reports differ between worker counts");
}
