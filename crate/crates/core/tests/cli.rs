use std::path::Path;
use std::process::Command;

use kvchaos::commands::{run_expand, run_kernels, run_simulate};
use kvchaos::config::{Estimator, ExperimentConfig, SimulateMeasure};
use kvchaos::verify::with_workers;

fn small(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::acceptance();
    c.mc.n_samples = 400;
    c.mc.dt = 1e-3;
    c.out = out.to_path_buf();
    c
}

fn write_config(dir: &Path, c: &ExperimentConfig) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, c.to_json().unwrap()).unwrap();
    p
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kvchaos"))
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(&dir.path().join("out"));
    let p = write_config(dir.path(), &c);
    let loaded = ExperimentConfig::load(&p).unwrap();
    assert_eq!(loaded, c);
    assert_eq!(loaded.to_json().unwrap(), std::fs::read_to_string(&p).unwrap());
}

#[test]
fn simulate_with_zero_samples_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = small(&out);
    c.mc.n_samples = 0;
    let p = write_config(dir.path(), &c);
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("mc.n_samples"), "{stderr}");
    assert!(!out.exists());
    assert!(run_simulate(&c).is_err());
    assert!(!out.exists());
}

#[test]
fn unknown_fields_are_reported_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(
        &p,
        r#"{"domain": {"kind": "interval", "a": 0, "b": 1, "rho": {"a": 0.2, "b": 0.8}},
            "u": 0.5, "phi": {"a": 0, "b": 1}, "mc": {"samples": 10}}"#,
    )
    .unwrap();
    let o = bin().args(["kernels", "--config"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mc"));
}

#[test]
fn order_zero_kernel_is_the_conditional_mean() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.n = 0;
    let out = run_kernels(&c).unwrap();
    let text = std::fs::read_to_string(dir.path().join("kernels_n0.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines, ["n,value", &format!("0,{}", out.a0)]);
    // T~ phi(u) = Q_u(exit at 1) = 0.8 * 0.5 / (0.2 * 0.5 + 0.8 * 0.5).
    assert!((out.a0 - 0.8).abs() < 1e-15);
    assert_eq!(out.kernels[0].parseval_term, out.a0 * out.a0);
}

#[test]
fn expand_parseval_terms_match_kernels_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let k = with_workers(Some(2), || run_kernels(&c)).unwrap().unwrap();
    let e = with_workers(Some(1), || run_expand(&c)).unwrap().unwrap();
    let from_kernels: Vec<u64> = k.kernels.iter().map(|t| t.parseval_term.to_bits()).collect();
    let from_expand: Vec<u64> = e.parseval_terms.iter().map(|t| t.to_bits()).collect();
    assert_eq!(from_kernels, from_expand);
    assert_eq!(e.n, 2);
    assert_eq!(e.orthogonality.len(), 3);
    assert_eq!(e.a0.to_bits(), k.a0.to_bits());

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("expand.json")).unwrap())
            .unwrap();
    for key in ["N", "a0", "parseval_terms", "residual", "orthogonality", "dt", "n_samples", "seed"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let rows = std::fs::read_to_string(dir.path().join("kernels_n2.csv")).unwrap();
    assert_eq!(rows.lines().next(), Some("n,t1,t2,value"));
    assert_eq!(rows.lines().count(), 1 + 24 * 24);
}

#[test]
fn cli_overrides_seed_and_out() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(&dir.path().join("ignored"));
    c.simulate.dump_paths = 3;
    let p = write_config(dir.path(), &c);
    let run = |seed: &str, out: &str| {
        let o = bin()
            .args(["simulate", "--config"])
            .arg(&p)
            .args(["--seed", seed, "--out"])
            .arg(dir.path().join(out))
            .env("KVCHAOS_WORKERS", "2")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.path().join(out).join("simulate.json")).unwrap()
    };
    let a = run("5", "a");
    let b = run("5", "b");
    let c2 = run("6", "c");
    assert_eq!(a, b);
    assert_ne!(a, c2);
    assert!(!dir.path().join("ignored").exists());
    let paths = std::fs::read_to_string(dir.path().join("a/paths.csv")).unwrap();
    assert_eq!(
        paths.lines().next(),
        Some("sample_id,step,time,position,exited,weight")
    );
    let ids: std::collections::BTreeSet<&str> = paths
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ids.len(), 3);
}

#[test]
fn worker_count_does_not_change_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.simulate.measure = SimulateMeasure::Qt;
    c.simulate.t = Some(0.3);
    c.simulate.estimator = Estimator::Position;
    let a = with_workers(Some(1), || run_simulate(&c)).unwrap().unwrap();
    let b = with_workers(Some(4), || run_simulate(&c)).unwrap().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.exits, 0);
}
