//! The acceptance suite P1-P10 and its report.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    identity_check, orthogonality_estimate, partial_sum_residual, ChaosSetup, McSettings, Sampler,
};
use crate::config::{Experiment, ExperimentConfig};
use crate::domain::DomainModel;
use crate::error::{Error, Result};
use crate::kernels::{parseval_term, ChaosKernel, ParsevalTerm, SimplexQuadrature};
use crate::paths::{increments_hat, simulate, simulate_qt_with, AlphaDrift, Measure, RngStream};
use crate::semigroup::{GridFunction, SemigroupOps};
use crate::stats::{ks_standard_normal, ks_critical_value, pair_correlation, McEstimate};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "KVCHAOS_WORKERS";

/// Step for the second differences of the harmonicity check.
const HARMONIC_STEP: f64 = 1e-3;

/// One row of the report; `passed` is `|computed - oracle| <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub check: String,
    pub name: String,
    pub computed: f64,
    pub oracle: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub runtime_s: f64,
    pub detail: String,
}

impl ReportRecord {
    pub fn new(
        check: &str,
        name: impl Into<String>,
        computed: f64,
        oracle: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            check: check.to_string(),
            name: name.into(),
            computed,
            oracle,
            tolerance,
            passed: (computed - oracle).abs() <= tolerance,
            runtime_s: 0.0,
            detail: detail.into(),
        }
    }

    fn failure(check: &str, detail: String) -> Self {
        Self::new(check, "error", f64::NAN, f64::NAN, 0.0, detail)
    }

    /// The record without its timing, for reproducibility comparisons.
    pub fn numeric_key(&self) -> (String, String, u64, u64, u64, bool, String) {
        (
            self.check.clone(),
            self.name.clone(),
            self.computed.to_bits(),
            self.oracle.to_bits(),
            self.tolerance.to_bits(),
            self.passed,
            self.detail.clone(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub passed: bool,
    pub horizon: f64,
    pub config: ExperimentConfig,
    pub records: Vec<ReportRecord>,
}

impl Report {
    /// Pass/fail per check, in suite order.
    pub fn check_summary(&self) -> Vec<(String, bool)> {
        let mut out: Vec<(String, bool)> = Vec::new();
        for r in &self.records {
            match out.iter_mut().find(|(c, _)| *c == r.check) {
                Some(entry) => entry.1 &= r.passed,
                None => out.push((r.check.clone(), r.passed)),
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        let mut w = csv_writer(&dir.join("report.csv"))?;
        for r in &self.records {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Argument(format!("csv: {other:?}")),
    }
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(WORKERS_ENV, format!("expected a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (rayon's default if `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Shared state of one suite run; P7 and P8 read the same expansion samples.
pub struct Suite<'a> {
    exp: &'a Experiment,
    expansion: OnceLock<std::result::Result<Arc<ExpansionRun>, String>>,
}

impl<'a> Suite<'a> {
    pub fn new(exp: &'a Experiment) -> Self {
        Self {
            exp,
            expansion: OnceLock::new(),
        }
    }

    fn expansion(&self) -> Result<Arc<ExpansionRun>> {
        self.expansion
            .get_or_init(|| {
                expansion_run(self.exp, self.exp.config.n.max(2))
                    .map(Arc::new)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Argument)
    }
}

type Check = fn(&Suite) -> Result<Vec<ReportRecord>>;

const CHECKS: [(&str, Check); 10] = [
    ("P1", p1_harmonicity),
    ("P2", p2_alpha),
    ("P3", p3_normalization),
    ("P4", p4_semigroup),
    ("P5", p5_clark),
    ("P6", p6_identity),
    ("P7", p7_parseval),
    ("P8", p8_orthogonality),
    ("P9", p9_wiener),
    ("P10", p10_gradients),
];

/// Runs every check; errors and panics become failing records.
pub fn run_checks(exp: &Experiment) -> Report {
    let suite = Suite::new(exp);
    let mut records = Vec::new();
    for (name, check) in CHECKS {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&suite)));
        let mut rows = match outcome {
            Ok(Ok(rows)) if !rows.is_empty() => rows,
            Ok(Ok(_)) => vec![ReportRecord::failure(name, "no records".into())],
            Ok(Err(e)) => vec![ReportRecord::failure(name, e.to_string())],
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                vec![ReportRecord::failure(name, format!("panic: {msg}"))]
            }
        };
        let elapsed = start.elapsed().as_secs_f64();
        for r in &mut rows {
            r.runtime_s = elapsed;
        }
        records.extend(rows);
    }
    Report {
        schema_version: SCHEMA_VERSION,
        passed: records.iter().all(|r| r.passed),
        horizon: exp.horizon,
        config: exp.config.clone(),
        records,
    }
}

/// Validates `config`, runs the suite and writes `report.json` and `report.csv`.
pub fn run_verify(config: &ExperimentConfig) -> Result<Report> {
    let exp = config.validate()?;
    let report = run_checks(&exp);
    report.write(&config.out)?;
    Ok(report)
}

fn seed_for(exp: &Experiment, check: u64) -> u64 {
    exp.config.mc.seed.wrapping_add(check.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn ops(exp: &Experiment) -> Result<SemigroupOps> {
    SemigroupOps::new(exp.model.clone(), &exp.grid, exp.u())
}

fn setup(exp: &Experiment) -> Result<ChaosSetup> {
    ChaosSetup::new(&exp.model, exp.u(), &exp.phi, &exp.grid)
}

fn sigmas(exp: &Experiment) -> f64 {
    exp.config.tolerances.mc_sigmas
}

/// Additive rounding allowance for the expansion checks.
fn floor(exp: &Experiment, second_moment: f64) -> f64 {
    exp.config.tolerances.exact_floor * second_moment.abs().max(1.0)
}

fn p1_harmonicity(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let ops = ops(exp)?;
    let model = &exp.model;
    let tol = exp.config.tolerances.harmonic_residual;
    let (mut beta_res, mut pde_res) = (0.0f64, 0.0f64);
    for &x in ops.grid().nodes() {
        let h = HARMONIC_STEP.min(0.5 * model.nearest_boundary(x).1);
        let d2 = (model.beta(x + h)? - 2.0 * model.beta(x)? + model.beta(x - h)?) / (h * h);
        beta_res = beta_res.max(d2.abs());
        let j = ops.t_tilde_jet(&exp.phi, x)?;
        pde_res = pde_res.max((0.5 * j.d2 + model.grad_log_beta(x)? * j.d1).abs());
    }
    let n = ops.grid().len();
    Ok(vec![
        ReportRecord::new("P1", "beta_second_difference", beta_res, 0.0, tol, format!("max over {n} nodes")),
        ReportRecord::new("P1", "t_tilde_pde_residual", pde_res, 0.0, tol, format!("max over {n} nodes")),
    ])
}

/// Weighted survival indicators at `times` for `n` paths of `measure`.
fn survival(
    model: &DomainModel,
    u: f64,
    mc: &McSettings,
    times: &[f64],
) -> Result<Vec<McEstimate>> {
    let grid = mc.grid()?;
    let measure = mc.measure();
    let rows = RngStream::new(mc.seed)
        .map_samples(mc.n_samples, |_, r| {
            let path = simulate(model, u, &grid, measure, r)?;
            Ok(times
                .iter()
                .map(|&t| {
                    let alive = path.survives_to(grid.steps_to(t));
                    if alive { path.importance_weight } else { 0.0 }
                })
                .collect::<Vec<f64>>())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    (0..times.len())
        .map(|j| McEstimate::from_samples(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect()
}

fn p2_alpha(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let c = &exp.config;
    let k = sigmas(exp);
    let times = &c.checks.alpha_times;
    let mut out = Vec::new();
    if !times.is_empty() {
        let mc = McSettings {
            n_samples: c.mc.n_samples,
            dt: c.mc.dt,
            horizon: times.iter().cloned().fold(c.mc.dt, f64::max),
            seed: seed_for(exp, 2),
            sampler: Sampler::Q,
        };
        let est = survival(&exp.model, exp.u(), &mc, times)?;
        for (&t, e) in times.iter().zip(&est) {
            out.push(ReportRecord::new(
                "P2",
                format!("alpha_mc[t={t}]"),
                e.mean,
                exp.model.alpha(t, exp.u())?,
                k * e.stderr,
                format!("stderr {:.3e}, n {}", e.stderr, e.n_samples),
            ));
        }
    }
    let half = DomainModel::halfline(c.checks.halfline_rho)?;
    let (u, t) = (c.checks.halfline_u, c.checks.halfline_t);
    let exact = libm::erf(u / (2.0 * t).sqrt());
    out.push(ReportRecord::new(
        "P2",
        "halfline_alpha_closed_form",
        half.alpha(t, u)?,
        exact,
        c.tolerances.normalization,
        format!("u {u}, t {t}"),
    ));
    let mc = McSettings {
        n_samples: c.mc.n_samples,
        dt: c.mc.dt,
        horizon: t.max(c.mc.dt),
        seed: seed_for(exp, 12),
        sampler: Sampler::Q,
    };
    let e = survival(&half, u, &mc, &[t])?[0];
    out.push(ReportRecord::new(
        "P2",
        "halfline_alpha_mc",
        e.mean,
        exact,
        k * e.stderr,
        format!("stderr {:.3e}, n {}", e.stderr, e.n_samples),
    ));
    Ok(out)
}

fn p3_normalization(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let ops = ops(exp)?;
    let one = ops.function(|_| 1.0);
    exp.config
        .checks
        .operator_times
        .iter()
        .map(|&t| {
            let tk = ops.op_tk_uncached(t, &one)?;
            let mut err = 0.0f64;
            for (&x, &v) in ops.grid().nodes().iter().zip(tk.values()) {
                err = err.max((v - exp.model.alpha(t, x)?).abs());
            }
            Ok(ReportRecord::new(
                "P3",
                format!("tk_one_minus_alpha[t={t}]"),
                err,
                0.0,
                exp.config.tolerances.normalization,
                "max node error",
            ))
        })
        .collect()
}

/// `c0 + c1 sin(omega x + theta) + c2 x^2` on the grid, `x` rescaled to `[0, 1]`.
fn random_function(ops: &SemigroupOps, rng: &mut ChaCha8Rng) -> GridFunction {
    let c0: f64 = rng.random_range(-1.0..1.0);
    let c1: f64 = rng.random_range(-1.0..1.0);
    let c2: f64 = rng.random_range(-1.0..1.0);
    let omega: f64 = rng.random_range(1.0..10.0);
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (lo, hi) = ops.grid().bounds();
    ops.function(move |x| {
        let s = (x - lo) / (hi - lo);
        c0 + c1 * (omega * s + theta).sin() + c2 * s * s
    })
}

fn p4_semigroup(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let ops = ops(exp)?;
    let c = &exp.config.checks;
    let (s, t) = (c.semigroup_s, c.semigroup_t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(exp, 4));
    (0..c.semigroup_functions)
        .map(|i| {
            let f = random_function(&ops, &mut rng);
            let lhs = ops.op_tk_uncached(s, &ops.op_tk_uncached(t, &f)?)?;
            let rhs = ops.op_tk_uncached(s + t, &f)?;
            let err = lhs
                .values()
                .iter()
                .zip(rhs.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(ReportRecord::new(
                "P4",
                format!("semigroup_law[f={i}]"),
                err,
                0.0,
                exp.config.tolerances.semigroup,
                format!("s {s}, t {t}, sup norm"),
            ))
        })
        .collect()
}

fn p5_clark(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let setup = setup(exp)?;
    let tol = &exp.config.tolerances;
    let ef2 = setup.second_moment()?;
    let mut mc = exp.mc();
    mc.seed = seed_for(exp, 5);
    let coarse = setup.clark_residual(&mc)?;
    mc.dt /= 4.0;
    let fine = setup.clark_residual(&mc)?;
    let scale = if ef2 > 0.0 { ef2 } else { 1.0 };
    let zero = floor(exp, ef2);
    let centre = 0.5 * (tol.clark_ratio_min + tol.clark_ratio_max);
    let half_width = 0.5 * (tol.clark_ratio_max - tol.clark_ratio_min);
    let ratio = if coarse.mean <= zero && fine.mean <= zero {
        ReportRecord::new(
            "P5",
            "clark_rms_ratio",
            centre,
            centre,
            half_width,
            format!("both residuals at rounding level ({:.3e}, {:.3e})", coarse.mean, fine.mean),
        )
    } else {
        ReportRecord::new(
            "P5",
            "clark_rms_ratio",
            (coarse.mean / fine.mean).sqrt(),
            centre,
            half_width,
            format!(
                "mse {:.4e} +- {:.1e} at dt {}, {:.4e} +- {:.1e} at dt {}",
                coarse.mean,
                coarse.stderr,
                exp.config.mc.dt,
                fine.mean,
                fine.stderr,
                mc.dt
            ),
        )
    };
    Ok(vec![
        ReportRecord::new(
            "P5",
            "clark_relative_residual",
            coarse.mean / scale,
            0.0,
            tol.clark_relative,
            format!("E f^2 {ef2:.6}, stderr {:.3e}", coarse.stderr / scale),
        ),
        ratio,
    ])
}

fn p6_identity(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let setup = setup(exp)?;
    let t = exp.config.checks.identity_t;
    let mc = McSettings {
        n_samples: exp.config.mc.n_samples,
        dt: exp.config.mc.dt,
        horizon: t,
        seed: seed_for(exp, 6),
        sampler: Sampler::Q,
    };
    let r = identity_check(&setup, t, &|x| x, &|_| 1.0, &mc)?;
    Ok(vec![ReportRecord::new(
        "P6",
        "conditioned_identity",
        r.lhs.mean,
        r.rhs,
        sigmas(exp) * r.lhs.stderr + exp.config.tolerances.identity_absolute,
        format!(
            "psi(x)=x, g=1, t {t}; stderr {:.3e}; exits {}; clamps {}",
            r.lhs.stderr, r.failures, r.clamp_events
        ),
    )])
}

/// Parseval terms for orders `0..=order`, each from a freshly built kernel.
pub fn parseval_terms(setup: &ChaosSetup, quad: &SimplexQuadrature, order: usize) -> Result<Vec<ParsevalTerm>> {
    (0..=order)
        .map(|n| {
            let k = ChaosKernel::new(setup.ops().clone(), setup.u(), *setup.phi(), n)?;
            parseval_term(&k, quad)
        })
        .collect()
}

pub struct ExpansionRun {
    second_moment: f64,
    terms: Vec<ParsevalTerm>,
    samples: Vec<crate::chaos::ChaosSample>,
}

fn expansion_run(exp: &Experiment, order: usize) -> Result<ExpansionRun> {
    let setup = setup(exp)?;
    let mut mc = exp.mc();
    mc.n_samples = exp.config.checks.expansion_samples;
    mc.seed = seed_for(exp, 7);
    let grid = mc.grid()?;
    let table = setup.table(order, &grid, exp.config.mc.coarse_stride)?;
    let samples = setup.sample(&table, order, &mc)?;
    let quad = SimplexQuadrature::new(setup.ops(), exp.u(), &exp.simplex)?;
    Ok(ExpansionRun {
        second_moment: setup.second_moment()?,
        terms: parseval_terms(&setup, &quad, order)?,
        samples,
    })
}

fn p7_parseval(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let n = exp.config.n;
    let run = suite.expansion()?;
    let est = partial_sum_residual(&run.samples, n)?;
    let kept: f64 = run.terms[..=n].iter().map(|t| t.value).sum();
    let tails: f64 = run.terms[..=n].iter().map(|t| t.tail_bound).sum();
    let predicted = run.second_moment - kept;
    let tol = sigmas(exp) * est.stderr
        + exp.config.tolerances.parseval_allowance * predicted.abs()
        + tails
        + floor(exp, run.second_moment);
    Ok(vec![ReportRecord::new(
        "P7",
        format!("truncation_residual[N={n}]"),
        est.mean,
        predicted,
        tol,
        format!(
            "E f^2 {:.6}, parseval terms {:?}, tail {:.1e}, stderr {:.3e}",
            run.second_moment,
            run.terms[..=n].iter().map(|t| t.value).collect::<Vec<_>>(),
            tails,
            est.stderr
        ),
    )])
}

fn p8_orthogonality(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let run = suite.expansion()?;
    let k = sigmas(exp);
    let zero = floor(exp, run.second_moment);
    let mut out = Vec::new();
    for (m, n) in [(0, 1), (0, 2), (1, 2)] {
        let e = orthogonality_estimate(&run.samples, m, n)?;
        out.push(ReportRecord::new(
            "P8",
            format!("orthogonality[{m},{n}]"),
            e.mean,
            0.0,
            k * e.stderr + zero,
            format!("stderr {:.3e}", e.stderr),
        ));
    }
    for n in [1, 2] {
        let e = orthogonality_estimate(&run.samples, n, n)?;
        let term = run.terms[n].value;
        out.push(ReportRecord::new(
            "P8",
            format!("isometry[{n}]"),
            e.mean,
            term,
            k * e.stderr + exp.config.tolerances.isometry_allowance * term.abs() + zero,
            format!("stderr {:.3e}", e.stderr),
        ));
    }
    Ok(out)
}

fn p9_wiener(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let c = &exp.config;
    let t = c.checks.wiener_t;
    let stride = c.checks.wiener_stride;
    let mc = McSettings {
        n_samples: c.checks.wiener_samples,
        dt: c.mc.dt,
        horizon: t,
        seed: seed_for(exp, 9),
        sampler: Sampler::Q,
    };
    let grid = mc.grid()?;
    let model = &exp.model;
    let drift = AlphaDrift::conditioned(model, t, &grid);
    let sd = grid.dt().sqrt();
    let per_path = RngStream::new(mc.seed)
        .map_samples(mc.n_samples, |k, r| {
            let path = simulate_qt_with(model, exp.u(), t, &drift, &grid, r)?;
            debug_assert_eq!(path.measure, Measure::Qt(t));
            let z: Vec<f64> = increments_hat(model, &path, t).iter().map(|d| d / sd).collect();
            let offset = (k as usize) % stride;
            let singles: Vec<f64> = z.iter().skip(offset).step_by(stride).copied().collect();
            let pairs: Vec<(f64, f64)> = (offset..z.len().saturating_sub(1))
                .step_by(stride)
                .map(|i| (z[i], z[i + 1]))
                .collect();
            Ok((singles, pairs, path.exited()))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let failures = per_path.iter().filter(|p| p.2).count();
    let z: Vec<f64> = per_path.iter().flat_map(|p| p.0.iter().copied()).collect();
    let pairs: Vec<(f64, f64)> = per_path.iter().flat_map(|p| p.1.iter().copied()).collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let m2 = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = z.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let k = sigmas(exp);
    let ks = ks_standard_normal(&z);
    let rho = pair_correlation(&pairs);
    let info = format!("{} increments from {} paths, {failures} exits", z.len(), mc.n_samples);
    Ok(vec![
        ReportRecord::new("P9", "increment_mean", mean, 0.0, k * (m2 / n).sqrt(), info.clone()),
        ReportRecord::new(
            "P9",
            "increment_variance",
            var,
            1.0,
            k * ((m4 - m2 * m2) / n).sqrt(),
            info.clone(),
        ),
        ReportRecord::new(
            "P9",
            "ks_statistic",
            ks.statistic,
            0.0,
            ks_critical_value(c.tolerances.ks_level, ks.n),
            format!("p-value {:.4}, level {}", ks.p_value, c.tolerances.ks_level),
        ),
        ReportRecord::new(
            "P9",
            "adjacent_correlation",
            rho,
            0.0,
            k / (pairs.len() as f64).sqrt(),
            format!("{} pairs", pairs.len()),
        ),
    ])
}

fn p10_gradients(suite: &Suite) -> Result<Vec<ReportRecord>> {
    let exp = suite.exp;
    let ops = Arc::new(ops(exp)?);
    let model = &exp.model;
    let c = &exp.config.checks;
    let h = c.finite_difference_step;
    let tol = exp.config.tolerances.gradient;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(exp, 10));
    let (lo, hi) = match model.upper() {
        Some(b) => {
            let m = 0.05 * (b - model.lower());
            (model.lower() + m, b - m)
        }
        None => (model.lower() + 0.1, model.lower() + 0.1 + 2.0 * exp.u()),
    };
    let f = random_function(&ops, &mut rng);
    let rel = |analytic: f64, fd: f64| (analytic - fd).abs() / analytic.abs().max(1.0);
    let mut errs = [0.0f64; 4];
    for _ in 0..c.gradient_points {
        let x: f64 = rng.random_range(lo..hi);
        let s: f64 = rng.random_range(0.05..1.0);
        let central = |g: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            Ok((g(x + h)? - g(x - h)?) / (2.0 * h))
        };
        errs[0] = errs[0].max(rel(
            model.grad_log_beta(x)?,
            central(&|y| Ok(model.beta(y)?.ln()))?,
        ));
        errs[1] = errs[1].max(rel(
            model.grad_log_alpha(s, x)?,
            central(&|y| Ok(model.alpha(s, y)?.ln()))?,
        ));
        errs[2] = errs[2].max(rel(
            ops.grad_op_t_tilde(&exp.phi, x)?,
            central(&|y| ops.op_t_tilde(&exp.phi, y))?,
        ));
        errs[3] = errs[3].max(rel(
            ops.tk_tilde_at(s, &f, x)?.1,
            central(&|y| Ok(ops.tk_tilde_at(s, &f, y)?.0))?,
        ));
    }
    let names = ["grad_log_beta", "grad_log_alpha", "grad_t_tilde", "grad_tk_tilde"];
    Ok(names
        .iter()
        .zip(errs)
        .map(|(name, e)| {
            ReportRecord::new(
                "P10",
                *name,
                e,
                0.0,
                tol,
                format!("max relative error over {} points, step {h}", c.gradient_points),
            )
        })
        .collect())
}
