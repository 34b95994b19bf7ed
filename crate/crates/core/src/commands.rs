//! The `kernels`, `simulate` and `expand` commands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chaos::{orthogonality_estimate, partial_sum_residual, ChaosSetup};
use crate::config::{Estimator, Experiment, ExperimentConfig, SimulateMeasure};
use crate::error::Result;
use crate::kernels::{ChaosKernel, SimplexQuadrature};
use crate::paths::{
    simulate, simulate_qt_with, AlphaDrift, Measure, PathSample, RngStream, TimeGrid,
};
use crate::stats::McEstimate;
use crate::verify::{csv_error, csv_writer, parseval_terms, SCHEMA_VERSION};

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn setup(exp: &Experiment) -> Result<ChaosSetup> {
    ChaosSetup::new(&exp.model, exp.u(), &exp.phi, &exp.grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub order: usize,
    pub parseval_term: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelsOutput {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub a0: f64,
    pub t_max: f64,
    pub kernels: Vec<KernelSummary>,
}

/// Writes `kernels_n{n}.csv` (columns `n, t1..tn, value` over the product
/// quadrature nodes) for `n = 0..=N`, and `kernels.json`.
pub fn run_kernels(config: &ExperimentConfig) -> Result<KernelsOutput> {
    let exp = config.validate()?;
    let setup = setup(&exp)?;
    let quad = SimplexQuadrature::new(setup.ops(), exp.u(), &exp.simplex)?;
    let terms = parseval_terms(&setup, &quad, config.n)?;
    fs::create_dir_all(&config.out)?;
    for n in 0..=config.n {
        let kernel = ChaosKernel::new(setup.ops().clone(), exp.u(), exp.phi, n)?;
        let mut w = csv_writer(&config.out.join(format!("kernels_n{n}.csv")))?;
        let mut header = vec!["n".to_string()];
        header.extend((1..=n).map(|j| format!("t{j}")));
        header.push("value".into());
        w.write_record(&header).map_err(csv_error)?;
        let k = quad.nodes().len();
        let mut inc = vec![0.0; n];
        // Product grid in increment variables, last axis fastest.
        for flat in 0..k.pow(n as u32) {
            let mut rest = flat;
            for j in (0..n).rev() {
                inc[j] = quad.nodes()[rest % k];
                rest /= k;
            }
            let value = kernel.eval_increments(&inc)?;
            let mut row = vec![n.to_string()];
            let mut t = 0.0;
            for d in &inc {
                t += d;
                row.push(t.to_string());
            }
            row.push(value.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    let out = KernelsOutput {
        schema_version: SCHEMA_VERSION,
        n: config.n,
        a0: setup.ops().op_t_tilde(&exp.phi, exp.u())?,
        t_max: quad.t_max(),
        kernels: terms
            .iter()
            .map(|t| KernelSummary {
                order: t.order,
                parseval_term: t.value,
                tail_bound: t.tail_bound,
            })
            .collect(),
    };
    write_json(&config.out, "kernels.json", &out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub schema_version: u32,
    pub measure: SimulateMeasure,
    pub estimator: Estimator,
    pub n_samples: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
    pub exits: usize,
    pub clamp_events: u64,
}

#[derive(Serialize)]
struct PathRow {
    sample_id: usize,
    step: usize,
    time: f64,
    position: f64,
    exited: bool,
    weight: f64,
}

/// Simulates `mc.n_samples` paths, writes the first `simulate.dump_paths` of
/// them to `paths.csv` and the estimator summary to `simulate.json`.
pub fn run_simulate(config: &ExperimentConfig) -> Result<SimulateOutput> {
    let exp = config.validate()?;
    let setup = setup(&exp)?;
    let model = &exp.model;
    let u = exp.u();
    let sim = &config.simulate;
    let t = sim.t.unwrap_or(exp.horizon);
    let grid = match sim.measure {
        SimulateMeasure::Qt => TimeGrid::new(config.mc.dt, t)?,
        _ => exp.mc().grid()?,
    };
    let drift = (sim.measure == SimulateMeasure::Qt).then(|| AlphaDrift::conditioned(model, t, &grid));
    let runs = RngStream::new(config.mc.seed)
        .map_samples(config.mc.n_samples, |k, r| -> Result<_> {
            let path = match (&drift, sim.measure) {
                (Some(d), _) => simulate_qt_with(model, u, t, d, &grid, r)?,
                (None, SimulateMeasure::P) => simulate(model, u, &grid, Measure::P, r)?,
                (None, _) => simulate(model, u, &grid, Measure::Q, r)?,
            };
            let value = match sim.estimator {
                Estimator::Survival => f64::from(u8::from(!path.exited())),
                Estimator::Terminal => setup.terminal_value(&path),
                Estimator::Position => path.stopped(model, path.positions.len() - 1),
            };
            let rows = ((k as usize) < sim.dump_paths).then(|| path_rows(k as usize, model, &path));
            Ok((path.importance_weight * value, path.exited(), path.clamp_events, rows))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let est = McEstimate::from_samples(&values)?;
    fs::create_dir_all(&config.out)?;
    let mut w = csv_writer(&config.out.join("paths.csv"))?;
    for rows in runs.iter().filter_map(|r| r.3.as_ref()) {
        for row in rows {
            w.serialize(row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    let out = SimulateOutput {
        schema_version: SCHEMA_VERSION,
        measure: sim.measure,
        estimator: sim.estimator,
        n_samples: config.mc.n_samples,
        dt: grid.dt(),
        horizon: grid.horizon(),
        seed: config.mc.seed,
        mean: est.mean,
        stderr: est.stderr,
        exits: runs.iter().filter(|r| r.1).count(),
        clamp_events: runs.iter().map(|r| u64::from(r.2)).sum(),
    };
    write_json(&config.out, "simulate.json", &out)?;
    Ok(out)
}

fn path_rows(id: usize, model: &crate::domain::DomainModel, path: &PathSample) -> Vec<PathRow> {
    (0..path.positions.len())
        .map(|i| PathRow {
            sample_id: id,
            step: i,
            time: path.grid.time(i),
            position: path.stopped(model, i),
            exited: !path.survives_to(i),
            weight: path.importance_weight,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualOutput {
    pub mean: f64,
    pub stderr: f64,
    /// `E f^2` minus the kept Parseval terms.
    pub predicted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityOutput {
    pub m: usize,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandOutput {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub a0: f64,
    pub second_moment: f64,
    pub parseval_terms: Vec<f64>,
    pub residual: ResidualOutput,
    pub orthogonality: Vec<OrthogonalityOutput>,
    pub dt: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Monte Carlo chaos expansion up to order `N`; writes `expand.json`.
pub fn run_expand(config: &ExperimentConfig) -> Result<ExpandOutput> {
    let exp = config.validate()?;
    let setup = setup(&exp)?;
    let n = config.n;
    let quad = SimplexQuadrature::new(setup.ops(), exp.u(), &exp.simplex)?;
    let terms = parseval_terms(&setup, &quad, n)?;
    let mc = exp.mc();
    let grid = mc.grid()?;
    let table = setup.table(n, &grid, config.mc.coarse_stride)?;
    let samples = setup.sample(&table, n, &mc)?;
    let second_moment = setup.second_moment()?;
    let residual = partial_sum_residual(&samples, n)?;
    let mut orthogonality = Vec::new();
    for a in 0..=n {
        for b in a + 1..=n {
            let e = orthogonality_estimate(&samples, a, b)?;
            orthogonality.push(OrthogonalityOutput {
                m: a,
                n: b,
                mean: e.mean,
                stderr: e.stderr,
            });
        }
    }
    let parseval: Vec<f64> = terms.iter().map(|t| t.value).collect();
    let out = ExpandOutput {
        schema_version: SCHEMA_VERSION,
        n,
        a0: table.a0(),
        second_moment,
        residual: ResidualOutput {
            mean: residual.mean,
            stderr: residual.stderr,
            predicted: second_moment - parseval.iter().sum::<f64>(),
        },
        parseval_terms: parseval,
        orthogonality,
        dt: mc.dt,
        n_samples: mc.n_samples,
        seed: mc.seed,
    };
    write_json(&config.out, "expand.json", &out)?;
    Ok(out)
}
