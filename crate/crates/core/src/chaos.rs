//! Multiple stochastic integrals along simulated paths and Monte Carlo checks
//! of the Krylov-Veretennikov expansion.
//!
//! All integrals are left-point sums on the simulation grid. The order-`n`
//! integral at outer grid index `m` integrates the inner `n - 1` variables
//! against `w^~_{s_m}`, whose increments depend on `s_m`, so inner sums are
//! recomputed for every outer index. Orders two and three run on a coarsened
//! grid (every `stride`-th node); order one uses the full grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{BoundaryValues, DomainModel};
use crate::error::{Error, Result};
use crate::kernels::{dot, ChaosKernel};
use crate::paths::{
    increments_hat, increments_w_tilde, simulate, simulate_qt_with, AlphaDrift, Measure,
    PathSample, RngStream, TimeGrid,
};
use crate::quadrature::GaussLegendre;
use crate::semigroup::{GridSettings, SemigroupOps};
use crate::stats::McEstimate;

pub const MAX_ORDER: usize = 3;
pub const DEFAULT_COARSE_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Direct simulation under `Q_u`.
    #[default]
    Q,
    /// Simulation under `P_u` with importance weights.
    P,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_samples: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub sampler: Sampler,
}

impl McSettings {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.dt, self.horizon)
    }

    pub fn measure(&self) -> Measure {
        match self.sampler {
            Sampler::Q => Measure::Q,
            Sampler::P => Measure::P,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Argument(format!(
                "n_samples must be at least 2, got {}",
                self.n_samples
            )));
        }
        self.grid().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IteratedIntegralValue {
    pub order: usize,
    pub value: f64,
}

/// Kernels of orders `0..=max_order` tabulated on the grid times of one
/// simulation grid.
pub struct KernelTable {
    kernels: Vec<Arc<ChaosKernel>>,
    dt: f64,
    stride: usize,
    /// `a_1(m dt)` for every fine index `m`.
    first: Vec<f64>,
    /// `rows[l] . stages[k]` for coarse `l + k <= len`, stored by `l`.
    pair: Vec<Vec<f64>>,
    /// `alpha(J stride dt, u)` for coarse indices `J`.
    alpha_coarse: Vec<f64>,
    drift: Option<AlphaDrift>,
}

impl std::fmt::Debug for KernelTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelTable")
            .field("max_order", &self.max_order())
            .field("dt", &self.dt)
            .field("stride", &self.stride)
            .field("steps", &(self.first.len().max(1) - 1))
            .finish()
    }
}

impl KernelTable {
    pub fn new(
        ops: Arc<SemigroupOps>,
        u: f64,
        phi: &BoundaryValues,
        max_order: usize,
        grid: &TimeGrid,
        stride: usize,
    ) -> Result<Self> {
        if max_order > MAX_ORDER {
            return Err(Error::Unsupported(format!(
                "iterated integrals of order {max_order} (at most {MAX_ORDER})"
            )));
        }
        if stride == 0 {
            return Err(Error::Argument("stride must be positive".into()));
        }
        let kernels = (0..=max_order)
            .map(|n| ChaosKernel::new(ops.clone(), u, *phi, n).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let dt = grid.dt();
        let steps = grid.steps();
        let trivial = kernels[0].is_trivial();
        let mut first = Vec::new();
        if max_order >= 1 {
            first = if trivial {
                vec![0.0; steps + 1]
            } else {
                (0..=steps)
                    .map(|m| kernels[1].eval_increments(&[m as f64 * dt]))
                    .collect::<Result<Vec<_>>>()?
            };
        }
        let coarse_dt = stride as f64 * dt;
        let coarse_len = steps / stride;
        let mut pair = Vec::new();
        let mut alpha_coarse = Vec::new();
        if max_order >= 2 {
            alpha_coarse = (0..=coarse_len)
                .map(|j| {
                    if j == 0 {
                        1.0
                    } else {
                        ops.model().alpha_jet_raw(j as f64 * coarse_dt, u).value
                    }
                })
                .collect();
            if !trivial {
                let k2 = &kernels[2];
                let base = k2.stage(&[])?;
                let stages = (1..=coarse_len)
                    .map(|k| ops.alpha_grad_op_tk_tilde_uncached(k as f64 * coarse_dt, &base))
                    .collect::<Result<Vec<_>>>()?;
                pair = (0..coarse_len)
                    .map(|l| {
                        let row = k2.row(l as f64 * coarse_dt)?;
                        Ok(stages[..coarse_len - l]
                            .iter()
                            .map(|h| dot(&row, h.values()))
                            .collect())
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
            }
        }
        let drift = (max_order >= 2 && !trivial).then(|| {
            let times = (1..=coarse_len).map(|k| k as f64 * coarse_dt).collect();
            AlphaDrift::new(ops.model(), times)
        });
        Ok(Self {
            kernels,
            dt,
            stride,
            first,
            pair,
            alpha_coarse,
            drift,
        })
    }

    pub fn max_order(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn kernel(&self, n: usize) -> Option<&Arc<ChaosKernel>> {
        self.kernels.get(n)
    }

    pub fn a0(&self) -> f64 {
        self.kernels[0].a0()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    fn is_trivial(&self) -> bool {
        self.kernels[0].is_trivial()
    }

    /// `a_2(l Dt, m Dt)` on the coarse grid, `l < m`.
    fn second(&self, l: usize, m: usize) -> f64 {
        if self.pair.is_empty() {
            return 0.0;
        }
        self.pair[l][m - l - 1] / self.alpha_coarse[m]
    }

    /// `grad log alpha(k Dt, x)` on the coarse grid.
    fn coarse_drift(&self, model: &DomainModel, k: usize, x: f64) -> f64 {
        match &self.drift {
            Some(table) => table.eval(k - 1, x),
            None => model.grad_log_alpha_raw(k as f64 * self.stride as f64 * self.dt, x),
        }
    }

    fn third(&self, i: usize, j: usize, m: usize) -> Result<f64> {
        let cdt = self.stride as f64 * self.dt;
        self.kernels[3].eval_increments(&[
            i as f64 * cdt,
            (j - i) as f64 * cdt,
            (m - j) as f64 * cdt,
        ])
    }
}

/// `I_n(a_n)` along one path sampled under `Q_u` or `P_u`.
pub fn iterated_integral(
    model: &DomainModel,
    path: &PathSample,
    table: &KernelTable,
    n: usize,
) -> Result<IteratedIntegralValue> {
    if n > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "iterated integrals of order {n} (at most {MAX_ORDER})"
        )));
    }
    if n > table.max_order() {
        return Err(Error::Argument(format!(
            "kernel table holds orders up to {}, asked for {n}",
            table.max_order()
        )));
    }
    if let Measure::Qt(_) = path.measure {
        return Err(Error::Argument(
            "iterated integrals need a path under Q_u or an importance-weighted P_u path".into(),
        ));
    }
    if n >= 1 && (path.grid.dt() != table.dt || path.grid.steps() + 1 > table.first.len()) {
        return Err(Error::Argument(
            "path grid does not match the kernel table".into(),
        ));
    }
    let value = match n {
        0 => table.a0(),
        _ if table.is_trivial() => 0.0,
        1 => {
            let dw = increments_w_tilde(model, path);
            dw.iter().zip(&table.first).map(|(d, a)| a * d).sum()
        }
        _ => {
            let coarse = CoarsePath::new(model, path, table.stride);
            if n == 2 {
                coarse.second_order(model, table)
            } else {
                coarse.third_order(model, table)?
            }
        }
    };
    Ok(IteratedIntegralValue { order: n, value })
}

/// The stopped path sampled every `stride` steps.
struct CoarsePath {
    dt: f64,
    /// Left-point positions of the coarse steps.
    left: Vec<f64>,
    /// `w~` increments over each coarse step, stopped at the exit.
    dw: Vec<f64>,
}

impl CoarsePath {
    fn new(model: &DomainModel, path: &PathSample, stride: usize) -> Self {
        let fine = increments_w_tilde(model, path);
        let left = (0..fine.len().div_ceil(stride))
            .map(|j| path.positions[j * stride])
            .collect();
        let dw = fine.chunks(stride).map(|c| c.iter().sum()).collect();
        Self {
            dt: stride as f64 * path.grid.dt(),
            left,
            dw,
        }
    }

    /// Increment of `w^~_{S_m}` over coarse step `l < m`.
    fn hat(&self, model: &DomainModel, table: &KernelTable, l: usize, m: usize) -> f64 {
        self.dw[l] - table.coarse_drift(model, m - l, self.left[l]) * self.dt
    }

    fn second_order(&self, model: &DomainModel, table: &KernelTable) -> f64 {
        let mut total = 0.0;
        for m in 1..self.dw.len() {
            let mut inner = 0.0;
            for l in 0..m {
                inner += table.second(l, m) * self.hat(model, table, l, m);
            }
            total += inner * self.dw[m];
        }
        total
    }

    fn third_order(&self, model: &DomainModel, table: &KernelTable) -> Result<f64> {
        let mut total = 0.0;
        for m in 2..self.dw.len() {
            let hats: Vec<f64> = (0..m).map(|l| self.hat(model, table, l, m)).collect();
            let mut middle = 0.0;
            for j in 1..m {
                let mut inner = 0.0;
                for (i, h) in hats[..j].iter().enumerate() {
                    inner += table.third(i, j, m)? * h;
                }
                middle += inner * hats[j];
            }
            total += middle * self.dw[m];
        }
        Ok(total)
    }
}

/// Per-path quantities shared by the expansion checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSample {
    pub weight: f64,
    /// `phi(w(tau))`, or `T~ phi(w(T_h))` for paths alive at the horizon.
    pub f: f64,
    /// `I_0, ..., I_N`.
    pub integrals: Vec<f64>,
    pub exited: bool,
}

/// Everything needed to evaluate the expansion of `phi(w(tau))` from `u`.
pub struct ChaosSetup {
    model: DomainModel,
    u: f64,
    phi: BoundaryValues,
    ops: Arc<SemigroupOps>,
}

impl ChaosSetup {
    pub fn new(
        model: &DomainModel,
        u: f64,
        phi: &BoundaryValues,
        grid: &GridSettings,
    ) -> Result<Self> {
        model.check_boundary_values(phi)?;
        let ops = Arc::new(SemigroupOps::new(model.clone(), grid, u)?);
        Ok(Self {
            model: model.clone(),
            u,
            phi: *phi,
            ops,
        })
    }

    pub fn ops(&self) -> &Arc<SemigroupOps> {
        &self.ops
    }

    pub fn model(&self) -> &DomainModel {
        &self.model
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn phi(&self) -> &BoundaryValues {
        &self.phi
    }

    /// `E_{Q_u} phi(w(tau))^2` from the harmonic measure.
    pub fn second_moment(&self) -> Result<f64> {
        let h = self.model.harmonic_measure(self.u)?;
        let beta = self.model.beta(self.u)?;
        Ok(h.atoms
            .iter()
            .map(|a| {
                let v = self.phi.get(a.side).unwrap_or(0.0);
                a.mass * self.model.rho(a.side) / beta * v * v
            })
            .sum())
    }

    pub fn table(&self, max_order: usize, grid: &TimeGrid, stride: usize) -> Result<KernelTable> {
        KernelTable::new(self.ops.clone(), self.u, &self.phi, max_order, grid, stride)
    }

    /// `phi(w(tau))` for an exited path, `T~ phi` at the last position otherwise.
    pub fn terminal_value(&self, path: &PathSample) -> f64 {
        match path.exit_side {
            Some(side) => self.phi.get(side).unwrap_or(0.0),
            None => {
                self.ops
                    .t_tilde_jet_raw(&self.phi, path.last_position())
                    .value
            }
        }
    }

    /// Simulates `mc.n_samples` paths and evaluates `I_0..=I_N` on each.
    pub fn sample(
        &self,
        table: &KernelTable,
        n_max: usize,
        mc: &McSettings,
    ) -> Result<Vec<ChaosSample>> {
        mc.check()?;
        let grid = mc.grid()?;
        let measure = mc.measure();
        let rng = RngStream::new(mc.seed);
        rng.map_samples(mc.n_samples, |_, r| {
            let path = simulate(&self.model, self.u, &grid, measure, r)?;
            let integrals = (0..=n_max)
                .map(|n| iterated_integral(&self.model, &path, table, n).map(|v| v.value))
                .collect::<Result<Vec<_>>>()?;
            Ok(ChaosSample {
                weight: path.importance_weight,
                f: self.terminal_value(&path),
                integrals,
                exited: path.exited(),
            })
        })
        .into_iter()
        .collect()
    }

    /// Monte Carlo estimate of `E_{Q_u}(phi(w(tau)) - T~ phi(u) - int grad T~ phi dw~)^2`.
    pub fn clark_residual(&self, mc: &McSettings) -> Result<McEstimate> {
        mc.check()?;
        let grid = mc.grid()?;
        let measure = mc.measure();
        let a0 = self.ops.op_t_tilde(&self.phi, self.u)?;
        let rng = RngStream::new(mc.seed);
        let values = rng
            .map_samples(mc.n_samples, |_, r| {
                let path = simulate(&self.model, self.u, &grid, measure, r)?;
                let dw = increments_w_tilde(&self.model, &path);
                let integral: f64 = dw
                    .iter()
                    .zip(&path.positions)
                    .map(|(d, &x)| self.ops.t_tilde_jet_raw(&self.phi, x).d1 * d)
                    .sum();
                let res = self.terminal_value(&path) - a0 - integral;
                Ok(path.importance_weight * res * res)
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        McEstimate::from_samples(&values)
    }
}

fn weighted(samples: &[ChaosSample], f: impl Fn(&ChaosSample) -> f64) -> Result<McEstimate> {
    let values: Vec<f64> = samples.iter().map(|s| s.weight * f(s)).collect();
    McEstimate::from_samples(&values)
}

/// Estimate of `E_{Q_u}(f - S_N)^2` with `S_N = I_0 + ... + I_N`.
pub fn partial_sum_residual(samples: &[ChaosSample], n: usize) -> Result<McEstimate> {
    check_orders(samples, n)?;
    weighted(samples, |s| {
        let r = s.f - s.integrals[..=n].iter().sum::<f64>();
        r * r
    })
}

/// Estimate of `E_{Q_u}[I_m I_n]`.
pub fn orthogonality_estimate(samples: &[ChaosSample], m: usize, n: usize) -> Result<McEstimate> {
    check_orders(samples, m.max(n))?;
    weighted(samples, |s| s.integrals[m] * s.integrals[n])
}

fn check_orders(samples: &[ChaosSample], n: usize) -> Result<()> {
    match samples.first() {
        Some(s) if s.integrals.len() > n => Ok(()),
        Some(_) => Err(Error::Argument(format!("samples lack order {n}"))),
        None => Err(Error::Argument("no samples".into())),
    }
}

/// Both sides of the conditioned-measure identity for `psi` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub lhs: McEstimate,
    pub rhs: f64,
    pub clamp_events: u64,
    pub failures: usize,
}

/// Time quadrature nodes for the deterministic side.
pub const IDENTITY_QUADRATURE_NODES: usize = 48;

/// Compares `E_{Q_{t,u}} psi(w(t)) int_0^t g dw^~_t` by simulation with
/// `int_0^t alpha(s, u)/alpha(t, u) T~^k_s(alpha(t - s, .) grad T~^k_{t - s} psi)(u) g(s) ds`.
pub fn identity_check(
    setup: &ChaosSetup,
    t: f64,
    psi: &(dyn Fn(f64) -> f64 + Sync),
    g: &(dyn Fn(f64) -> f64 + Sync),
    mc: &McSettings,
) -> Result<IdentityResult> {
    mc.check()?;
    let model = setup.model();
    let u = setup.u();
    let ops = setup.ops();
    let grid = mc.grid()?;
    if t > grid.horizon() {
        return Err(Error::Argument(format!(
            "t = {t} exceeds the horizon {}",
            grid.horizon()
        )));
    }
    let alpha_t = model.alpha(t, u)?;
    let psi_grid = ops.function(psi);
    let rule = GaussLegendre::new(IDENTITY_QUADRATURE_NODES);
    let (nodes, weights) = rule.mapped(0.0, t);
    let rhs = nodes
        .iter()
        .zip(&weights)
        .map(|(&s, &w)| {
            let h = ops.alpha_grad_op_tk_tilde_uncached(t - s, &psi_grid)?;
            let inner = ops.tk_tilde_at(s, &h, u)?.0;
            Ok(w * model.alpha(s, u)? / alpha_t * inner * g(s))
        })
        .sum::<Result<f64>>()?;

    let drift = AlphaDrift::conditioned(model, t, &grid);
    let rng = RngStream::new(mc.seed);
    let runs = rng
        .map_samples(mc.n_samples, |_, r| {
            let path = simulate_qt_with(model, u, t, &drift, &grid, r)?;
            let integral: f64 = increments_hat(model, &path, t)
                .iter()
                .enumerate()
                .map(|(i, d)| g(grid.time(i)) * d)
                .sum();
            let end = path.stopped(model, grid.steps_to(t));
            Ok((psi(end) * integral, path.clamp_events, path.exited()))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok(IdentityResult {
        lhs: McEstimate::from_samples(&values)?,
        rhs,
        clamp_events: runs.iter().map(|r| r.1 as u64).sum(),
        failures: runs.iter().filter(|r| r.2).count(),
    })
}
