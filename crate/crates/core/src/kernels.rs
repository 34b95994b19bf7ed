//! Krylov-Veretennikov kernels of `phi(w(tau))` and their Parseval weights.
//!
//! The order-`n` kernel at `0 < t_1 < ... < t_n` is
//!
//! ```text
//! a_n = alpha(t_n, u)^{-1} (T^k_{t_1} h_1)(u),
//! h_n = grad T~ phi,
//! h_{j-1} = alpha(t_j - t_{j-1}, .) grad T~^k_{t_j - t_{j-1}} h_j,   j = n, ..., 2,
//! ```
//!
//! using `alpha(t_1, .) T~^k_{t_1} = T^k_{t_1}`. Intermediate stages depend only
//! on the time increments and are cached by increment suffix.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::domain::BoundaryValues;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::semigroup::{GridFunction, SemigroupOps};

pub const DEFAULT_SIMPLEX_NODES: usize = 24;
pub const DEFAULT_ALPHA_FLOOR: f64 = 1e-6;
const MAX_HORIZON: f64 = 1e4;
const PANEL_BREAKS: [f64; 4] = [0.0, 0.05, 0.2, 1.0];

type StageCache = Mutex<HashMap<Vec<u64>, Arc<GridFunction>>>;

/// The order-`n` kernel for boundary data `phi` started from `u`.
pub struct ChaosKernel {
    ops: Arc<SemigroupOps>,
    u: f64,
    phi: BoundaryValues,
    order: usize,
    a0: f64,
    base: GridFunction,
    stages: StageCache,
    rows: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for ChaosKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChaosKernel")
            .field("order", &self.order)
            .field("u", &self.u)
            .field("phi", &self.phi)
            .field("a0", &self.a0)
            .finish()
    }
}

impl ChaosKernel {
    pub fn new(ops: Arc<SemigroupOps>, u: f64, phi: BoundaryValues, order: usize) -> Result<Self> {
        if !ops.model().is_interior(u) {
            return Err(Error::Domain(format!("base point {u} is not interior")));
        }
        let a0 = ops.op_t_tilde(&phi, u)?;
        let base = ops.grad_t_tilde_grid(&phi)?;
        Ok(Self {
            ops,
            u,
            phi,
            order,
            a0,
            base,
            stages: Mutex::new(HashMap::new()),
            rows: Mutex::new(HashMap::new()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base_point(&self) -> f64 {
        self.u
    }

    pub fn phi(&self) -> &BoundaryValues {
        &self.phi
    }

    pub fn ops(&self) -> &Arc<SemigroupOps> {
        &self.ops
    }

    /// The constant term `T~ phi(u)`.
    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// Whether every kernel of positive order vanishes identically.
    pub fn is_trivial(&self) -> bool {
        self.base.values().iter().all(|&v| v == 0.0)
    }

    /// Kernel value at strictly increasing positive times.
    pub fn eval(&self, times: &[f64]) -> Result<f64> {
        if times.len() != self.order {
            return Err(Error::Argument(format!(
                "order-{} kernel needs {} times, got {}",
                self.order,
                self.order,
                times.len()
            )));
        }
        let mut prev = 0.0;
        let mut increments = Vec::with_capacity(times.len());
        for &t in times {
            if !(t > prev) || !t.is_finite() {
                return Err(Error::Argument(format!(
                    "times must be strictly increasing and positive, got {times:?}"
                )));
            }
            increments.push(t - prev);
            prev = t;
        }
        self.eval_increments(&increments)
    }

    /// Kernel value from increments `(t_1, t_2 - t_1, ..., t_n - t_{n-1})`.
    ///
    /// The first increment may be zero, which gives the `t_1 -> 0` limit used by
    /// left-point sums starting at time zero.
    pub fn eval_increments(&self, increments: &[f64]) -> Result<f64> {
        if increments.len() != self.order {
            return Err(Error::Argument(format!(
                "order-{} kernel needs {} increments, got {}",
                self.order,
                self.order,
                increments.len()
            )));
        }
        if self.order == 0 {
            return Ok(self.a0);
        }
        if !(increments[0] >= 0.0) || increments[1..].iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Argument(format!(
                "invalid time increments {increments:?}"
            )));
        }
        if self.is_trivial() {
            return Ok(0.0);
        }
        let h = self.stage(&increments[1..])?;
        let t_n: f64 = increments.iter().sum();
        let alpha = if t_n == 0.0 {
            1.0
        } else {
            self.ops.model().alpha_jet_raw(t_n, self.u).value
        };
        let row = self.row(increments[0])?;
        Ok(dot(&row, h.values()) / alpha)
    }

    /// Row vector `r` with `T^k_t h(u) = r . h`; `t = 0` is point evaluation.
    pub fn row(&self, t: f64) -> Result<Arc<Vec<f64>>> {
        let key = t.to_bits();
        if let Some(r) = self.rows.lock().unwrap().get(&key) {
            return Ok(r.clone());
        }
        let row = if t == 0.0 {
            let grid = self.ops.grid();
            let mut basis = vec![0.0; grid.len()];
            let unit = |j: usize| {
                let mut e = vec![0.0; grid.len()];
                e[j] = 1.0;
                e
            };
            for (j, b) in basis.iter_mut().enumerate() {
                *b = grid.interpolate(&unit(j), self.u);
            }
            basis
        } else {
            self.ops.row(t, self.u)?.0
        };
        let row = Arc::new(row);
        self.rows.lock().unwrap().insert(key, row.clone());
        Ok(row)
    }

    /// Stage `h` for the increment suffix `(t_2 - t_1, ..., t_n - t_{n-1})`.
    pub fn stage(&self, suffix: &[f64]) -> Result<Arc<GridFunction>> {
        if suffix.is_empty() {
            return Ok(Arc::new(self.base.clone()));
        }
        let key: Vec<u64> = suffix.iter().map(|d| d.to_bits()).collect();
        if let Some(h) = self.stages.lock().unwrap().get(&key) {
            return Ok(h.clone());
        }
        let inner = self.stage(&suffix[1..])?;
        let h = Arc::new(self.ops.alpha_grad_op_tk_tilde(suffix[0], &inner)?);
        self.stages.lock().unwrap().insert(key, h.clone());
        Ok(h)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSettings {
    pub nodes_per_axis: usize,
    /// Horizon override; by default the first time with `alpha(T, u) < alpha_floor`.
    pub t_max: Option<f64>,
    pub alpha_floor: f64,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        Self {
            nodes_per_axis: DEFAULT_SIMPLEX_NODES,
            t_max: None,
            alpha_floor: DEFAULT_ALPHA_FLOOR,
        }
    }
}

/// Product rule in increment variables on `[0, T_max]^n`.
///
/// Each axis is a composite Gauss-Legendre rule on the panels
/// `T_max * [0, 0.05, 0.2, 1]`, with the axis nodes split evenly between the
/// panels; the grading resolves the fast change of `alpha(t, u)` at small `t`.
/// The box contains the simplex `{t_n < T_max}`, so only mass with
/// `t_n > T_max` is neglected.
#[derive(Debug, Clone)]
pub struct SimplexQuadrature {
    t_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SimplexQuadrature {
    pub fn new(ops: &SemigroupOps, u: f64, settings: &SimplexSettings) -> Result<Self> {
        if settings.nodes_per_axis == 0 {
            return Err(Error::Argument("nodes_per_axis must be positive".into()));
        }
        let t_max = match settings.t_max {
            Some(t) if t > 0.0 => t,
            Some(t) => return Err(Error::Argument(format!("t_max must be positive, got {t}"))),
            None => survival_horizon(ops, u, settings.alpha_floor)?,
        };
        let per_panel = settings.nodes_per_axis.div_ceil(PANEL_BREAKS.len() - 1);
        let rule = GaussLegendre::new(per_panel);
        let (mut nodes, mut weights) = (Vec::new(), Vec::new());
        for w in PANEL_BREAKS.windows(2) {
            let (x, wt) = rule.mapped(w[0] * t_max, w[1] * t_max);
            nodes.extend(x);
            weights.extend(wt);
        }
        Ok(Self {
            t_max,
            nodes,
            weights,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// First time (to bisection accuracy) with `alpha(T, u) < floor`.
pub fn survival_horizon(ops: &SemigroupOps, u: f64, floor: f64) -> Result<f64> {
    let model = ops.model();
    let alpha = |t: f64| model.alpha_jet_raw(t, u).value;
    let mut hi = 1.0;
    while alpha(hi) >= floor {
        hi *= 2.0;
        if hi > MAX_HORIZON {
            return Ok(MAX_HORIZON);
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if alpha(mid) >= floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// One Parseval weight `int alpha(t_n, u) |a_n|^2` over the ordered simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsevalTerm {
    pub order: usize,
    pub value: f64,
    /// Estimated bound on the mass beyond `T_max`, from
    /// `alpha(t, u) <= C exp(-lambda_1 t)` and the largest kernel value seen.
    pub tail_bound: f64,
}

pub fn parseval_term(kernel: &ChaosKernel, quad: &SimplexQuadrature) -> Result<ParsevalTerm> {
    let n = kernel.order();
    if n == 0 {
        return Ok(ParsevalTerm {
            order: 0,
            value: kernel.a0() * kernel.a0(),
            tail_bound: 0.0,
        });
    }
    if kernel.is_trivial() {
        return Ok(ParsevalTerm {
            order: n,
            value: 0.0,
            tail_bound: 0.0,
        });
    }
    let model = kernel.ops().model();
    let u = kernel.base_point();
    let k = quad.nodes.len();
    let mut idx = vec![0usize; n];
    let mut inc = vec![0.0; n];
    let mut total = 0.0;
    let mut sup: f64 = 0.0;
    loop {
        let mut w = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            inc[j] = quad.nodes[i];
            w *= quad.weights[i];
        }
        let a = kernel.eval_increments(&inc)?;
        let t_n: f64 = inc.iter().sum();
        total += w * model.alpha_jet_raw(t_n, u).value * a * a;
        sup = sup.max(a.abs());
        // Odometer over the product grid, last axis fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                let tail = tail_estimate(kernel, quad.t_max, sup);
                return Ok(ParsevalTerm {
                    order: n,
                    value: total,
                    tail_bound: tail,
                });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn tail_estimate(kernel: &ChaosKernel, t_max: f64, sup: f64) -> f64 {
    if sup == 0.0 {
        return 0.0;
    }
    let model = kernel.ops().model();
    let lambda = model.principal_eigenvalue();
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    let n = kernel.order();
    let c = model.alpha_decay_constant(kernel.base_point(), t_max);
    // int_T^inf exp(-lambda t) t^{n-1}/(n-1)! dt
    let mut s = 0.0;
    let mut term = 1.0; // T^k / k!
    for kk in 0..n {
        if kk > 0 {
            term *= t_max / kk as f64;
        }
        s += term / lambda.powi((n - kk) as i32);
    }
    sup * sup * c * (-lambda * t_max).exp() * s
}
