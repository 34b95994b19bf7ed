//! Exit and killed-semigroup operators of the tilted measure.
//!
//! Functions on the domain are carried as values at Gauss-Legendre nodes
//! ([`GridFunction`]). The killed semigroup is applied through the h-transform
//! representation
//!
//! ```text
//! T^k_s f(v) = beta(v)^{-1} int p_s(v, y) beta(y) f(y) dy
//! ```
//!
//! where `f` between nodes is the barycentric interpolant. The `y` integral is
//! evaluated on a window of `+-12 sqrt(s)` around `v` split into panels of width
//! at most `sqrt(s)`, so the operator stays accurate for times much smaller
//! than the squared node spacing. Gradients use the differentiated kernel.
//!
//! On the half-line the grid is truncated at `cutoff`; the neglected kernel
//! mass from a point `v` is at most `P(N(0,1) > (cutoff - v)/sqrt(s))`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::domain::{BoundaryValues, DomainModel, Jet};
use crate::error::{Error, Result};
use crate::quadrature::{self, GaussLegendre};

pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_HALFLINE_CUTOFF: f64 = 10.0;

const WINDOW_SDS: f64 = 12.0;
const PANEL_POINTS: usize = 16;
const MAX_CACHED_TIMES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub nodes: usize,
    /// Half-line truncation, in position units past the base point.
    pub halfline_cutoff: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            halfline_cutoff: DEFAULT_HALFLINE_CUTOFF,
        }
    }
}

/// Strictly interior Gauss-Legendre nodes on the (truncated) domain.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl QuadratureGrid {
    /// Grid for `model`; on the half-line it covers `(0, u + cutoff)`.
    pub fn new(model: &DomainModel, settings: &GridSettings, u: f64) -> Result<Self> {
        if settings.nodes < 2 {
            return Err(Error::Argument("grid needs at least two nodes".into()));
        }
        let lo = model.lower();
        let hi = match model.upper() {
            Some(b) => b,
            None => {
                if !(settings.halfline_cutoff > 0.0) {
                    return Err(Error::Argument("halfline_cutoff must be positive".into()));
                }
                u.max(0.0) + settings.halfline_cutoff
            }
        };
        let (nodes, weights) = GaussLegendre::new(settings.nodes).mapped(lo, hi);
        let bary = quadrature::barycentric_weights(&nodes);
        Ok(Self {
            nodes,
            weights,
            bary,
            lo,
            hi,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        quadrature::interpolate(&self.nodes, &self.bary, values, x)
    }

    fn basis_into(&self, x: f64, out: &mut [f64]) {
        quadrature::lagrange_basis_into(&self.nodes, &self.bary, x, out)
    }
}

/// A function on the domain given by its values at the grid nodes.
///
/// `rank` counts applied gradients, the tensor order the values would have in
/// higher dimension.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
    rank: usize,
}

impl GridFunction {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>, rank: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, rank })
    }

    pub fn from_fn(grid: Arc<QuadratureGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Self {
            grid,
            values,
            rank: 0,
        }
    }

    pub fn constant(grid: Arc<QuadratureGrid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Barycentric interpolation at an arbitrary point.
    pub fn at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Dense operator matrices of `T^k_s` on the grid, row-major.
#[derive(Debug)]
struct KilledMatrices {
    value: Vec<f64>,
    grad: Vec<f64>,
    alpha: Vec<f64>,
    grad_log_alpha: Vec<f64>,
}

/// The four operators of the tilted measure on a fixed grid.
pub struct SemigroupOps {
    model: DomainModel,
    grid: Arc<QuadratureGrid>,
    panel_rule: GaussLegendre,
    cache: Mutex<HashMap<u64, Arc<KilledMatrices>>>,
}

impl std::fmt::Debug for SemigroupOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemigroupOps")
            .field("model", &self.model)
            .field("nodes", &self.grid.len())
            .finish()
    }
}

impl SemigroupOps {
    pub fn new(model: DomainModel, settings: &GridSettings, u: f64) -> Result<Self> {
        let grid = Arc::new(QuadratureGrid::new(&model, settings, u)?);
        Ok(Self {
            model,
            grid,
            panel_rule: GaussLegendre::new(PANEL_POINTS),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &DomainModel {
        &self.model
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn function(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(self.grid.clone(), f)
    }

    fn check_boundary(&self, psi: &BoundaryValues, v: f64) -> Result<()> {
        self.model.check_boundary_values(psi)?;
        if !self.model.is_interior(v) {
            return Err(Error::Domain(format!("point {v} is not interior")));
        }
        Ok(())
    }

    /// Affine (or constant) function `v -> T psi(v)` as (value, slope).
    fn exit_integral(&self, psi: &BoundaryValues, v: f64) -> (f64, f64) {
        match &self.model {
            DomainModel::Interval(d) => {
                let l = d.len();
                let left = d.rho_a() * psi.left.unwrap_or(0.0);
                let right = d.rho_b() * psi.right.unwrap_or(0.0);
                let value = left * (d.b() - v) / l + right * (v - d.a()) / l;
                (value, (right - left) / l)
            }
            DomainModel::HalfLine(d) => (d.rho_0() * psi.left.unwrap_or(0.0), 0.0),
        }
    }

    /// `T psi(v) = E_v[rho(w(tau)) psi(w(tau))]`.
    pub fn op_t(&self, psi: &BoundaryValues, v: f64) -> Result<f64> {
        self.check_boundary(psi, v)?;
        Ok(self.exit_integral(psi, v).0)
    }

    /// `T~ psi = T psi / beta`, the exit expectation under `Q_v`.
    pub fn op_t_tilde(&self, psi: &BoundaryValues, v: f64) -> Result<f64> {
        Ok(self.t_tilde_jet(psi, v)?.value)
    }

    pub fn grad_op_t_tilde(&self, psi: &BoundaryValues, v: f64) -> Result<f64> {
        Ok(self.t_tilde_jet(psi, v)?.d1)
    }

    /// `T~ psi` with its first two derivatives.
    pub fn t_tilde_jet(&self, psi: &BoundaryValues, v: f64) -> Result<Jet> {
        self.check_boundary(psi, v)?;
        Ok(self.t_tilde_jet_raw(psi, v))
    }

    pub(crate) fn t_tilde_jet_raw(&self, psi: &BoundaryValues, v: f64) -> Jet {
        match &self.model {
            // T~ psi = psi(a) + (psi(b) - psi(a)) q(v) with q(v) = Q_v(exit at b), which
            // keeps constants exact.
            DomainModel::Interval(d) => {
                let left = psi.left.unwrap_or(0.0);
                let jump = psi.right.unwrap_or(0.0) - left;
                let l = d.len();
                let b = self.model.beta_raw(v);
                let b1 = self.model.beta_slope();
                let q = d.rho_b() * (v - d.a()) / (l * b);
                let q1 = d.rho_a() * d.rho_b() / (l * b * b);
                Jet {
                    value: left + jump * q,
                    d1: jump * q1,
                    d2: -2.0 * jump * q1 * b1 / b,
                }
            }
            DomainModel::HalfLine(_) => Jet {
                value: psi.left.unwrap_or(0.0),
                d1: 0.0,
                d2: 0.0,
            },
        }
    }

    /// `grad T~ psi` at the grid nodes, rank one.
    pub fn grad_t_tilde_grid(&self, psi: &BoundaryValues) -> Result<GridFunction> {
        self.model.check_boundary_values(psi)?;
        let values = self
            .grid
            .nodes
            .iter()
            .map(|&x| self.t_tilde_jet_raw(psi, x).d1)
            .collect();
        GridFunction::new(self.grid.clone(), values, 1)
    }

    fn require_time(s: f64) -> Result<()> {
        if s > 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("time must be positive, got {s}")))
        }
    }

    /// Rows `r, g` with `T^k_s f(v) = r . f` and `d/dv T^k_s f(v) = g . f`.
    pub fn row(&self, s: f64, v: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        Self::require_time(s)?;
        if !self.model.is_interior(v) {
            return Err(Error::Domain(format!("point {v} is not interior")));
        }
        let m = self.grid.len();
        let mut value = vec![0.0; m];
        let mut grad = vec![0.0; m];
        self.row_into(s, v, &mut value, &mut grad);
        Ok((value, grad))
    }

    fn row_into(&self, s: f64, v: f64, value: &mut [f64], grad: &mut [f64]) {
        let (lo, hi) = self.grid.bounds();
        let sd = s.sqrt();
        let w_lo = (v - WINDOW_SDS * sd).max(lo);
        let w_hi = (v + WINDOW_SDS * sd).min(hi);
        let width = w_hi - w_lo;
        let panels = ((width / sd).ceil() as usize).clamp(4, 64);
        let h = width / panels as f64;
        let m = self.grid.len();
        let mut basis = vec![0.0; m];
        let mut f_val = vec![0.0; m];
        let mut f_dx = vec![0.0; m];
        for p in 0..panels {
            let p_lo = w_lo + h * p as f64;
            let (ys, ws) = self.panel_rule.mapped(p_lo, p_lo + h);
            for (&y, &w) in ys.iter().zip(&ws) {
                let (k, kx) = self.model.kernel_raw(s, v, y);
                let by = self.model.beta_raw(y) * w;
                let (cv, cd) = (k * by, kx * by);
                if cv == 0.0 && cd == 0.0 {
                    continue;
                }
                self.grid.basis_into(y, &mut basis);
                for j in 0..m {
                    f_val[j] += cv * basis[j];
                    f_dx[j] += cd * basis[j];
                }
            }
        }
        let bv = self.model.beta_raw(v);
        let glb = self.model.grad_log_beta_raw(v);
        for j in 0..m {
            value[j] = f_val[j] / bv;
            grad[j] = (f_dx[j] - glb * f_val[j]) / bv;
        }
    }

    fn build_matrices(&self, s: f64) -> KilledMatrices {
        let m = self.grid.len();
        let mut value = vec![0.0; m * m];
        let mut grad = vec![0.0; m * m];
        for (i, &x) in self.grid.nodes.iter().enumerate() {
            self.row_into(
                s,
                x,
                &mut value[i * m..(i + 1) * m],
                &mut grad[i * m..(i + 1) * m],
            );
        }
        let alpha = self
            .grid
            .nodes
            .iter()
            .map(|&x| self.model.alpha_jet_raw(s, x).value)
            .collect();
        let grad_log_alpha = self
            .grid
            .nodes
            .iter()
            .map(|&x| self.model.grad_log_alpha_raw(s, x))
            .collect();
        KilledMatrices {
            value,
            grad,
            alpha,
            grad_log_alpha,
        }
    }

    fn matrices(&self, s: f64) -> Result<Arc<KilledMatrices>> {
        Self::require_time(s)?;
        let key = s.to_bits();
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(self.build_matrices(s));
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= MAX_CACHED_TIMES {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(built).clone())
    }

    fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(&f.grid, &self.grid) && f.values.len() != self.grid.len() {
            return Err(Error::Argument(
                "grid function lives on another grid".into(),
            ));
        }
        Ok(())
    }

    fn apply(matrix: &[f64], f: &[f64]) -> Vec<f64> {
        let m = f.len();
        matrix
            .chunks_exact(m)
            .map(|row| row.iter().zip(f).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `T^k_s f` at the grid nodes.
    pub fn op_tk(&self, s: f64, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f)?;
        let mats = self.matrices(s)?;
        GridFunction::new(
            self.grid.clone(),
            Self::apply(&mats.value, &f.values),
            f.rank,
        )
    }

    /// [`Self::op_tk`] computed without touching the matrix cache.
    pub fn op_tk_uncached(&self, s: f64, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f)?;
        Self::require_time(s)?;
        let mats = self.build_matrices(s);
        GridFunction::new(
            self.grid.clone(),
            Self::apply(&mats.value, &f.values),
            f.rank,
        )
    }

    /// `T~^k_s f = T^k_s f / alpha(s, .)`.
    pub fn op_tk_tilde(&self, s: f64, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f)?;
        let mats = self.matrices(s)?;
        let values = Self::apply(&mats.value, &f.values)
            .into_iter()
            .zip(&mats.alpha)
            .map(|(t, a)| t / a)
            .collect();
        GridFunction::new(self.grid.clone(), values, f.rank)
    }

    /// `grad T~^k_s f`, from the differentiated kernel; raises the rank by one.
    pub fn grad_op_tk_tilde(&self, s: f64, f: &GridFunction) -> Result<GridFunction> {
        let weighted = self.alpha_grad_op_tk_tilde(s, f)?;
        let mats = self.matrices(s)?;
        let values = weighted
            .values
            .iter()
            .zip(&mats.alpha)
            .map(|(w, a)| w / a)
            .collect();
        GridFunction::new(self.grid.clone(), values, weighted.rank)
    }

    /// `alpha(s, .) grad T~^k_s f = grad T^k_s f - T^k_s f grad log alpha(s, .)`.
    pub fn alpha_grad_op_tk_tilde(&self, s: f64, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f)?;
        let mats = self.matrices(s)?;
        Ok(Self::weighted_grad(&mats, f))
    }

    /// Like [`Self::alpha_grad_op_tk_tilde`] but without caching the matrices.
    pub fn alpha_grad_op_tk_tilde_uncached(
        &self,
        s: f64,
        f: &GridFunction,
    ) -> Result<GridFunction> {
        self.check_grid(f)?;
        Self::require_time(s)?;
        let mats = self.build_matrices(s);
        Ok(Self::weighted_grad(&mats, f))
    }

    fn weighted_grad(mats: &KilledMatrices, f: &GridFunction) -> GridFunction {
        let tf = Self::apply(&mats.value, &f.values);
        let gf = Self::apply(&mats.grad, &f.values);
        let values = gf
            .iter()
            .zip(&tf)
            .zip(&mats.grad_log_alpha)
            .map(|((g, t), gla)| g - t * gla)
            .collect();
        GridFunction {
            grid: f.grid.clone(),
            values,
            rank: f.rank + 1,
        }
    }

    /// `T^k_s f(v)` at an arbitrary interior point.
    pub fn tk_at(&self, s: f64, f: &GridFunction, v: f64) -> Result<f64> {
        self.check_grid(f)?;
        let (row, _) = self.row(s, v)?;
        Ok(row.iter().zip(&f.values).map(|(a, b)| a * b).sum())
    }

    /// `T~^k_s f(v)` and its gradient at an arbitrary interior point.
    pub fn tk_tilde_at(&self, s: f64, f: &GridFunction, v: f64) -> Result<(f64, f64)> {
        self.check_grid(f)?;
        let (row, grow) = self.row(s, v)?;
        let t: f64 = row.iter().zip(&f.values).map(|(a, b)| a * b).sum();
        let g: f64 = grow.iter().zip(&f.values).map(|(a, b)| a * b).sum();
        let alpha = self.model.alpha_jet_raw(s, v).value;
        let gla = self.model.grad_log_alpha_raw(s, v);
        Ok((t / alpha, (g - t * gla) / alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Side;

    fn scenario_ops() -> SemigroupOps {
        let m = DomainModel::interval(0.0, 1.0, 0.2, 0.8).unwrap();
        SemigroupOps::new(m, &GridSettings::default(), 0.5).unwrap()
    }

    fn indicator_right() -> BoundaryValues {
        BoundaryValues::interval(0.0, 1.0)
    }

    #[test]
    fn grid_is_interior_with_correct_mass() {
        let ops = scenario_ops();
        let g = ops.grid();
        assert_eq!(g.len(), 64);
        assert!(g.nodes().iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(g.weights().iter().all(|&w| w > 0.0));
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exit_operator_examples() {
        let ops = scenario_ops();
        let one = BoundaryValues::constant(1.0);
        for &v in &[0.1, 0.5, 0.77] {
            assert!((ops.op_t(&one, v).unwrap() - ops.model().beta(v).unwrap()).abs() < 1e-15);
            assert!((ops.op_t_tilde(&one, v).unwrap() - 1.0).abs() < 1e-15);
            assert!(ops.grad_op_t_tilde(&one, v).unwrap().abs() < 1e-15);
            let c = BoundaryValues::constant(-2.5);
            assert!((ops.op_t_tilde(&c, v).unwrap() + 2.5).abs() < 1e-14);
        }
        assert!((ops.op_t(&indicator_right(), 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert!((ops.op_t_tilde(&indicator_right(), 0.5).unwrap() - 0.8).abs() < 1e-15);

        let half = SemigroupOps::new(
            DomainModel::halfline(0.7).unwrap(),
            &GridSettings::default(),
            1.0,
        )
        .unwrap();
        let two = BoundaryValues::halfline(2.0);
        for &v in &[0.1, 1.0, 7.0] {
            assert!((half.op_t(&two, v).unwrap() - 1.4).abs() < 1e-15);
            assert_eq!(half.grad_op_t_tilde(&two, v).unwrap(), 0.0);
        }
    }

    #[test]
    fn missing_boundary_value_is_a_config_error() {
        let ops = scenario_ops();
        let partial = BoundaryValues::halfline(1.0);
        match ops.op_t(&partial, 0.5) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grad_t_tilde_matches_finite_differences() {
        let ops = scenario_ops();
        let psi = BoundaryValues::interval(-0.3, 1.7);
        let h = 1e-6;
        for i in 0..20 {
            let v = 0.02 + 0.048 * i as f64;
            let fd = (ops.op_t_tilde(&psi, v + h).unwrap() - ops.op_t_tilde(&psi, v - h).unwrap())
                / (2.0 * h);
            assert!((ops.grad_op_t_tilde(&psi, v).unwrap() - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn t_tilde_solves_the_tilted_laplace_equation() {
        let ops = scenario_ops();
        let psi = indicator_right();
        for &x in ops.grid().nodes() {
            let j = ops.t_tilde_jet(&psi, x).unwrap();
            let residual = ops.model().grad_log_beta(x).unwrap() * j.d1 + 0.5 * j.d2;
            assert!(residual.abs() < 1e-8);
            // Second derivative checked against a difference quotient.
            let h = 1e-4;
            if x > 2.0 * h && x < 1.0 - 2.0 * h {
                let f = |y| ops.op_t_tilde(&psi, y).unwrap();
                let fd2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
                assert!((fd2 - j.d2).abs() < 1e-4 * j.d2.abs().max(1.0));
            }
        }
        let _ = Side::Left;
    }

    #[test]
    fn normalisation_matches_alpha() {
        let ops = scenario_ops();
        let one = ops.function(|_| 1.0);
        for &t in &[1e-3, 0.1, 0.5, 1.0] {
            let tk = ops.op_tk(t, &one).unwrap();
            for (&x, &v) in ops.grid().nodes().iter().zip(tk.values()) {
                let a = ops.model().alpha(t, x).unwrap();
                assert!((v - a).abs() < 1e-8, "t={t} x={x}: {v} vs {a}");
            }
            let tilde = ops.op_tk_tilde(t, &one).unwrap();
            assert!(tilde.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
            let grad = ops.grad_op_tk_tilde(t, &one).unwrap();
            assert_eq!(grad.rank(), 1);
            assert!(grad.max_abs() < 1e-8, "t={t}: {}", grad.max_abs());
        }
    }

    #[test]
    fn semigroup_law() {
        let ops = scenario_ops();
        let f = ops.function(|x| (3.0 * x).sin() + x * x);
        let lhs = ops.op_tk(0.2, &ops.op_tk(0.3, &f).unwrap()).unwrap();
        let rhs = ops.op_tk(0.5, &f).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn small_time_is_close_to_identity() {
        let ops = scenario_ops();
        let f = ops.function(|x| 1.0 + x * (1.0 - x));
        let g = ops.op_tk(1e-6, &f).unwrap();
        for ((&x, &a), &b) in ops.grid().nodes().iter().zip(g.values()).zip(f.values()) {
            if x > 0.05 && x < 0.95 {
                assert!((a - b).abs() < 1e-3 * b.abs());
            }
        }
    }

    #[test]
    fn normalised_operator_is_a_contraction_and_positive() {
        let ops = scenario_ops();
        let f = ops.function(|x| (7.0 * x).cos().abs());
        let (lo, hi) = (0.0, 1.0);
        for &t in &[0.01, 0.3, 2.0] {
            let g = ops.op_tk_tilde(t, &f).unwrap();
            assert!(g.values().iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
            assert!(ops
                .op_tk(t, &f)
                .unwrap()
                .values()
                .iter()
                .all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn cache_is_invisible() {
        let ops = scenario_ops();
        let f = ops.function(|x| x.exp());
        let a = ops.op_tk(0.37, &f).unwrap();
        let b = ops.op_tk(0.37, &f).unwrap();
        let c = ops.op_tk_uncached(0.37, &f).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.values(), c.values());
    }

    #[test]
    fn gradient_matches_finite_differences_of_interpolant() {
        let ops = scenario_ops();
        let f = ops.function(|x| (2.0 * x).sin());
        let s = 0.25;
        let grad = ops.grad_op_tk_tilde(s, &f).unwrap();
        let h = 1e-5;
        for (i, &x) in ops.grid().nodes().iter().enumerate() {
            if x < 0.05 || x > 0.95 {
                continue;
            }
            let fd = (ops.tk_tilde_at(s, &f, x + h).unwrap().0
                - ops.tk_tilde_at(s, &f, x - h).unwrap().0)
                / (2.0 * h);
            assert!((grad.values()[i] - fd).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn rejects_bad_times() {
        let ops = scenario_ops();
        let f = ops.function(|x| x);
        assert!(ops.op_tk(0.0, &f).is_err());
        assert!(ops.op_tk_tilde(-1.0, &f).is_err());
        assert!(ops.row(0.1, 1.0).is_err());
    }
}
