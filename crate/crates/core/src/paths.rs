//! Euler simulation of the Wiener process under `P_u`, the tilted measure `Q_u`
//! and the survival-conditioned measure `Q_{t,u}`.
//!
//! Under `Q_u` the path follows `dw = grad log beta(w) ds + dw~`; under
//! `Q_{t,u}` the drift gains `grad log alpha(t - s, w)`. Exits are detected by a
//! sign test and, for `P` and `Q`, by the Brownian-bridge crossing probability
//! `exp(-2 d_0 d_1 / dt)` of each step, `d_i` the distances of its endpoints to
//! the boundary point.
//!
//! The conditioned drift is singular near the boundary as `s -> t`; a step with
//! `|drift| dt` above half the distance to the boundary is clamped and counted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::domain::{DomainModel, Side};
use crate::error::{Error, Result};

/// Bridge probabilities below this are treated as zero and consume no draw.
const BRIDGE_CUTOFF: f64 = 1e-300;

/// Conditioned steps starting closer than this many `sqrt(dt)` to the boundary
/// treat the `1/d` part of the drift implicitly, which keeps them inside.
const IMPLICIT_ZONE: f64 = 6.0;

/// Uniform time grid `0, dt, 2 dt, ..., steps * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        if !(horizon >= dt && horizon.is_finite()) {
            return Err(Error::Argument(format!(
                "horizon must be at least dt, got {horizon}"
            )));
        }
        Ok(Self {
            dt,
            steps: (horizon / dt).round() as usize,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Number of steps covering `[0, t)`.
    pub fn steps_to(&self, t: f64) -> usize {
        ((t / self.dt).round() as usize).min(self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    P,
    Q,
    /// `Q_{t,u}`: tilted and conditioned on survival past `t`.
    Qt(f64),
}

/// Source of the standard normal and uniform draws of one sample.
pub trait NoiseSource {
    fn normal(&mut self) -> f64;
    fn uniform(&mut self) -> f64;
}

/// Counter-based family of per-sample random streams.
///
/// Sample `k` always uses ChaCha8 stream `k` of the master seed, whichever
/// worker runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&self, k: u64) -> SampleRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        SampleRng(rng)
    }

    /// Runs `f` on samples `0..n` in parallel and returns results in sample order.
    pub fn map_samples<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &mut SampleRng) -> T + Sync + Send,
    {
        (0..n as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = self.sample(k);
                f(k, &mut rng)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SampleRng(ChaCha8Rng);

impl NoiseSource for SampleRng {
    #[inline]
    fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

/// Noise source that never moves the path.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn normal(&mut self) -> f64 {
        0.0
    }
    fn uniform(&mut self) -> f64 {
        0.5
    }
}

/// One discretised trajectory.
///
/// `positions[i]` is the Euler position at `grid.time(i)`. If the path exited
/// during step `E - 1 -> E`, then `exit_index = Some(E)`, `positions` has
/// `E + 1` entries and `positions[E]` is the raw Euler endpoint (possibly
/// outside the domain); all earlier positions are interior.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub positions: Vec<f64>,
    pub exit_index: Option<usize>,
    pub exit_side: Option<Side>,
    pub exit_time: Option<f64>,
    pub measure: Measure,
    /// Density of `Q_u` relative to the sampling measure.
    pub importance_weight: f64,
    pub clamp_events: u32,
    /// `grad log alpha(t - s_i, w_i)` at each simulated step of a `Qt(t)` path.
    pub alpha_drift: Vec<f64>,
}

impl PathSample {
    pub fn start(&self) -> f64 {
        self.positions[0]
    }

    /// Index one past the last step whose left end is alive.
    pub fn alive_steps(&self) -> usize {
        self.exit_index.unwrap_or(self.positions.len() - 1)
    }

    pub fn exited(&self) -> bool {
        self.exit_index.is_some()
    }

    pub fn last_position(&self) -> f64 {
        self.positions[self.alive_steps()]
    }

    /// `w(s_i ^ tau)`: the position at grid time `i`, or the exit point once exited.
    pub fn stopped(&self, model: &DomainModel, i: usize) -> f64 {
        match (self.exit_index, self.exit_side) {
            (Some(e), Some(side)) if i >= e => model.boundary_point(side),
            _ => self.positions[i.min(self.positions.len() - 1)],
        }
    }

    /// Whether the path is still alive at grid time `i`.
    pub fn survives_to(&self, i: usize) -> bool {
        match self.exit_index {
            Some(e) => i < e,
            None => i < self.positions.len(),
        }
    }
}

pub fn simulate_p(
    model: &DomainModel,
    u: f64,
    grid: &TimeGrid,
    noise: &mut impl NoiseSource,
) -> Result<PathSample> {
    simulate(model, u, grid, Measure::P, noise)
}

pub fn simulate_q(
    model: &DomainModel,
    u: f64,
    grid: &TimeGrid,
    noise: &mut impl NoiseSource,
) -> Result<PathSample> {
    simulate(model, u, grid, Measure::Q, noise)
}

pub fn simulate_qt(
    model: &DomainModel,
    u: f64,
    t: f64,
    grid: &TimeGrid,
    noise: &mut impl NoiseSource,
) -> Result<PathSample> {
    check_conditioning(t, grid)?;
    run(model, u, grid, Measure::Qt(t), None, noise)
}

/// [`simulate_qt`] with the conditioning drift read from a precomputed table,
/// which must come from [`AlphaDrift::conditioned`] for the same `t` and grid.
pub fn simulate_qt_with(
    model: &DomainModel,
    u: f64,
    t: f64,
    drift: &AlphaDrift,
    grid: &TimeGrid,
    noise: &mut impl NoiseSource,
) -> Result<PathSample> {
    check_conditioning(t, grid)?;
    if drift.len() != grid.steps_to(t) {
        return Err(Error::Argument(
            "drift table does not match the conditioning time".into(),
        ));
    }
    run(model, u, grid, Measure::Qt(t), Some(drift), noise)
}

fn check_conditioning(t: f64, grid: &TimeGrid) -> Result<()> {
    if !(t > 0.0) || t > grid.horizon() + 0.5 * grid.dt() {
        return Err(Error::Argument(format!(
            "conditioning time {t} must lie in (0, {}]",
            grid.horizon()
        )));
    }
    Ok(())
}

pub fn simulate(
    model: &DomainModel,
    u: f64,
    grid: &TimeGrid,
    measure: Measure,
    noise: &mut impl NoiseSource,
) -> Result<PathSample> {
    if let Measure::Qt(t) = measure {
        check_conditioning(t, grid)?;
    }
    run(model, u, grid, measure, None, noise)
}

fn run(
    model: &DomainModel,
    u: f64,
    grid: &TimeGrid,
    measure: Measure,
    table: Option<&AlphaDrift>,
    noise: &mut impl NoiseSource,
) -> Result<PathSample> {
    if !model.is_interior(u) {
        return Err(Error::Domain(format!("start point {u} is not interior")));
    }
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let steps = match measure {
        Measure::Qt(t) => grid.steps_to(t),
        _ => grid.steps(),
    };
    let bridge = !matches!(measure, Measure::Qt(_));
    let mut positions = Vec::with_capacity(steps.min(1 << 16) + 1);
    positions.push(u);
    let mut x = u;
    let mut clamp_events = 0u32;
    let mut exit: Option<(usize, Side, f64)> = None;

    let mut alpha_drift = Vec::new();
    if let Measure::Qt(_) = measure {
        alpha_drift.reserve(steps);
    }

    for i in 0..steps {
        let s = grid.time(i);
        let xn = match measure {
            Measure::P => x + sqrt_dt * noise.normal(),
            Measure::Q => x + model.grad_log_beta_raw(x) * dt + sqrt_dt * noise.normal(),
            Measure::Qt(t) => {
                let ga = match table {
                    Some(table) => table.eval(i, x),
                    None => model.grad_log_alpha_raw(t - s, x),
                };
                alpha_drift.push(ga);
                let raw = model.grad_log_beta_raw(x) + ga;
                let (side, d) = model.nearest_boundary(x);
                let toward_interior = match side {
                    Side::Left => 1.0,
                    Side::Right => -1.0,
                };
                let limit = 0.5 * d / dt;
                let mut clamp = |v: f64| {
                    if v.abs() > limit || !v.is_finite() {
                        clamp_events += 1;
                        if v.is_nan() {
                            0.0
                        } else {
                            limit.copysign(v)
                        }
                    } else {
                        v
                    }
                };
                if d < IMPLICIT_ZONE * sqrt_dt {
                    // Drift-implicit step for the 1/d part in the distance coordinate.
                    let rest = clamp(toward_interior * raw - 1.0 / d);
                    let y = d + rest * dt + sqrt_dt * toward_interior * noise.normal();
                    let dn = 0.5 * (y + (y * y + 4.0 * dt).sqrt());
                    model.boundary_point(side) + toward_interior * dn
                } else {
                    x + clamp(raw) * dt + sqrt_dt * noise.normal()
                }
            }
        };
        positions.push(xn);
        if let Some(side) = model.exited_side(xn) {
            let bp = model.boundary_point(side);
            let (d0, d1) = ((x - bp).abs(), (xn - bp).abs());
            exit = Some((i + 1, side, s + dt * d0 / (d0 + d1)));
            break;
        }
        if bridge {
            let mut crossed = None;
            for &side in model.sides() {
                let bp = model.boundary_point(side);
                let p = (-2.0 * (x - bp).abs() * (xn - bp).abs() / dt).exp();
                if p > BRIDGE_CUTOFF && noise.uniform() < p {
                    crossed = Some(side);
                    break;
                }
            }
            if let Some(side) = crossed {
                exit = Some((i + 1, side, s + 0.5 * dt));
                break;
            }
        }
        x = xn;
    }

    let (exit_index, exit_side, exit_time) = match exit {
        Some((e, side, time)) => (Some(e), Some(side), Some(time)),
        None => (None, None, None),
    };
    let importance_weight = match measure {
        Measure::P => {
            let b_u = model.beta_raw(u);
            match exit_side {
                Some(side) => model.rho(side) / b_u,
                // E[rho(w(tau)) | F_T] = beta(w(T)) by the Markov property.
                None => model.beta_raw(x) / b_u,
            }
        }
        _ => 1.0,
    };
    Ok(PathSample {
        grid: *grid,
        positions,
        exit_index,
        exit_side,
        exit_time,
        measure,
        importance_weight,
        clamp_events,
        alpha_drift,
    })
}

/// Node spacing of [`AlphaDrift`] rows relative to `sqrt(r)`, and the bounds on
/// nodes per unit length.
const DRIFT_TABLE_RESOLUTION: f64 = 48.0;
const DRIFT_TABLE_MIN_DENSITY: f64 = 256.0;
const DRIFT_TABLE_MAX_DENSITY: f64 = 4096.0;

/// `grad log alpha(r_j, x)` for a fixed list of times `r_j`.
///
/// On an interval each time gets a table in `x` of the remainder after the
/// boundary singularity `1/(x - a) - 1/(b - x)` is removed, interpolated by
/// Catmull-Rom cubics on cell-centred nodes spaced about `sqrt(r_j) / 48`
/// apart. On the half-line the closed form is cheap and is evaluated directly.
#[derive(Debug, Clone)]
pub struct AlphaDrift {
    model: DomainModel,
    times: Vec<f64>,
    rows: Vec<DriftRow>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct DriftRow {
    offset: usize,
    nodes: usize,
    h: f64,
}

impl AlphaDrift {
    pub fn new(model: &DomainModel, times: Vec<f64>) -> Self {
        let mut rows = Vec::new();
        let mut values = Vec::new();
        if let Some(b) = model.upper() {
            let a = model.lower();
            for &r in &times {
                let density = (DRIFT_TABLE_RESOLUTION / r.sqrt())
                    .clamp(DRIFT_TABLE_MIN_DENSITY, DRIFT_TABLE_MAX_DENSITY);
                let nodes = ((b - a) * density).ceil() as usize;
                let h = (b - a) / nodes as f64;
                rows.push(DriftRow {
                    offset: values.len(),
                    nodes,
                    h,
                });
                values.extend((0..nodes).map(|i| {
                    let x = a + (i as f64 + 0.5) * h;
                    model.grad_log_alpha_raw(r, x) - singular(a, b, x)
                }));
            }
        }
        Self {
            model: model.clone(),
            times,
            rows,
            values,
        }
    }

    /// Times `t - s_i` for the steps of a path conditioned at `t`.
    pub fn conditioned(model: &DomainModel, t: f64, grid: &TimeGrid) -> Self {
        let times = (0..grid.steps_to(t)).map(|i| t - grid.time(i)).collect();
        Self::new(model, times)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.times[j]
    }

    /// `grad log alpha(r_j, x)`.
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        let (lo, Some(hi)) = (self.model.lower(), self.model.upper()) else {
            return self.model.grad_log_alpha_raw(self.times[j], x);
        };
        let DriftRow {
            offset,
            nodes: n,
            h,
        } = self.rows[j];
        let row = &self.values[offset..offset + n];
        // Within half a cell of the boundary the end cubic is extrapolated.
        let pos = (x - lo) / h - 0.5;
        let i = (pos.floor().max(0.0) as usize).min(n - 2);
        let f = pos - i as f64;
        // Ghost nodes beyond either end by quadratic extrapolation.
        let p0 = if i == 0 {
            3.0 * row[0] - 3.0 * row[1] + row[2]
        } else {
            row[i - 1]
        };
        let p3 = if i + 2 == n {
            3.0 * row[n - 1] - 3.0 * row[n - 2] + row[n - 3]
        } else {
            row[i + 2]
        };
        let (p1, p2) = (row[i], row[i + 1]);
        let interp = p1
            + 0.5
                * f
                * (p2 - p0
                    + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        interp + singular(lo, hi, x)
    }
}

#[inline]
fn singular(a: f64, b: f64, x: f64) -> f64 {
    1.0 / (x - a) - 1.0 / (b - x)
}

/// Increments of `w~(s) = w(s ^ tau) - int grad log beta(w) dr` over the alive
/// steps. The exit step ends at the boundary point `w(tau)`.
pub fn increments_w_tilde(model: &DomainModel, path: &PathSample) -> Vec<f64> {
    let dt = path.grid.dt();
    let p = &path.positions;
    (0..path.alive_steps())
        .map(|i| path.stopped(model, i + 1) - p[i] - model.grad_log_beta_raw(p[i]) * dt)
        .collect()
}

/// Increments of `w^~_t`, the `w~` increments with the conditioning drift
/// `grad log alpha(t - s, w(s))` removed, over the alive steps with `s < t`.
pub fn increments_hat(model: &DomainModel, path: &PathSample, t: f64) -> Vec<f64> {
    let dt = path.grid.dt();
    let p = &path.positions;
    let n = path.alive_steps().min(path.grid.steps_to(t));
    let cached = path.measure == Measure::Qt(t);
    (0..n)
        .filter_map(|i| {
            let remaining = t - path.grid.time(i);
            (remaining > 0.0).then(|| {
                let ga = if cached {
                    path.alpha_drift[i]
                } else {
                    model.grad_log_alpha_raw(remaining, p[i])
                };
                path.stopped(model, i + 1) - p[i] - (model.grad_log_beta_raw(p[i]) + ga) * dt
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::McEstimate;

    fn scenario() -> DomainModel {
        DomainModel::interval(0.0, 1.0, 0.2, 0.8).unwrap()
    }

    #[test]
    fn zero_noise_never_moves_or_exits() {
        let grid = TimeGrid::new(1e-3, 1.0).unwrap();
        let path = simulate_p(&scenario(), 0.5, &grid, &mut ZeroNoise).unwrap();
        assert!(!path.exited());
        assert!(path.positions.iter().all(|&x| x == 0.5));
        assert_eq!(path.positions.len(), grid.steps() + 1);
    }

    #[test]
    fn streams_depend_only_on_seed_and_index() {
        let s = RngStream::new(42);
        let a: Vec<f64> = (0..5).map(|_| s.sample(7).normal()).collect();
        let mut r = s.sample(7);
        let b: Vec<f64> = (0..5).map(|_| r.normal()).collect();
        assert_eq!(a[0], b[0]);
        let mut r2 = s.sample(8);
        assert_ne!(r2.normal(), b[0]);
    }

    #[test]
    fn map_samples_is_ordered_and_repeatable() {
        let s = RngStream::new(1);
        let a = s.map_samples(100, |k, r| (k, r.normal()));
        let b = s.map_samples(100, |k, r| (k, r.normal()));
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, (k, _))| i as u64 == *k));
    }

    #[test]
    fn positions_before_exit_are_interior() {
        let m = scenario();
        let grid = TimeGrid::new(1e-3, 5.0).unwrap();
        let s = RngStream::new(5);
        for k in 0..200 {
            let path = simulate_q(&m, 0.3, &grid, &mut s.sample(k)).unwrap();
            let e = path.exit_index.expect("exits well before t = 5");
            assert_eq!(path.positions.len(), e + 1);
            assert!(path.positions[..e].iter().all(|&x| m.is_interior(x)));
            assert!(path.exit_time.unwrap() <= grid.time(e));
        }
    }

    #[test]
    fn halfline_q_equals_p_pathwise() {
        let m = DomainModel::halfline(0.7).unwrap();
        let grid = TimeGrid::new(1e-3, 1.0).unwrap();
        let s = RngStream::new(9);
        for k in 0..50 {
            let p = simulate_p(&m, 0.4, &grid, &mut s.sample(k)).unwrap();
            let q = simulate_q(&m, 0.4, &grid, &mut s.sample(k)).unwrap();
            assert_eq!(p.positions, q.positions);
            assert_eq!(p.exit_index, q.exit_index);
            assert_eq!(increments_w_tilde(&m, &p), increments_w_tilde(&m, &q));
            let raw: Vec<f64> = (0..p.alive_steps())
                .map(|i| p.stopped(&m, i + 1) - p.positions[i])
                .collect();
            assert_eq!(increments_w_tilde(&m, &p), raw);
        }
    }

    #[test]
    fn drift_table_matches_direct_evaluation() {
        let m = scenario();
        let times: Vec<f64> = [1usize, 3, 10, 100, 2000]
            .iter()
            .map(|&k| k as f64 * 1e-3)
            .collect();
        let table = AlphaDrift::new(&m, times.clone());
        for (j, &r) in times.iter().enumerate() {
            for i in 0..200 {
                let x = 1e-4 + (1.0 - 2e-4) * i as f64 / 199.0;
                let exact = m.grad_log_alpha_raw(r, x);
                let approx = table.eval(j, x);
                assert!(
                    (approx - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                    "r {r} x {x}: {approx} vs {exact}"
                );
            }
        }
        let h = DomainModel::halfline(0.7).unwrap();
        let exact = AlphaDrift::new(&h, vec![0.5]);
        assert_eq!(exact.eval(0, 0.3), h.grad_log_alpha_raw(0.5, 0.3));
    }

    #[test]
    fn tabulated_conditioned_paths_track_exact_ones() {
        let m = scenario();
        let grid = TimeGrid::new(1e-3, 0.5).unwrap();
        let drift = AlphaDrift::conditioned(&m, 0.5, &grid);
        assert_eq!(drift.len(), 500);
        let s = RngStream::new(21);
        for k in 0..20 {
            let a = simulate_qt(&m, 0.5, 0.5, &grid, &mut s.sample(k)).unwrap();
            let b = simulate_qt_with(&m, 0.5, 0.5, &drift, &grid, &mut s.sample(k)).unwrap();
            let gap = a
                .positions
                .iter()
                .zip(&b.positions)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(gap < 1e-6, "{gap}");
        }
        let wrong = AlphaDrift::conditioned(&m, 0.4, &grid);
        assert!(simulate_qt_with(&m, 0.5, 0.5, &wrong, &grid, &mut ZeroNoise).is_err());
    }

    #[test]
    fn importance_weights_average_to_one() {
        let m = scenario();
        let grid = TimeGrid::new(1e-3, 3.0).unwrap();
        let s = RngStream::new(11);
        let w = s.map_samples(20_000, |_, r| {
            simulate_p(&m, 0.5, &grid, r).unwrap().importance_weight
        });
        let est = McEstimate::from_samples(&w).unwrap();
        assert!(est.covers(1.0, 3.0, 0.0), "{est:?}");
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn conditioned_paths_survive() {
        let m = scenario();
        let grid = TimeGrid::new(1e-3, 0.5).unwrap();
        let s = RngStream::new(13);
        let paths = s.map_samples(2_000, |_, r| simulate_qt(&m, 0.5, 0.5, &grid, r).unwrap());
        let failures = paths.iter().filter(|p| p.exited()).count();
        assert_eq!(failures, 0);
        assert!(paths.iter().all(|p| p.measure == Measure::Qt(0.5)));
        assert!(simulate_qt(&m, 0.5, 0.7, &grid, &mut ZeroNoise).is_err());
    }

    #[test]
    fn hat_increments_exclude_times_at_or_after_t() {
        let m = scenario();
        let grid = TimeGrid::new(0.01, 1.0).unwrap();
        let path = simulate_p(&m, 0.5, &grid, &mut ZeroNoise).unwrap();
        let inc = increments_hat(&m, &path, 0.3);
        assert_eq!(inc.len(), 30);
        assert_eq!(increments_w_tilde(&m, &path).len(), 100);
        let qt = simulate_qt(&m, 0.5, 0.3, &grid, &mut RngStream::new(2).sample(0)).unwrap();
        let mut uncached = qt.clone();
        uncached.measure = Measure::Q;
        let a = increments_hat(&m, &qt, 0.3);
        let b = increments_hat(&m, &uncached, 0.3);
        assert_eq!(a.len(), 30);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn post_exit_positions_are_ignored() {
        let m = scenario();
        let grid = TimeGrid::new(1e-3, 5.0).unwrap();
        let mut path = simulate_q(&m, 0.5, &grid, &mut RngStream::new(3).sample(0)).unwrap();
        let before = increments_w_tilde(&m, &path);
        let hat = increments_hat(&m, &path, 2.0);
        path.positions.extend([0.3, 0.9, 5.0]);
        // Appended junk past the exit index must not be read.
        assert_eq!(path.alive_steps(), path.exit_index.unwrap());
        assert_eq!(increments_w_tilde(&m, &path), before);
        assert_eq!(increments_hat(&m, &path, 2.0), hat);
    }
}
