//! JSON experiment configuration.
//!
//! Every optional field has a default, and serialising a parsed configuration
//! writes all fields out, so parse/serialise is idempotent. Validation runs
//! before any computation and reports the dotted path of the offending field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chaos::{McSettings, Sampler, DEFAULT_COARSE_STRIDE, MAX_ORDER};
use crate::domain::{side_key, BoundaryValues, DomainModel, DomainSpec, Side};
use crate::error::{Error, Result};
use crate::kernels::{survival_horizon, SimplexSettings, DEFAULT_ALPHA_FLOOR, DEFAULT_SIMPLEX_NODES};
use crate::semigroup::{GridSettings, SemigroupOps};

/// `Q_u(tau > T_h)` below which the default horizon is placed.
pub const DEFAULT_HORIZON_SURVIVAL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub u: f64,
    /// Boundary values keyed like `domain.rho`.
    pub phi: BTreeMap<String, f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(rename = "N", default = "default_order")]
    pub n: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: CheckSettings,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

fn default_order() -> usize {
    2
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nodes: usize,
    pub halfline_cutoff: f64,
    pub simplex_nodes: usize,
    pub alpha_floor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSettings::default();
        Self {
            nodes: g.nodes,
            halfline_cutoff: g.halfline_cutoff,
            simplex_nodes: DEFAULT_SIMPLEX_NODES,
            alpha_floor: DEFAULT_ALPHA_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_samples: usize,
    pub dt: f64,
    /// Simulation horizon; on an interval it defaults to the time where
    /// `Q_u(tau > T_h)` drops below `1e-4`.
    pub horizon: Option<f64>,
    pub seed: u64,
    pub sampler: Sampler,
    /// Coarsening factor of the grid for orders two and three.
    pub coarse_stride: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            dt: 1e-4,
            horizon: None,
            seed: 20_240_601,
            sampler: Sampler::Q,
            coarse_stride: DEFAULT_COARSE_STRIDE,
        }
    }
}

/// Acceptance tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Width of Monte Carlo confidence bands in standard errors.
    pub mc_sigmas: f64,
    pub harmonic_residual: f64,
    pub normalization: f64,
    pub semigroup: f64,
    /// Bound on `E(res^2) / E f^2` for the Clark representation.
    pub clark_relative: f64,
    /// Window for the RMS residual ratio when `dt` is quartered.
    pub clark_ratio_min: f64,
    pub clark_ratio_max: f64,
    pub identity_absolute: f64,
    /// Discretisation allowance relative to the predicted truncation residual.
    pub parseval_allowance: f64,
    /// Discretisation allowance relative to the first Parseval term.
    pub isometry_allowance: f64,
    pub ks_level: f64,
    pub gradient: f64,
    /// Rounding allowance added to expansion checks, relative to `max(E f^2, 1)`.
    pub exact_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
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
        }
    }
}

/// Sizes and parameters of the individual acceptance checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSettings {
    pub alpha_times: Vec<f64>,
    pub halfline_rho: f64,
    pub halfline_u: f64,
    pub halfline_t: f64,
    pub operator_times: Vec<f64>,
    pub semigroup_s: f64,
    pub semigroup_t: f64,
    pub semigroup_functions: usize,
    pub identity_t: f64,
    pub expansion_samples: usize,
    pub wiener_t: f64,
    pub wiener_samples: usize,
    /// Every `wiener_stride`-th increment of each path enters the pooled sample.
    pub wiener_stride: usize,
    pub gradient_points: usize,
    pub finite_difference_step: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
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
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulateMeasure {
    P,
    Q,
    Qt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `1_{tau > T}` at the horizon (or at `t` for conditioned paths).
    Survival,
    /// `phi(w(tau))`.
    Terminal,
    /// `w(T ^ tau)`.
    Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub measure: SimulateMeasure,
    /// Conditioning time for `qt`; defaults to the horizon.
    pub t: Option<f64>,
    pub estimator: Estimator,
    /// Number of leading samples written to the path CSV.
    pub dump_paths: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            measure: SimulateMeasure::Q,
            t: None,
            estimator: Estimator::Survival,
            dump_paths: 10,
        }
    }
}

/// A validated configuration with its model objects built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: DomainModel,
    pub phi: BoundaryValues,
    pub grid: GridSettings,
    pub simplex: SimplexSettings,
    pub horizon: f64,
}

impl Experiment {
    pub fn mc(&self) -> McSettings {
        McSettings {
            n_samples: self.config.mc.n_samples,
            dt: self.config.mc.dt,
            horizon: self.horizon,
            seed: self.config.mc.seed,
            sampler: self.config.mc.sampler,
        }
    }

    pub fn u(&self) -> f64 {
        self.config.u
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The acceptance scenario: `(0, 1)`, `rho = (0.2, 0.8)`, `u = 0.5`, `phi = 1_{b}`.
    pub fn acceptance() -> Self {
        Self {
            domain: DomainSpec {
                kind: crate::domain::DomainKind::Interval,
                a: Some(0.0),
                b: Some(1.0),
                rho: [("a".to_string(), 0.2), ("b".to_string(), 0.8)].into(),
                series_terms: None,
                switch_time: None,
            },
            u: 0.5,
            phi: [("a".to_string(), 0.0), ("b".to_string(), 1.0)].into(),
            grid: GridConfig::default(),
            mc: McConfig::default(),
            n: default_order(),
            out: default_out(),
            tolerances: Tolerances::default(),
            checks: CheckSettings::default(),
            simulate: SimulateConfig::default(),
        }
    }

    /// Checks every field and builds the model objects.
    pub fn validate(&self) -> Result<Experiment> {
        let model = self.domain.build("domain")?;
        if !model.is_interior(self.u) {
            return Err(Error::config("u", format!("{} is not interior", self.u)));
        }
        let phi = self.boundary_values(&model)?;
        if self.n > MAX_ORDER {
            return Err(Error::config(
                "N",
                format!("expansion order must be at most {MAX_ORDER}, got {}", self.n),
            ));
        }
        let g = &self.grid;
        positive_count("grid.nodes", g.nodes, 2)?;
        positive("grid.halfline_cutoff", g.halfline_cutoff)?;
        positive_count("grid.simplex_nodes", g.simplex_nodes, 3)?;
        if !(g.alpha_floor > 0.0 && g.alpha_floor < 1.0) {
            return Err(Error::config("grid.alpha_floor", "must lie in (0, 1)"));
        }
        let mc = &self.mc;
        positive_count("mc.n_samples", mc.n_samples, 2)?;
        positive("mc.dt", mc.dt)?;
        positive_count("mc.coarse_stride", mc.coarse_stride, 1)?;
        self.validate_tolerances()?;
        self.validate_checks()?;
        if let Some(t) = self.simulate.t {
            positive("simulate.t", t)?;
        }
        let grid = GridSettings {
            nodes: g.nodes,
            halfline_cutoff: g.halfline_cutoff,
        };
        let horizon = match (mc.horizon, model.upper()) {
            (Some(h), _) => {
                positive("mc.horizon", h)?;
                if h < mc.dt {
                    return Err(Error::config("mc.horizon", "must be at least mc.dt"));
                }
                h
            }
            (None, Some(_)) => {
                let ops = SemigroupOps::new(model.clone(), &grid, self.u)?;
                survival_horizon(&ops, self.u, DEFAULT_HORIZON_SURVIVAL)?.max(mc.dt)
            }
            (None, None) => {
                return Err(Error::config(
                    "mc.horizon",
                    "required on the half-line, where the exit time has no finite mean",
                ))
            }
        };
        if let Some(t) = self.simulate.t {
            if t > horizon {
                return Err(Error::config("simulate.t", "exceeds the horizon"));
            }
        }
        Ok(Experiment {
            config: self.clone(),
            model,
            phi,
            grid,
            simplex: SimplexSettings {
                nodes_per_axis: g.simplex_nodes,
                t_max: None,
                alpha_floor: g.alpha_floor,
            },
            horizon,
        })
    }

    fn boundary_values(&self, model: &DomainModel) -> Result<BoundaryValues> {
        let mut values = BoundaryValues::default();
        let known: Vec<&str> = model.sides().iter().map(|&s| side_key(model, s)).collect();
        for key in self.phi.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::config(
                    format!("phi.{key}"),
                    "not a boundary point of the domain",
                ));
            }
        }
        for &side in model.sides() {
            let key = side_key(model, side);
            let v = self
                .phi
                .get(key)
                .copied()
                .ok_or_else(|| Error::config(format!("phi.{key}"), "missing boundary value"))?;
            if !v.is_finite() {
                return Err(Error::config(format!("phi.{key}"), "must be finite"));
            }
            match side {
                Side::Left => values.left = Some(v),
                Side::Right => values.right = Some(v),
            }
        }
        Ok(values)
    }

    fn validate_tolerances(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("mc_sigmas", t.mc_sigmas),
            ("harmonic_residual", t.harmonic_residual),
            ("normalization", t.normalization),
            ("semigroup", t.semigroup),
            ("clark_relative", t.clark_relative),
            ("clark_ratio_min", t.clark_ratio_min),
            ("clark_ratio_max", t.clark_ratio_max),
            ("identity_absolute", t.identity_absolute),
            ("parseval_allowance", t.parseval_allowance),
            ("isometry_allowance", t.isometry_allowance),
            ("ks_level", t.ks_level),
            ("gradient", t.gradient),
            ("exact_floor", t.exact_floor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("tolerances.{name}"),
                    format!("must be a nonnegative number, got {v}"),
                ));
            }
        }
        if t.clark_ratio_min > t.clark_ratio_max {
            return Err(Error::config(
                "tolerances.clark_ratio_min",
                "exceeds clark_ratio_max",
            ));
        }
        if !(t.ks_level > 0.0 && t.ks_level < 1.0) {
            return Err(Error::config("tolerances.ks_level", "must lie in (0, 1)"));
        }
        Ok(())
    }

    fn validate_checks(&self) -> Result<()> {
        let c = &self.checks;
        for (i, &t) in c.alpha_times.iter().enumerate() {
            positive(&format!("checks.alpha_times[{i}]"), t)?;
        }
        for (i, &t) in c.operator_times.iter().enumerate() {
            positive(&format!("checks.operator_times[{i}]"), t)?;
        }
        if !(c.halfline_rho > 0.0 && c.halfline_rho < 1.0) {
            return Err(Error::config("checks.halfline_rho", "must lie in (0, 1)"));
        }
        positive("checks.halfline_u", c.halfline_u)?;
        positive("checks.halfline_t", c.halfline_t)?;
        positive("checks.semigroup_s", c.semigroup_s)?;
        positive("checks.semigroup_t", c.semigroup_t)?;
        positive("checks.identity_t", c.identity_t)?;
        positive("checks.wiener_t", c.wiener_t)?;
        positive("checks.finite_difference_step", c.finite_difference_step)?;
        positive_count("checks.expansion_samples", c.expansion_samples, 2)?;
        positive_count("checks.wiener_samples", c.wiener_samples, 2)?;
        positive_count("checks.wiener_stride", c.wiener_stride, 1)?;
        positive_count("checks.semigroup_functions", c.semigroup_functions, 1)?;
        positive_count("checks.gradient_points", c.gradient_points, 1)?;
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn positive_count(path: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be at least {min}, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_path(err: Error) -> String {
        match err {
            Error::Config { path, .. } => path,
            other => panic!("expected a configuration error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let text = r#"{
            "domain": {"kind": "interval", "a": 0, "b": 1, "rho": {"a": 0.2, "b": 0.8}},
            "u": 0.5,
            "phi": {"a": 0, "b": 1}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c, ExperimentConfig::acceptance());
        let e = c.validate().unwrap();
        assert!(e.horizon > 1.5 && e.horizon < 2.5, "{}", e.horizon);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c = ExperimentConfig::acceptance();
        let once = c.to_json().unwrap();
        let parsed = ExperimentConfig::from_json(&once).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(parsed.to_json().unwrap(), once);
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = ExperimentConfig::acceptance();
        c.u = 1.5;
        assert_eq!(config_path(c.validate().unwrap_err()), "u");

        let mut c = ExperimentConfig::acceptance();
        c.phi.remove("b");
        assert_eq!(config_path(c.validate().unwrap_err()), "phi.b");

        let mut c = ExperimentConfig::acceptance();
        c.mc.n_samples = 0;
        assert_eq!(config_path(c.validate().unwrap_err()), "mc.n_samples");

        let mut c = ExperimentConfig::acceptance();
        c.n = 4;
        assert_eq!(config_path(c.validate().unwrap_err()), "N");

        let mut c = ExperimentConfig::acceptance();
        c.domain.rho.insert("a".into(), 1.0);
        assert_eq!(config_path(c.validate().unwrap_err()), "domain.rho.a");

        let text = r#"{"domain": {"kind": "interval", "a": 0, "b": 1, "rho": {"a": 0.2, "b": 0.8}},
            "u": 0.5, "phi": {"a": 0, "b": 1}, "mc": {"dt": "small"}}"#;
        assert_eq!(config_path(ExperimentConfig::from_json(text).unwrap_err()), "mc.dt");
    }

    #[test]
    fn halfline_needs_a_horizon() {
        let text = r#"{"domain": {"kind": "halfline", "rho": {"0": 0.7}}, "u": 1.0, "phi": {"0": 2.0}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config_path(c.validate().unwrap_err()), "mc.horizon");
        let mut c = c;
        c.mc.horizon = Some(1.0);
        let e = c.validate().unwrap();
        assert_eq!(e.phi.left, Some(2.0));
    }
}
