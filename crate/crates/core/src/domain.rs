//! Closed-form data for the two one-dimensional domains.
//!
//! Both models expose the harmonic functional `beta(v) = E_v[rho(w(tau))]`, the
//! survival function `alpha(s, v) = Q_v(tau > s)` of the tilted measure, the
//! Dirichlet heat kernel of Brownian motion killed at the boundary and the exit
//! distribution.
//!
//! The tilted quantities are computed through the h-transform identity
//!
//! ```text
//! E_v[1{tau > s} rho(w(tau)) psi(w(s))] = E_v[1{tau > s} beta(w(s)) psi(w(s))]
//! ```
//!
//! which follows from the Markov property at time `s`. Hence
//! `alpha(s, v) = beta(v)^{-1} * int p_s(v, y) beta(y) dy` with `p` the killed
//! kernel. On an interval `beta` is affine, so the integral has a closed form in
//! both kernel representations.
//!
//! Kernel representations on `(a, b)`, `L = b - a`:
//!
//! * method of images, `sum_n g_t(x - y + 2nL) - g_t(x + y - 2a + 2nL)`, used for
//!   `t < switch_time`;
//! * sine eigenseries `(2/L) sum_k exp(-k^2 pi^2 t / 2L^2) sin(k pi x'/L) sin(k pi y'/L)`,
//!   used for `t >= switch_time`.
//!
//! With the default `switch_time = L^2 / pi^2` both series need at most ~10
//! terms for full double precision. Truncation: image terms beyond `|n| = N`
//! are bounded by `exp(-(2(N-1)L)^2 / 2t)`, eigen terms beyond `K` by
//! `exp(-K^2 pi^2 t / 2L^2)`; the term counts are chosen so both bounds are
//! below `1e-17`, capped by `series_terms`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;

/// Images farther than this many standard deviations from the interval are dropped.
const IMAGE_REACH: f64 = 12.0;

pub const DEFAULT_SERIES_TERMS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Value of the boundary weight at one boundary point; always in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BoundaryWeight(f64);

impl BoundaryWeight {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "boundary weight must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A function given by its values at the boundary points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryValues {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl BoundaryValues {
    pub fn interval(left: f64, right: f64) -> Self {
        Self {
            left: Some(left),
            right: Some(right),
        }
    }

    pub fn halfline(at_zero: f64) -> Self {
        Self {
            left: Some(at_zero),
            right: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::interval(c, c)
    }

    pub fn get(&self, side: Side) -> Option<f64> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            left: self.left.map(|v| k * v),
            right: self.right.map(|v| k * v),
        }
    }
}

/// One atom of the exit distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub side: Side,
    pub point: f64,
    pub mass: f64,
}

/// Distribution of the exit position started from a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasure {
    pub atoms: Vec<Atom>,
}

impl HarmonicMeasure {
    pub fn mass(&self, side: Side) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.side == side)
            .map(|a| a.mass)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }
}

/// Value and first two spatial derivatives of a function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDomain {
    a: f64,
    b: f64,
    rho_a: BoundaryWeight,
    rho_b: BoundaryWeight,
    series_terms: usize,
    switch_time: f64,
}

impl IntervalDomain {
    pub fn new(a: f64, b: f64, rho_a: f64, rho_b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!(
                "interval endpoints must satisfy a < b, got ({a}, {b})"
            )));
        }
        let len = b - a;
        Ok(Self {
            a,
            b,
            rho_a: BoundaryWeight::new(rho_a)?,
            rho_b: BoundaryWeight::new(rho_b)?,
            series_terms: DEFAULT_SERIES_TERMS,
            switch_time: len * len / (PI * PI),
        })
    }

    pub fn with_series_terms(mut self, terms: usize) -> Result<Self> {
        if terms == 0 {
            return Err(Error::Domain("series_terms must be at least 1".into()));
        }
        self.series_terms = terms;
        Ok(self)
    }

    pub fn with_switch_time(mut self, switch_time: f64) -> Result<Self> {
        if !(switch_time > 0.0 && switch_time.is_finite()) {
            return Err(Error::Domain(format!(
                "switch_time must be positive, got {switch_time}"
            )));
        }
        self.switch_time = switch_time;
        Ok(self)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn rho_a(&self) -> f64 {
        self.rho_a.value()
    }
    pub fn rho_b(&self) -> f64 {
        self.rho_b.value()
    }
    pub fn series_terms(&self) -> usize {
        self.series_terms
    }
    pub fn switch_time(&self) -> f64 {
        self.switch_time
    }
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    fn beta_slope(&self) -> f64 {
        (self.rho_b() - self.rho_a()) / self.len()
    }

    fn beta(&self, v: f64) -> f64 {
        self.rho_a() + self.beta_slope() * (v - self.a)
    }

    fn image_count(&self, t: f64) -> i64 {
        let n = 2 + ((80.0 * t).sqrt() / (2.0 * self.len())).floor() as i64;
        n.min(self.series_terms as i64)
    }

    fn eigen_count(&self, t: f64) -> usize {
        let l = self.len();
        let k = (78.0 * l * l / (PI * PI * t)).sqrt().ceil() as usize + 1;
        k.min(self.series_terms)
    }

    /// Killed kernel and its `x`-derivative by the method of images.
    pub fn kernel_images(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        let l = self.len();
        let (xp, yp) = (x - self.a, y - self.a);
        let n = self.image_count(t);
        let (mut val, mut dx) = (0.0, 0.0);
        for k in -n..=n {
            let shift = 2.0 * k as f64 * l;
            let z1 = xp - yp + shift;
            let z2 = xp + yp + shift;
            let (g1, g2) = (gauss::density(t, z1), gauss::density(t, z2));
            val += g1 - g2;
            dx += -z1 / t * g1 + z2 / t * g2;
        }
        (val, dx)
    }

    /// Killed kernel and its `x`-derivative by the sine eigenseries.
    pub fn kernel_eigen(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        self.kernel_eigen_terms(t, x, y, self.eigen_count(t))
    }

    pub fn kernel_eigen_terms(&self, t: f64, x: f64, y: f64, terms: usize) -> (f64, f64) {
        let l = self.len();
        let (xp, yp) = (x - self.a, y - self.a);
        let (mut val, mut dx) = (0.0, 0.0);
        for k in 1..=terms {
            let kp = k as f64 * PI / l;
            let e = (-0.5 * kp * kp * t).exp();
            let sy = (kp * yp).sin();
            val += e * (kp * xp).sin() * sy;
            dx += e * kp * (kp * xp).cos() * sy;
        }
        (2.0 / l * val, 2.0 / l * dx)
    }

    fn kernel(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        if t < self.switch_time {
            self.kernel_images(t, x, y)
        } else {
            self.kernel_eigen(t, x, y)
        }
    }

    /// `J(c) = int_0^L g_t(c - y) (p + q y) dy` and its first two derivatives in `c`.
    fn image_integral(&self, t: f64, c: f64) -> (f64, f64, f64) {
        let l = self.len();
        let p = self.rho_a();
        let q = self.beta_slope();
        let sd = t.sqrt();
        let mass = gauss::std_normal_mass(-c / sd, (l - c) / sd);
        let g0 = gauss::density(t, c);
        let gl = gauss::density(t, c - l);
        let j = (p + q * c) * mass + q * t * (g0 - gl);
        let j1 = p * g0 - (p + q * l) * gl + q * mass;
        let j2 = p * (-c / t) * g0 - (p + q * l) * (-(c - l) / t) * gl + q * (g0 - gl);
        (j, j1, j2)
    }

    /// Jet of `F(x) = int p_t(x, y) beta(y) dy`. In the eigenseries branch the
    /// result is multiplied by `exp(lambda_1 t)` when `scaled` is set.
    fn numerator_jet(&self, t: f64, x: f64, scaled: bool) -> Jet {
        let l = self.len();
        let xp = x - self.a;
        if t < self.switch_time {
            let n = self.image_count(t);
            let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
            let reach = IMAGE_REACH * t.sqrt();
            let near = |c: f64| c > -reach && c < l + reach;
            for k in -n..=n {
                let shift = 2.0 * k as f64 * l;
                if near(xp + shift) {
                    let (j, j1, j2) = self.image_integral(t, xp + shift);
                    f += j;
                    f1 += j1;
                    f2 += j2;
                }
                if near(-xp - shift) {
                    let (r, r1, r2) = self.image_integral(t, -xp - shift);
                    f -= r;
                    f1 += r1;
                    f2 -= r2;
                }
            }
            Jet {
                value: f,
                d1: f1,
                d2: f2,
            }
        } else {
            let p = self.rho_a();
            let q = self.beta_slope();
            let lambda1 = 0.5 * (PI / l).powi(2);
            let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
            // exp(-lambda_1 k^2 t) and sin/cos(k theta) by recurrence.
            let theta = PI / l * xp;
            let (s1, c1) = theta.sin_cos();
            let (mut s_prev, mut c_prev) = (0.0, 1.0);
            let (mut s_k, mut c_k) = (s1, c1);
            let q1 = (-lambda1 * t).exp();
            let mut e = if scaled { 1.0 } else { q1 };
            let mut ratio = q1 * q1 * q1;
            let q2 = q1 * q1;
            for k in 1..=self.eigen_count(t) {
                let kf = k as f64;
                let kp = kf * PI / l;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = p * l * (1.0 - sign) / (kf * PI) - q * l * l * sign / (kf * PI);
                f += e * coeff * s_k;
                f1 += e * coeff * kp * c_k;
                f2 -= e * coeff * kp * kp * s_k;
                e *= ratio;
                ratio *= q2;
                let s_next = 2.0 * c1 * s_k - s_prev;
                let c_next = 2.0 * c1 * c_k - c_prev;
                (s_prev, c_prev, s_k, c_k) = (s_k, c_k, s_next, c_next);
            }
            let k = 2.0 / l;
            Jet {
                value: k * f,
                d1: k * f1,
                d2: k * f2,
            }
        }
    }

    fn alpha_jet(&self, s: f64, v: f64) -> Jet {
        let f = self.numerator_jet(s, v, false);
        let b = self.beta(v);
        let b1 = self.beta_slope();
        let value = f.value / b;
        let d1 = f.d1 / b - f.value * b1 / (b * b);
        let d2 = f.d2 / b - 2.0 * f.d1 * b1 / (b * b) + 2.0 * f.value * b1 * b1 / (b * b * b);
        Jet { value, d1, d2 }
    }

    fn grad_log_alpha(&self, s: f64, v: f64) -> f64 {
        let f = self.numerator_jet(s, v, true);
        f.d1 / f.value - self.beta_slope() / self.beta(v)
    }

    /// Bound `C` with `alpha(t, u) <= C exp(-lambda_1 t)` for all `t >= t_from`.
    fn alpha_decay_constant(&self, u: f64, t_from: f64) -> f64 {
        let l = self.len();
        let p = self.rho_a();
        let q = self.beta_slope();
        let lambda1 = 0.5 * (PI / l).powi(2);
        let up = u - self.a;
        let mut c = 0.0;
        for k in 1..=self.series_terms.max(200) {
            let kf = k as f64;
            let kp = kf * PI / l;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = p * l * (1.0 - sign) / (kf * PI) - q * l * l * sign / (kf * PI);
            let decay = (-(0.5 * kp * kp - lambda1) * t_from).exp();
            c += (2.0 / l * coeff * (kp * up).sin()).abs() * decay;
        }
        c / self.beta(u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineDomain {
    rho_0: BoundaryWeight,
}

impl HalfLineDomain {
    pub fn new(rho_0: f64) -> Result<Self> {
        Ok(Self {
            rho_0: BoundaryWeight::new(rho_0)?,
        })
    }

    pub fn rho_0(&self) -> f64 {
        self.rho_0.value()
    }

    fn alpha_jet(&self, s: f64, v: f64) -> Jet {
        let g = gauss::density(s, v);
        Jet {
            value: gauss::erf(v / (2.0 * s).sqrt()),
            d1: 2.0 * g,
            d2: -2.0 * v / s * g,
        }
    }

    fn grad_log_alpha(&self, s: f64, v: f64) -> f64 {
        let x = v / (2.0 * s).sqrt();
        if x > 26.0 {
            // erf(x) == 1 and the density underflows.
            return 0.0;
        }
        2.0 * gauss::density(s, v) / gauss::erf(x)
    }
}

/// A concrete one-dimensional domain with its boundary weight.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainModel {
    Interval(IntervalDomain),
    HalfLine(HalfLineDomain),
}

impl DomainModel {
    pub fn interval(a: f64, b: f64, rho_a: f64, rho_b: f64) -> Result<Self> {
        Ok(Self::Interval(IntervalDomain::new(a, b, rho_a, rho_b)?))
    }

    pub fn halfline(rho_0: f64) -> Result<Self> {
        Ok(Self::HalfLine(HalfLineDomain::new(rho_0)?))
    }

    pub fn lower(&self) -> f64 {
        match self {
            Self::Interval(d) => d.a,
            Self::HalfLine(_) => 0.0,
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match self {
            Self::Interval(d) => Some(d.b),
            Self::HalfLine(_) => None,
        }
    }

    pub fn sides(&self) -> &'static [Side] {
        match self {
            Self::Interval(_) => &[Side::Left, Side::Right],
            Self::HalfLine(_) => &[Side::Left],
        }
    }

    pub fn boundary_point(&self, side: Side) -> f64 {
        match (self, side) {
            (Self::Interval(d), Side::Left) => d.a,
            (Self::Interval(d), Side::Right) => d.b,
            (Self::HalfLine(_), _) => 0.0,
        }
    }

    pub fn rho(&self, side: Side) -> f64 {
        match (self, side) {
            (Self::Interval(d), Side::Left) => d.rho_a(),
            (Self::Interval(d), Side::Right) => d.rho_b(),
            (Self::HalfLine(d), _) => d.rho_0(),
        }
    }

    pub fn is_interior(&self, v: f64) -> bool {
        match self {
            Self::Interval(d) => v > d.a && v < d.b,
            Self::HalfLine(_) => v > 0.0 && v.is_finite(),
        }
    }

    fn is_closed_member(&self, v: f64) -> bool {
        match self {
            Self::Interval(d) => v >= d.a && v <= d.b,
            Self::HalfLine(_) => v >= 0.0 && v.is_finite(),
        }
    }

    /// Distance to the nearest boundary point and the side it lies on.
    pub fn nearest_boundary(&self, v: f64) -> (Side, f64) {
        match self {
            Self::Interval(d) => {
                let (dl, dr) = (v - d.a, d.b - v);
                if dl <= dr {
                    (Side::Left, dl)
                } else {
                    (Side::Right, dr)
                }
            }
            Self::HalfLine(_) => (Side::Left, v),
        }
    }

    /// The boundary side the point lies beyond, if it is outside the open domain.
    pub fn exited_side(&self, v: f64) -> Option<Side> {
        match self {
            Self::Interval(d) if v <= d.a => Some(Side::Left),
            Self::Interval(d) if v >= d.b => Some(Side::Right),
            Self::HalfLine(_) if v <= 0.0 => Some(Side::Left),
            _ => None,
        }
    }

    fn require_interior(&self, v: f64) -> Result<()> {
        if self.is_interior(v) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point {v} is not interior")))
        }
    }

    fn require_time(t: f64) -> Result<()> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("time must be positive, got {t}")))
        }
    }

    /// `beta(v) = E_v[rho(w(tau))]`; on the boundary this is the boundary weight.
    pub fn beta(&self, v: f64) -> Result<f64> {
        if !self.is_closed_member(v) {
            return Err(Error::Domain(format!("point {v} is outside the domain")));
        }
        Ok(self.beta_raw(v))
    }

    /// [`Self::beta`] without the domain check.
    #[inline]
    pub fn beta_raw(&self, v: f64) -> f64 {
        match self {
            Self::Interval(d) => d.beta(v),
            Self::HalfLine(d) => d.rho_0(),
        }
    }

    /// Derivative of `beta`; constant for both models.
    #[inline]
    pub fn beta_slope(&self) -> f64 {
        match self {
            Self::Interval(d) => d.beta_slope(),
            Self::HalfLine(_) => 0.0,
        }
    }

    pub fn grad_log_beta(&self, v: f64) -> Result<f64> {
        self.require_interior(v)?;
        Ok(self.grad_log_beta_raw(v))
    }

    #[inline]
    pub fn grad_log_beta_raw(&self, v: f64) -> f64 {
        match self {
            Self::Interval(d) => d.beta_slope() / d.beta(v),
            Self::HalfLine(_) => 0.0,
        }
    }

    /// Dirichlet heat kernel `p_t(x, y)` of Brownian motion killed at the boundary.
    pub fn killed_kernel(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Self::require_time(t)?;
        self.require_interior(x)?;
        self.require_interior(y)?;
        Ok(self.kernel_raw(t, x, y).0)
    }

    /// Killed kernel and its derivative in the first argument, unchecked.
    #[inline]
    pub fn kernel_raw(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        match self {
            Self::Interval(d) => d.kernel(t, x, y),
            Self::HalfLine(_) => {
                let (z1, z2) = (x - y, x + y);
                let (g1, g2) = (gauss::density(t, z1), gauss::density(t, z2));
                (g1 - g2, -z1 / t * g1 + z2 / t * g2)
            }
        }
    }

    /// `alpha(s, v) = Q_v(tau > s)`.
    pub fn alpha(&self, s: f64, v: f64) -> Result<f64> {
        Self::require_time(s)?;
        self.require_interior(v)?;
        Ok(self.alpha_jet_raw(s, v).value)
    }

    /// `alpha(s, v)` with its first two derivatives in `v`, unchecked.
    pub fn alpha_jet_raw(&self, s: f64, v: f64) -> Jet {
        match self {
            Self::Interval(d) => d.alpha_jet(s, v),
            Self::HalfLine(d) => d.alpha_jet(s, v),
        }
    }

    pub fn grad_log_alpha(&self, s: f64, v: f64) -> Result<f64> {
        Self::require_time(s)?;
        self.require_interior(v)?;
        Ok(self.grad_log_alpha_raw(s, v))
    }

    #[inline]
    pub fn grad_log_alpha_raw(&self, s: f64, v: f64) -> f64 {
        match self {
            Self::Interval(d) => d.grad_log_alpha(s, v),
            Self::HalfLine(d) => d.grad_log_alpha(s, v),
        }
    }

    /// Exit distribution `mu_v` of the untilted Wiener process.
    pub fn harmonic_measure(&self, v: f64) -> Result<HarmonicMeasure> {
        self.require_interior(v)?;
        let atoms = match self {
            Self::Interval(d) => vec![
                Atom {
                    side: Side::Left,
                    point: d.a,
                    mass: (d.b - v) / d.len(),
                },
                Atom {
                    side: Side::Right,
                    point: d.b,
                    mass: (v - d.a) / d.len(),
                },
            ],
            Self::HalfLine(_) => vec![Atom {
                side: Side::Left,
                point: 0.0,
                mass: 1.0,
            }],
        };
        Ok(HarmonicMeasure { atoms })
    }

    /// Leading Dirichlet eigenvalue of `-1/2 d^2/dx^2`; zero on the half-line.
    pub fn principal_eigenvalue(&self) -> f64 {
        match self {
            Self::Interval(d) => 0.5 * (PI / d.len()).powi(2),
            Self::HalfLine(_) => 0.0,
        }
    }

    /// A constant `C` with `alpha(t, u) <= C exp(-lambda_1 t)` for `t >= t_from`.
    pub fn alpha_decay_constant(&self, u: f64, t_from: f64) -> f64 {
        match self {
            Self::Interval(d) => d.alpha_decay_constant(u, t_from.max(1e-3)),
            Self::HalfLine(_) => 1.0,
        }
    }

    /// Checks that boundary data is given at every boundary point.
    pub fn check_boundary_values(&self, values: &BoundaryValues) -> Result<()> {
        for &side in self.sides() {
            match values.get(side) {
                Some(v) if v.is_finite() => {}
                Some(v) => {
                    return Err(Error::config(
                        side_key(self, side),
                        format!("boundary value must be finite, got {v}"),
                    ))
                }
                None => {
                    return Err(Error::config(
                        side_key(self, side),
                        "missing boundary value",
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn to_spec(&self) -> DomainSpec {
        match self {
            Self::Interval(d) => DomainSpec {
                kind: DomainKind::Interval,
                a: Some(d.a),
                b: Some(d.b),
                rho: [("a".to_string(), d.rho_a()), ("b".to_string(), d.rho_b())]
                    .into_iter()
                    .collect(),
                series_terms: Some(d.series_terms),
                switch_time: Some(d.switch_time),
            },
            Self::HalfLine(d) => DomainSpec {
                kind: DomainKind::Halfline,
                a: None,
                b: None,
                rho: [("0".to_string(), d.rho_0())].into_iter().collect(),
                series_terms: None,
                switch_time: None,
            },
        }
    }
}

/// JSON key naming a boundary point: `"a"`/`"b"` on an interval, `"0"` on the half-line.
pub fn side_key(model: &DomainModel, side: Side) -> &'static str {
    match (model, side) {
        (DomainModel::Interval(_), Side::Left) => "a",
        (DomainModel::Interval(_), Side::Right) => "b",
        (DomainModel::HalfLine(_), _) => "0",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Halfline,
}

/// JSON description of a domain model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub rho: std::collections::BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_time: Option<f64>,
}

impl DomainSpec {
    /// Builds the model; `prefix` is the field path used in error messages.
    pub fn build(&self, prefix: &str) -> Result<DomainModel> {
        let field = |name: &str| format!("{prefix}.{name}");
        let rho = |key: &str| -> Result<f64> {
            let v = self
                .rho
                .get(key)
                .copied()
                .ok_or_else(|| Error::config(field(&format!("rho.{key}")), "missing"))?;
            BoundaryWeight::new(v)
                .map(BoundaryWeight::value)
                .map_err(|e| Error::config(field(&format!("rho.{key}")), e.to_string()))
        };
        match self.kind {
            DomainKind::Interval => {
                let a = self.a.ok_or_else(|| Error::config(field("a"), "missing"))?;
                let b = self.b.ok_or_else(|| Error::config(field("b"), "missing"))?;
                for key in self.rho.keys() {
                    if key != "a" && key != "b" {
                        return Err(Error::config(
                            field(&format!("rho.{key}")),
                            "unknown boundary key for an interval",
                        ));
                    }
                }
                let mut d = IntervalDomain::new(a, b, rho("a")?, rho("b")?)
                    .map_err(|e| Error::config(field("b"), e.to_string()))?;
                if let Some(n) = self.series_terms {
                    d = d
                        .with_series_terms(n)
                        .map_err(|e| Error::config(field("series_terms"), e.to_string()))?;
                }
                if let Some(s) = self.switch_time {
                    d = d
                        .with_switch_time(s)
                        .map_err(|e| Error::config(field("switch_time"), e.to_string()))?;
                }
                Ok(DomainModel::Interval(d))
            }
            DomainKind::Halfline => {
                for key in self.rho.keys() {
                    if key != "0" {
                        return Err(Error::config(
                            field(&format!("rho.{key}")),
                            "unknown boundary key for the half-line",
                        ));
                    }
                }
                Ok(DomainModel::HalfLine(
                    HalfLineDomain::new(rho("0")?)
                        .map_err(|e| Error::config(field("rho.0"), e.to_string()))?,
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> DomainModel {
        DomainModel::interval(0.0, 1.0, 0.2, 0.8).unwrap()
    }

    #[test]
    fn beta_examples() {
        let flat = DomainModel::interval(0.0, 1.0, 0.5, 0.5).unwrap();
        assert_eq!(flat.beta(0.3).unwrap(), 0.5);
        assert!((scenario().beta(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(DomainModel::halfline(0.7).unwrap().beta(2.0).unwrap(), 0.7);
        // Boundary returns the weight, exterior is rejected.
        assert!((scenario().beta(1.0).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(scenario().beta(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn grad_log_beta_examples() {
        assert_eq!(
            DomainModel::halfline(0.7)
                .unwrap()
                .grad_log_beta(3.0)
                .unwrap(),
            0.0
        );
        let flat = DomainModel::interval(0.0, 1.0, 0.4, 0.4).unwrap();
        assert_eq!(flat.grad_log_beta(0.9).unwrap(), 0.0);
        let m = scenario();
        assert!((m.grad_log_beta(0.5).unwrap() - 1.2).abs() < 1e-14);
        let h = 1e-5;
        let fd = (m.beta(0.5 + h).unwrap().ln() - m.beta(0.5 - h).unwrap().ln()) / (2.0 * h);
        assert!((fd - 1.2).abs() < 1e-8);
        assert!(m.grad_log_beta(0.0).is_err());
    }

    #[test]
    fn boundary_weight_rejects_closed_endpoints() {
        assert!(BoundaryWeight::new(0.0).is_err());
        assert!(BoundaryWeight::new(1.0).is_err());
        assert!(BoundaryWeight::new(f64::NAN).is_err());
        assert!(DomainModel::interval(1.0, 1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn kernel_is_symmetric_and_below_free_kernel() {
        for m in [scenario(), DomainModel::halfline(0.7).unwrap()] {
            for &t in &[1e-3, 0.05, 0.2, 1.5] {
                for &(x, y) in &[(0.1, 0.7), (0.5, 0.52), (0.95, 0.3)] {
                    let k = m.killed_kernel(t, x, y).unwrap();
                    let kt = m.killed_kernel(t, y, x).unwrap();
                    assert!((k - kt).abs() <= 1e-14 * k.abs().max(1.0));
                    assert!(k >= -1e-15);
                    assert!(k <= gauss::density(t, x - y) + 1e-15);
                }
            }
        }
        assert!(scenario().killed_kernel(0.0, 0.3, 0.4).is_err());
    }

    #[test]
    fn chapman_kolmogorov_by_quadrature() {
        let m = scenario();
        let rule = crate::quadrature::GaussLegendre::new(64);
        let (s, t) = (0.2, 0.3);
        for &(x, y) in &[(0.3, 0.6), (0.1, 0.9), (0.5, 0.5)] {
            let lhs = rule.integrate(0.0, 1.0, |z| {
                m.killed_kernel(s, x, z).unwrap() * m.killed_kernel(t, z, y).unwrap()
            });
            let rhs = m.killed_kernel(s + t, x, y).unwrap();
            assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn representations_agree_at_switch_time() {
        let DomainModel::Interval(d) = scenario() else {
            unreachable!()
        };
        let t = d.switch_time();
        for i in 0..20 {
            let x = 0.03 + 0.047 * i as f64;
            let y = 0.97 - 0.031 * i as f64;
            let (ki, di) = d.kernel_images(t, x, y);
            let (ke, de) = d.kernel_eigen_terms(t, x, y, 50);
            assert!((ki - ke).abs() < 1e-10);
            assert!((di - de).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_representations_agree_across_the_switch() {
        // Compare the closed-form alpha on both sides of a moved switch time.
        let base = IntervalDomain::new(-1.0, 2.0, 0.3, 0.6).unwrap();
        let early = DomainModel::Interval(base.clone().with_switch_time(10.0).unwrap());
        let late = DomainModel::Interval(base.with_switch_time(1e-6).unwrap());
        for &s in &[0.05, 0.3, 1.0, 2.0] {
            for &v in &[-0.9, 0.0, 0.7, 1.95] {
                let a = early.alpha_jet_raw(s, v);
                let b = late.alpha_jet_raw(s, v);
                assert!((a.value - b.value).abs() < 1e-10, "s={s} v={v}");
                assert!((a.d1 - b.d1).abs() < 1e-9);
                assert!((a.d2 - b.d2).abs() < 1e-8 * a.d2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn alpha_small_time_and_eigen_decay() {
        let m = scenario();
        assert!(m.alpha(1e-8, 0.5).unwrap() > 1.0 - 1e-3);
        assert!(m.alpha(1e-8, 0.01).unwrap() > 1.0 - 1e-3);
        let flat = DomainModel::interval(0.0, 1.0, 0.5, 0.5).unwrap();
        let ratio = flat.alpha(2.5, 0.5).unwrap() / flat.alpha(2.0, 0.5).unwrap();
        let expected = (-PI * PI * 0.5 / 2.0).exp();
        assert!((ratio - expected).abs() < 1e-4);
        assert!(m.alpha(-1.0, 0.5).is_err());
    }

    #[test]
    fn halfline_alpha_is_reflection_value() {
        let m = DomainModel::halfline(0.7).unwrap();
        let a = m.alpha(1.0, 1.0).unwrap();
        assert!((a - 0.682_689_492_137_086).abs() < 1e-12);
    }

    #[test]
    fn grad_log_alpha_examples() {
        let m = DomainModel::halfline(0.7).unwrap();
        let g = m.grad_log_alpha(1.0, 1.0).unwrap();
        let h = 1e-5;
        let fd =
            (m.alpha(1.0, 1.0 + h).unwrap().ln() - m.alpha(1.0, 1.0 - h).unwrap().ln()) / (2.0 * h);
        assert!((g - fd).abs() < 1e-6);
        // (2/sqrt(2 pi)) e^{-1/2} / erf(1/sqrt 2)
        assert!((g - 0.708_875).abs() < 1e-6, "{g}");
        let v = 1e-4;
        let near = m.grad_log_alpha(1.0, v).unwrap() * v;
        assert!((near - 1.0).abs() < 1e-3);
        let flat = DomainModel::interval(0.0, 1.0, 0.3, 0.3).unwrap();
        for &s in &[0.01, 0.1, 1.0] {
            assert!(flat.grad_log_alpha(s, 0.5).unwrap().abs() < 1e-12);
        }
        assert!(m.grad_log_alpha(1.0, 0.0).is_err());
    }

    #[test]
    fn grad_log_alpha_is_finite_for_large_times() {
        let m = scenario();
        for &s in &[50.0, 500.0, 5000.0] {
            let g = m.grad_log_alpha(s, 0.999).unwrap();
            assert!(g.is_finite());
        }
        let h = DomainModel::halfline(0.5).unwrap();
        assert_eq!(h.grad_log_alpha(1e-4, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn harmonic_measure_examples() {
        let m = scenario();
        let mu = m.harmonic_measure(0.5).unwrap();
        assert_eq!(mu.mass(Side::Left), 0.5);
        assert_eq!(mu.mass(Side::Right), 0.5);
        let mu = m.harmonic_measure(0.25).unwrap();
        assert_eq!(mu.mass(Side::Left), 0.75);
        assert_eq!(mu.mass(Side::Right), 0.25);
        assert_eq!(mu.total_mass(), 1.0);
        let h = DomainModel::halfline(0.7)
            .unwrap()
            .harmonic_measure(3.0)
            .unwrap();
        assert_eq!(h.atoms.len(), 1);
        assert_eq!(h.mass(Side::Left), 1.0);
    }

    #[test]
    fn decay_constant_bounds_alpha() {
        let m = scenario();
        let lambda = m.principal_eigenvalue();
        let c = m.alpha_decay_constant(0.5, 1.0);
        for &t in &[1.0, 1.5, 3.0, 6.0] {
            assert!(m.alpha(t, 0.5).unwrap() <= c * (-lambda * t).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"kind":"interval","a":0.0,"b":1.0,"rho":{"a":0.2,"b":0.8}}"#;
        let spec: DomainSpec = serde_json::from_str(json).unwrap();
        let model = spec.build("domain").unwrap();
        let again = model.to_spec().build("domain").unwrap();
        assert_eq!(model, again);
        let bad: DomainSpec =
            serde_json::from_str(r#"{"kind":"halfline","rho":{"a":0.2}}"#).unwrap();
        match bad.build("domain") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "domain.rho.a"),
            other => panic!("{other:?}"),
        }
        let missing: DomainSpec = serde_json::from_str(r#"{"kind":"halfline","rho":{}}"#).unwrap();
        assert!(missing.build("domain").is_err());
    }
}
