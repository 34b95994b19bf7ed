//! Centered Gaussian density of variance `t` and interval probabilities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[inline]
pub fn density(t: f64, z: f64) -> f64 {
    (-0.5 * z * z / t).exp() / (2.0 * PI * t).sqrt()
}

/// Derivative of [`density`] in `z`.
#[inline]
pub fn density_dz(t: f64, z: f64) -> f64 {
    -z / t * density(t, z)
}

/// `P(lo < Z < hi)` for `Z ~ N(0, 1)`, computed without cancellation in the tails.
pub fn std_normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    let (l, h) = (lo * FRAC_1_SQRT_2, hi * FRAC_1_SQRT_2);
    if l >= 0.0 {
        0.5 * (libm::erfc(l) - libm::erfc(h))
    } else if h <= 0.0 {
        0.5 * (libm::erfc(-h) - libm::erfc(-l))
    } else {
        0.5 * (libm::erf(h) - libm::erf(l))
    }
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_matches_erf_and_tails() {
        assert!((std_normal_mass(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
        let far = std_normal_mass(10.0, 11.0);
        assert!(far > 0.0 && far < 1e-22);
        assert_eq!(std_normal_mass(1.0, 1.0), 0.0);
    }

    #[test]
    fn density_integrates_to_one() {
        let rule = crate::quadrature::GaussLegendre::new(64);
        let got = rule.integrate(-8.0, 8.0, |z| density(0.5, z));
        assert!((got - 1.0).abs() < 1e-13);
    }
}
