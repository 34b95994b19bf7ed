//! Monte Carlo estimates and the goodness-of-fit statistics used by the checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// Mean and `std / sqrt(n)`, summed in slice order.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::Argument(format!(
                "an estimate needs at least two samples, got {n}"
            )));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_samples: n,
        })
    }

    /// Whether `value` lies within `k` standard errors (plus `slack`) of the mean.
    pub fn covers(&self, value: f64, k: f64, slack: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + slack
    }
}

/// Combined standard error of a difference of independent estimates.
pub fn combined_stderr(a: &McEstimate, b: &McEstimate) -> f64 {
    a.stderr.hypot(b.stderr)
}

/// Sample correlation of consecutive pairs.
pub fn pair_correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// One-sample Kolmogorov-Smirnov test against the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn ks_standard_normal(values: &[f64]) -> KsResult {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
        d = d.max(cdf - i as f64 / nf).max((i + 1) as f64 / nf - cdf);
    }
    let sn = nf.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
        n,
    }
}

/// Largest KS statistic accepted at `level` for `n` samples.
pub fn ks_critical_value(level: f64, n: usize) -> f64 {
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sn = (n as f64).sqrt();
    hi / (sn + 0.12 + 0.11 / sn)
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = McEstimate::from_samples(&[2.0; 10]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert!(McEstimate::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn stderr_is_std_over_root_n() {
        let e = McEstimate::from_samples(&[0.0, 2.0, 0.0, 2.0]).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!((e.stderr - (4.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ks_critical_value_at_one_percent() {
        let c = ks_critical_value(0.01, 1_000_000);
        assert!((c * 1000.0 - 1.6276).abs() < 1e-3, "{c}");
    }

    #[test]
    fn ks_accepts_normals_and_rejects_shifted() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let z: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        assert!(ks_standard_normal(&z).p_value > 0.01);
        let shifted: Vec<f64> = z.iter().map(|v| v + 0.1).collect();
        assert!(ks_standard_normal(&shifted).p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Critical values of the limiting distribution.
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 2e-4);
    }
}
