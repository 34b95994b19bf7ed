//! Gauss-Legendre rules and barycentric Lagrange interpolation.

use std::f64::consts::PI;

/// An n-point Gauss-Legendre rule on `[-1, 1]`, nodes in increasing order.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root.
            let mut x = ((i as f64 + 0.75) / (nf + 0.5) * PI).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights affinely mapped to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let x = self.nodes.iter().map(|&t| mid + half * t).collect();
        let w = self.weights.iter().map(|&w| half * w).collect();
        (x, w)
    }

    /// Integral of `f` over `[lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Barycentric weights for Lagrange interpolation on arbitrary distinct nodes,
/// normalised so the largest magnitude is one.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let lo = nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Scale to length 4 so the products stay in range.
    let scale = if hi > lo { 4.0 / (hi - lo) } else { 1.0 };
    let mut w: Vec<f64> = (0..nodes.len())
        .map(|j| {
            let mut p = 1.0;
            for (k, &xk) in nodes.iter().enumerate() {
                if k != j {
                    p *= (nodes[j] - xk) * scale;
                }
            }
            1.0 / p
        })
        .collect();
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &mut w {
        *v /= max;
    }
    w
}

/// Values of all Lagrange basis polynomials at `x`, written into `out`.
pub fn lagrange_basis_into(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    debug_assert_eq!(nodes.len(), out.len());
    let mut denom = 0.0;
    for (j, (&xj, &wj)) in nodes.iter().zip(bary).enumerate() {
        let diff = x - xj;
        if diff == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j] = 1.0;
            return;
        }
        let c = wj / diff;
        out[j] = c;
        denom += c;
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
}

/// Barycentric interpolation of `values` at `x`.
pub fn interpolate(nodes: &[f64], bary: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xj, &wj), &fj) in nodes.iter().zip(bary).zip(values) {
        let diff = x - xj;
        if diff == 0.0 {
            return fj;
        }
        let c = wj / diff;
        num += c * fj;
        den += c;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // Degree 15 is the exactness limit for 8 nodes.
        let got = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((got - 2f64.powi(16) / 16.0).abs() < 1e-10);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sixty_four_node_rule_is_sorted_and_symmetric() {
        let rule = GaussLegendre::new(64);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        for i in 0..64 {
            assert!((rule.nodes[i] + rule.nodes[63 - i]).abs() < 1e-15);
            assert!(rule.weights[i] > 0.0);
        }
        let got = rule.integrate(0.0, PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rule_has_zero_midpoint() {
        let rule = GaussLegendre::new(5);
        assert_eq!(rule.nodes[2], 0.0);
        assert!((rule.weights[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn barycentric_interpolation_is_spectral_on_gauss_nodes() {
        let (x, _) = GaussLegendre::new(40).mapped(0.0, 1.0);
        let bw = barycentric_weights(&x);
        let f: Vec<f64> = x.iter().map(|&t| (3.0 * t).exp()).collect();
        for &t in &[0.0, 0.013, 0.5, 0.777, 1.0] {
            let got = interpolate(&x, &bw, &f, t);
            assert!((got - (3.0 * t).exp()).abs() < 1e-11, "{t}: {got}");
        }
        let mut basis = vec![0.0; x.len()];
        lagrange_basis_into(&x, &bw, 0.3, &mut basis);
        let s: f64 = basis.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
