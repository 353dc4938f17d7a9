//! Gauss–Legendre quadrature.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Node count used for moment integrals.
pub const DEFAULT_ORDER: usize = 64;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of `P_n` by Newton iteration from the Chebyshev-like guess
    /// `cos(π(i − 1/4)/(n + 1/2))`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f(x) dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .collect();
        half * crate::sum::pairwise_sum(&terms)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64] {
            let q = GaussLegendre::new(n);
            let s: f64 = q.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let q = GaussLegendre::new(8);
        // ∫_0^2 x^15 dx = 2^16 / 16
        let got = q.integrate(0.0, 2.0, |x| libm::pow(x, 15.0));
        assert!((got / 4096.0 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn three_point_rule_nodes() {
        let q = GaussLegendre::new(3);
        let r = libm::sqrt(0.6);
        assert!((q.nodes()[0] + r).abs() < 1e-15);
        assert!(q.nodes()[1].abs() < 1e-15);
        assert!((q.weights()[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_integrands_at_order_64() {
        let q = GaussLegendre::new(DEFAULT_ORDER);
        let got = q.integrate(0.1, 1.0, libm::exp);
        assert!((got - (libm::exp(1.0) - libm::exp(0.1))).abs() < 1e-14);
        let got = q.integrate(0.1, 1.0, |x| libm::log(x) * libm::log(x));
        // x(ln²x − 2 ln x + 2) from 0.1 to 1
        let f = |x: f64| x * (libm::log(x) * libm::log(x) - 2.0 * libm::log(x) + 2.0);
        assert!((got - (f(1.0) - f(0.1))).abs() < 1e-14);
    }
}
