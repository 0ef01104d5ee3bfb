//! Gauss-Hermite rules normalized for expectations under a Gaussian.

use thiserror::Error;

/// Largest order the Newton iteration is trusted for.
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuadratureError {
    #[error("unsupported Gauss-Hermite order {0} (supported: 1..={MAX_ORDER})")]
    UnsupportedOrder(usize),
}

/// `Σ_k w_k f(μ + σ x_k) ≈ E[f(Y)]` for `Y ~ N(μ, σ²)`.
///
/// Nodes are ascending and symmetric about zero; weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Probabilists' Gauss-Hermite rule of `order` points. Exact for
    /// polynomials up to degree `2 * order - 1`.
    pub fn gauss_hermite(order: usize) -> Result<Self, QuadratureError> {
        if order == 0 || order > MAX_ORDER {
            return Err(QuadratureError::UnsupportedOrder(order));
        }
        let (phys_nodes, phys_weights) = physicists_rule(order);
        // x = √2 t, w = w_t / √π
        let total: f64 = phys_weights.iter().sum();
        let mut pairs: Vec<(f64, f64)> = phys_nodes
            .iter()
            .zip(&phys_weights)
            .map(|(&t, &w)| (std::f64::consts::SQRT_2 * t, w / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(Y)]` for `Y ~ N(mean, sd²)`.
    pub fn expect(&self, mean: f64, sd: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mean + sd * x)).sum()
    }
}

/// Roots and weights of `H_n` (weight `e^{-t²}`) by Newton iteration on the
/// orthonormal recurrence, with the usual asymptotic starting guesses.
fn physicists_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        if n % 2 == 1 && i == half - 1 {
            z = 0.0;
            // Recompute the derivative at the exact centre.
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial(k: u32) -> f64 {
        (1..=k).rev().step_by(2).map(f64::from).product()
    }

    #[test]
    fn rejects_bad_orders() {
        assert_eq!(QuadratureRule::gauss_hermite(0), Err(QuadratureError::UnsupportedOrder(0)));
        assert!(QuadratureRule::gauss_hermite(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn five_point_rule_structure() {
        let rule = QuadratureRule::gauss_hermite(5).unwrap();
        assert_eq!(rule.order(), 5);
        assert!(rule.weights().iter().all(|&w| w > 0.0));
        assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for k in 0..5 {
            assert!((rule.nodes()[k] + rule.nodes()[4 - k]).abs() < 1e-14);
        }
        assert_eq!(rule.nodes()[2], 0.0);
        // Known probabilists' nodes: ±√(5 ± √10).
        assert!((rule.nodes()[4] - (5.0 + 10f64.sqrt()).sqrt()).abs() < 1e-13);
        assert!((rule.nodes()[3] - (5.0 - 10f64.sqrt()).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn constant_and_low_moments() {
        let rule = QuadratureRule::gauss_hermite(5).unwrap();
        for &(mu, sd) in &[(0.0, 1.0), (1.3, 0.2), (-4.0, 3.0)] {
            assert!((rule.expect(mu, sd, |_| 1.0) - 1.0).abs() < 1e-14);
            assert!((rule.expect(mu, sd, |y| y) - mu).abs() < 1e-12);
            assert!((rule.expect(mu, sd, |y| y * y) - (mu * mu + sd * sd)).abs() < 1e-12);
        }
    }

    #[test]
    fn eighth_moment_exact() {
        let rule = QuadratureRule::gauss_hermite(5).unwrap();
        let sd: f64 = 0.7;
        let expected = 105.0 * sd.powi(8);
        let got = rule.expect(0.0, sd, |y| y.powi(8));
        assert!(((got - expected) / expected).abs() < 1e-12);
        // Degree 10 is beyond exactness at order 5.
        let m10 = double_factorial(9) * sd.powi(10);
        assert!(((rule.expect(0.0, sd, |y| y.powi(10)) - m10) / m10).abs() > 1e-3);
    }

    #[test]
    fn higher_orders_exact_to_their_degree() {
        for order in [1usize, 2, 3, 8, 13, 20, 40] {
            let rule = QuadratureRule::gauss_hermite(order).unwrap();
            assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for k in (0..2 * order as u32).step_by(2).take(12) {
                let expected = double_factorial(k.saturating_sub(1));
                let got = rule.expect(0.0, 1.0, |y| y.powi(k as i32));
                assert!(((got - expected) / expected).abs() < 1e-10, "order {order} moment {k}: {got} vs {expected}");
            }
        }
    }
}
