//! Gauss–Hermite rules for expectations over a standard normal variable.

/// Nodes `ξᵢ` and log-weights `log ωᵢ` with `E[f(ξ)] ≈ Σ ωᵢ f(ξᵢ)` for `ξ ~ N(0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GaussHermite {
    pub const DEFAULT_ORDER: usize = 128;

    /// Rule of the given order, computed by Newton iteration on the
    /// orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let nf = n as f64;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0f64; n];
        let mut w = vec![0.0f64; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let log_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
        // ascending order
        let mut pairs: Vec<(f64, f64)> =
            x.iter().zip(&w).map(|(&xi, &wi)| (sqrt2 * xi, wi.ln() - log_sqrt_pi)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            log_weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &lw)| lw.exp() * f(x))
            .sum()
    }
}

impl Default for GaussHermite {
    fn default() -> Self {
        GaussHermite::new(Self::DEFAULT_ORDER)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        for order in [5, 20, 64, 128] {
            let gh = GaussHermite::new(order);
            assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-13, "order {order}");
            assert!(gh.expect(|x| x).abs() < 1e-13);
            assert!((gh.expect(|x| x * x) - 1.0).abs() < 1e-12);
            if order >= 3 {
                assert!((gh.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn integrates_exponentials() {
        let gh = GaussHermite::default();
        for k in [-3.0f64, 0.5, 2.0, 5.0] {
            let exact = (0.5 * k * k).exp();
            assert!((gh.expect(|x| (k * x).exp()) / exact - 1.0).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let gh = GaussHermite::new(33);
        let n = gh.nodes();
        assert!(n.windows(2).all(|p| p[0] < p[1]));
        for i in 0..33 {
            assert!((n[i] + n[32 - i]).abs() < 1e-12);
        }
        assert!(n[16].abs() < 1e-14);
    }
}
