//! Gauss-Hermite rules for integrals against `exp(-x^2)`.

use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Nodes and weights of an `n`-point Gauss-Hermite rule.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes start from the Jacobi-matrix eigenvalues and are polished by
    /// Newton steps on orthonormal Hermite polynomials. The recurrence is
    /// renormalized as it goes so outer nodes of large rules do not
    /// overflow, and weights are assembled in log space.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let nf = n as f64;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        let mut weights = vec![0.0; n];
        for (z, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            for _ in 0..8 {
                let (p1, p2, _) = hermite_polynomials(n, *z, pim4);
                let step = p1 / ((2.0 * nf).sqrt() * p2);
                *z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, p2, log_scale) = hermite_polynomials(n, *z, pim4);
            // w = 2 / (2n p_{n-1}^2)
            *w = (-(nf.ln()) - 2.0 * (p2.abs().ln() + log_scale)).exp();
        }
        // Enforce exact symmetry.
        for i in 0..n / 2 {
            let z = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[n - 1 - i]);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
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

    /// `E[f(X)]` for `X ~ N(mean, sd^2)`.
    pub fn gaussian_expectation<T, F>(&self, mean: f64, sd: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let scale = std::f64::consts::SQRT_2 * sd;
        let norm = std::f64::consts::PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&t, &w)| acc + f(mean + scale * t) * (w * norm))
    }
}

/// Orthonormal Hermite polynomials `(p_n(z), p_{n-1}(z))`, both divided by
/// `exp(log_scale)`.
fn hermite_polynomials(n: usize, z: f64, pim4: f64) -> (f64, f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e150 {
            p1 *= 1e-150;
            p2 *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (p1, p2, log_scale)
}

static RULES: [OnceLock<GaussHermite>; 5] = [const { OnceLock::new() }; 5];

/// Cached rules for `n` in {64, 128, 256, 512, 1024}; other sizes are built fresh.
pub fn rule(n: usize) -> std::borrow::Cow<'static, GaussHermite> {
    let slot = match n {
        64 => Some(0),
        128 => Some(1),
        256 => Some(2),
        512 => Some(3),
        1024 => Some(4),
        _ => None,
    };
    match slot {
        Some(i) => std::borrow::Cow::Borrowed(RULES[i].get_or_init(|| GaussHermite::new(n))),
        None => std::borrow::Cow::Owned(GaussHermite::new(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn low_order_rules_are_exact() {
        let r = GaussHermite::new(2);
        assert!((r.nodes[1] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((r.weights[0] - PI.sqrt() / 2.0).abs() < 1e-14);
        let r = GaussHermite::new(3);
        assert!(r.nodes[1].abs() < 1e-15);
        assert!((r.weights[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn moments_and_cosine_transform() {
        for n in [64, 128, 256, 512, 1024] {
            let r = rule(n);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            let m0: f64 = r.weights.iter().sum();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            assert!((m0 - PI.sqrt()).abs() < 1e-12, "n={n} m0={m0}");
            assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12, "n={n} m2={m2}");
            for omega in [0.5, 3.0, 8.0] {
                let got: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * (omega * x).cos())
                    .sum();
                let want = PI.sqrt() * (-omega * omega / 4.0).exp();
                assert!((got - want).abs() < 1e-12, "n={n} omega={omega}");
            }
        }
    }

    #[test]
    fn gaussian_expectation_of_square() {
        let r = rule(64);
        let v = r.gaussian_expectation(1.5, 0.3, |x| x * x);
        assert!((v - (1.5f64.powi(2) + 0.09)).abs() < 1e-13);
    }
}
