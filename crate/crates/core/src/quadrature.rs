//! Quadrature rules: Gauss-Hermite for Gaussian expectations and a
//! tangent-mapped midpoint rule for integrals over the whole real line.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss-Hermite rule for the standard normal weight (probabilists' convention):
/// `sum_k w_k f(z_k) ~ E[f(Z)]`, exact for polynomials of degree < 2m.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch construction from the Jacobi matrix of the monic
    /// Hermite recurrence `He_{k+1} = z He_k - k He_{k-1}`.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "Gauss-Hermite needs at least one node");
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let b = (k as f64).sqrt();
            jac[(k, k - 1)] = b;
            jac[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrize: the rule is exactly symmetric about zero
        for i in 0..m / 2 {
            let j = m - 1 - i;
            let z = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-z, w);
            pairs[j] = (z, w);
        }
        if m % 2 == 1 {
            pairs[m / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Per-axis node count for an `n`-dimensional tensor rule with at most
    /// `budget` total nodes.
    pub fn nodes_per_axis(n: usize, budget: usize, max_per_axis: usize) -> usize {
        let mut m = max_per_axis;
        while m > 2 && (m as f64).powi(n as i32) > budget as f64 {
            m -= 1;
        }
        m
    }
}

/// Tensor-product iteration over multi-indices `0..m` in each of `n` axes.
pub fn for_each_multi_index(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; n];
    loop {
        f(&idx);
        let mut axis = 0;
        loop {
            if axis == n {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Midpoint rule in `theta` after the substitution `x = scale * tan(theta)`.
/// Suited to integrands with algebraic or faster decay.
#[derive(Debug, Clone)]
pub struct TanRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TanRule {
    pub fn new(count: usize, scale: f64) -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let dtheta = 2.0 * half_pi / count as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for k in 0..count {
            let theta = -half_pi + (k as f64 + 0.5) * dtheta;
            let c = theta.cos();
            nodes.push(scale * theta.tan());
            weights.push(scale * dtheta / (c * c));
        }
        Self { nodes, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(20);
        let m = |p: i32| -> f64 {
            gh.nodes
                .iter()
                .zip(&gh.weights)
                .map(|(z, w)| w * z.powi(p))
                .sum()
        };
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(8) - 105.0).abs() < 1e-8);
    }

    #[test]
    fn tan_rule_integrates_cauchy() {
        let r = TanRule::new(400, 1.0);
        let s: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w / (1.0 + x * x))
            .sum();
        assert!((s - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn multi_index_count() {
        let mut c = 0;
        for_each_multi_index(3, 4, |_| c += 1);
        assert_eq!(c, 64);
    }
}
