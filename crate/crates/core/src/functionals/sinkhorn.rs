//! Log-domain entropic optimal transport with epsilon annealing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest cost matrix (entries) the solver accepts.
pub const MAX_ENTRIES: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// First epsilon, relative to the mean cost.
    pub eps_start: f64,
    /// Final epsilon, relative to the mean cost.
    pub eps_end: f64,
    /// Geometric decay factor between stages.
    pub decay: f64,
    pub max_iter: usize,
    /// Target marginal L1 error at the final epsilon.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_end: 1e-3,
            decay: 0.5,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

/// Discrete measure `sum_i a_i delta_{x_i}`.
#[derive(Debug, Clone)]
pub struct Discrete {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Dual potentials and diagnostics of a converged entropic problem.
#[derive(Debug, Clone)]
pub struct EntropicSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub eps: f64,
    pub marginal_error: f64,
    /// Dual objective `<f,a> + <g,b>` (the entropic cost).
    pub value: f64,
    cost: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl EntropicSolution {
    /// Coupling `pi_ij = a_i b_j exp((f_i + g_j - C_ij)/eps)`, row-major.
    pub fn coupling(&self) -> Vec<f64> {
        let nb = self.b.len();
        let mut pi = vec![0.0; self.a.len() * nb];
        for (i, row) in pi.chunks_mut(nb).enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                *p = self.a[i]
                    * self.b[j]
                    * ((self.f[i] + self.g[j] - self.cost[i * nb + j]) / self.eps).exp();
            }
        }
        pi
    }

    /// Transport cost `<C, pi>`.
    pub fn primal_cost(&self) -> f64 {
        self.coupling()
            .iter()
            .zip(&self.cost)
            .map(|(p, c)| p * c)
            .sum()
    }
}

fn cost_matrix(x: &Discrete, y: &Discrete) -> Vec<f64> {
    x.points
        .par_iter()
        .flat_map_iter(|p| {
            y.points.iter().map(move |q| {
                p.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum::<f64>()
            })
        })
        .collect()
}

/// `-eps log sum_j exp(log w_j + (pot_j - C_ij)/eps)` for each row `i`.
fn soft_min(cost: &[f64], rows: usize, cols: usize, transpose: bool, pot: &[f64], logw: &[f64], eps: f64) -> Vec<f64> {
    (0..rows)
        .into_par_iter()
        .map(|i| {
            let c = |j: usize| {
                if transpose {
                    cost[j * rows + i]
                } else {
                    cost[i * cols + j]
                }
            };
            let mut mx = f64::NEG_INFINITY;
            for j in 0..cols {
                mx = mx.max(logw[j] + (pot[j] - c(j)) / eps);
            }
            let s: f64 = (0..cols)
                .map(|j| (logw[j] + (pot[j] - c(j)) / eps - mx).exp())
                .sum();
            -eps * (mx + s.ln())
        })
        .collect()
}

/// Solves the entropic problem between `x` and `y` at `eps_abs`, starting the
/// annealing at `eps_start_abs`.
fn solve(
    x: &Discrete,
    y: &Discrete,
    eps_start_abs: f64,
    eps_abs: f64,
    cfg: &SinkhornConfig,
) -> Result<EntropicSolution> {
    let (na, nb) = (x.points.len(), y.points.len());
    if na * nb > MAX_ENTRIES {
        return Err(Error::Unsupported(format!(
            "entropic problem of size {na}x{nb} exceeds {MAX_ENTRIES} entries"
        )));
    }
    let cost = cost_matrix(x, y);
    let loga: Vec<f64> = x.weights.iter().map(|w| w.ln()).collect();
    let logb: Vec<f64> = y.weights.iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; na];
    let mut g = vec![0.0; nb];
    let mut eps = eps_start_abs.max(eps_abs);
    loop {
        let last = eps <= eps_abs * (1.0 + 1e-12);
        let mut err = f64::INFINITY;
        for it in 0..cfg.max_iter {
            g = soft_min(&cost, nb, na, true, &f, &loga, eps);
            let f_next = soft_min(&cost, na, nb, false, &g, &logb, eps);
            if it % 5 == 0 || it + 1 == cfg.max_iter {
                err = x
                    .weights
                    .iter()
                    .zip(f.iter().zip(&f_next))
                    .map(|(a, (fo, fn_))| a * ((fo - fn_) / eps).exp_m1().abs())
                    .sum();
            }
            f = f_next;
            if err < cfg.tol {
                break;
            }
        }
        if last {
            // final half-step so that the column marginals are exact
            g = soft_min(&cost, nb, na, true, &f, &loga, eps);
            if !(err < cfg.tol) {
                return Err(Error::SinkhornNotConverged {
                    eps,
                    marginal_error: err,
                });
            }
            let value = linalg::dot(&f, &x.weights) + linalg::dot(&g, &y.weights);
            return Ok(EntropicSolution {
                f,
                g,
                eps,
                marginal_error: err,
                value,
                cost,
                a: x.weights.clone(),
                b: y.weights.clone(),
            });
        }
        eps = (eps * cfg.decay).max(eps_abs);
    }
}

fn mean_cost(x: &Discrete, y: &Discrete) -> f64 {
    let mut s = 0.0;
    for (p, a) in x.points.iter().zip(&x.weights) {
        for (q, b) in y.points.iter().zip(&y.weights) {
            s += a * b * p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        }
    }
    s
}

/// Entropic solution at the final annealing level for the pair `(x, y)`.
pub fn entropic_plan(x: &Discrete, y: &Discrete, cfg: &SinkhornConfig) -> Result<EntropicSolution> {
    let scale = mean_cost(x, y).max(f64::MIN_POSITIVE);
    solve(x, y, cfg.eps_start * scale, cfg.eps_end * scale, cfg)
}

/// Debiased Sinkhorn divergence `OT(a,b) - OT(a,a)/2 - OT(b,b)/2` and the epsilon used.
pub fn sinkhorn_divergence(x: &Discrete, y: &Discrete, cfg: &SinkhornConfig) -> Result<(f64, f64)> {
    let scale = mean_cost(x, y).max(f64::MIN_POSITIVE);
    let (e0, e1) = (cfg.eps_start * scale, cfg.eps_end * scale);
    let xy = solve(x, y, e0, e1, cfg)?;
    let xx = solve(x, x, e0, e1, cfg)?;
    let yy = solve(y, y, e0, e1, cfg)?;
    Ok(((xy.value - 0.5 * (xx.value + yy.value)).max(0.0), xy.eps))
}
