use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{
    GaussianRepr, GridDensity, Measure, Representation, DENSITY_FLOOR, SUPPORT_FRACTION,
};

/// Two measures brought to a common representation.
pub(crate) enum Pair {
    Gaussian(GaussianRepr, GaussianRepr),
    Grid(GridDensity, GridDensity),
    Product(Measure, Measure, usize),
}

fn no_density() -> Error {
    Error::Unsupported("particle clouds carry no density".into())
}

/// Aligns `(nu, mu)`: equal grids are used as is, analytic measures are
/// discretized on the other side's grid through their potential.
pub(crate) fn align(nu: &Measure, mu: &Measure) -> Result<Pair> {
    if nu.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    use Representation as R;
    match (nu.repr(), mu.repr()) {
        (R::Product { factor: a, copies: p }, R::Product { factor: b, copies: q }) if p == q => {
            Ok(Pair::Product((**a).clone(), (**b).clone(), *p))
        }
        (R::Product { .. }, _) | (_, R::Product { .. }) => {
            align(&nu.materialize()?, &mu.materialize()?)
        }
        (R::Particles(_), _) | (_, R::Particles(_)) => Err(no_density()),
        (R::Gaussian(a), R::Gaussian(b)) => Ok(Pair::Gaussian(a.clone(), b.clone())),
        (R::Grid(a), R::Grid(b)) if a.grid == b.grid => Ok(Pair::Grid(a.clone(), b.clone())),
        (R::Grid(a), _) => match mu.discretize(&a.grid) {
            Ok(m) => Ok(Pair::Grid(a.clone(), m.as_grid().unwrap().clone())),
            Err(Error::Unsupported(_)) => Err(Error::NotAbsolutelyContinuous(
                "grids differ and the reference cannot be re-discretized".into(),
            )),
            Err(e) => Err(e),
        },
        (_, R::Grid(b)) => {
            let m = nu.discretize(&b.grid)?;
            Ok(Pair::Grid(m.as_grid().unwrap().clone(), b.clone()))
        }
    }
}

/// `H(nu|mu) = int f log f dmu`, `f = dnu/dmu`.
pub fn relative_entropy(nu: &Measure, mu: &Measure) -> Result<f64> {
    match align(nu, mu)? {
        Pair::Gaussian(a, b) => Ok(gaussian_relative_entropy(&a, &b)),
        Pair::Grid(a, b) => grid_relative_entropy(&a, &b),
        Pair::Product(a, b, copies) => Ok(copies as f64 * relative_entropy(&a, &b)?),
    }
}

/// Closed form `1/2 (tr(P_mu S_nu) - n + d^T P_mu d - log det(P_mu S_nu))`.
pub fn gaussian_relative_entropy(nu: &GaussianRepr, mu: &GaussianRepr) -> f64 {
    let n = nu.mean.len() as f64;
    let p = mu.precision();
    let d = &nu.mean - &mu.mean;
    let tr = (&p * &nu.covariance).trace();
    let logdet = nu.log_det() - mu.log_det();
    (0.5 * (tr - n + d.dot(&(&p * &d)) - logdet)).max(0.0)
}

fn grid_relative_entropy(nu: &GridDensity, mu: &GridDensity) -> Result<f64> {
    let floor = SUPPORT_FRACTION * nu.max_weight();
    let mut h = 0.0;
    for (&a, &b) in nu.weights.iter().zip(&mu.weights) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            if a > floor {
                return Err(Error::NotAbsolutelyContinuous(
                    "reference vanishes where the measure has mass".into(),
                ));
            }
            continue;
        }
        h += a * (a / b).ln();
    }
    Ok(h.max(0.0))
}

/// `int rho log rho dx` for the Lebesgue density `rho` of `mu`.
pub fn entropy_dx(mu: &Measure) -> Result<f64> {
    match mu.repr() {
        Representation::Gaussian(g) => Ok(gaussian_entropy_dx(g)),
        Representation::Grid(g) => Ok(grid_entropy_dx(g)),
        Representation::Particles(_) => Err(no_density()),
        Representation::Product { factor, copies } => Ok(*copies as f64 * entropy_dx(factor)?),
    }
}

/// `-n/2 log(2 pi e) - 1/2 log det S`
pub fn gaussian_entropy_dx(g: &GaussianRepr) -> f64 {
    let n = g.mean.len() as f64;
    -0.5 * n * (2.0 * PI * std::f64::consts::E).ln() - 0.5 * g.log_det()
}

pub(crate) fn grid_entropy_dx(g: &GridDensity) -> f64 {
    let vol = g.grid.cell_volume();
    g.weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| w * (w / vol).ln())
        .sum()
}

/// `I(nu|mu) = int |grad log f|^2 dnu`.
pub fn fisher_information(nu: &Measure, mu: &Measure) -> Result<f64> {
    match align(nu, mu)? {
        Pair::Gaussian(a, b) => Ok(gaussian_fisher_information(&a, &b)),
        Pair::Grid(a, b) => grid_fisher_information(&a, &b),
        Pair::Product(a, b, copies) => Ok(copies as f64 * fisher_information(&a, &b)?),
    }
}

/// `tr(A S_nu A) + |P_mu (m_nu - m_mu)|^2` with `A = P_mu - P_nu`.
pub fn gaussian_fisher_information(nu: &GaussianRepr, mu: &GaussianRepr) -> f64 {
    let p_mu = mu.precision();
    let a = &p_mu - nu.precision();
    let d = &p_mu * (&nu.mean - &mu.mean);
    (&a * &nu.covariance * &a).trace() + d.norm_squared()
}

/// Finite-difference gradient of `log(w_nu / w_mu)` at every support node.
///
/// Central differences in the interior of the support, one-sided at its edges;
/// nodes outside the support get `None`.
pub(crate) fn grid_log_ratio_gradient(
    nu: &GridDensity,
    mu: Option<&GridDensity>,
) -> Vec<Option<Vec<f64>>> {
    let grid = &nu.grid;
    let floor = SUPPORT_FRACTION * nu.max_weight();
    let vol = grid.cell_volume();
    let ratio: Vec<f64> = (0..grid.len())
        .map(|k| {
            let a = nu.weights[k].max(DENSITY_FLOOR * vol).ln();
            match mu {
                Some(m) => a - m.weights[k].max(DENSITY_FLOOR * vol).ln(),
                None => a - vol.ln(),
            }
        })
        .collect();
    let inside = |k: usize| nu.weights[k] > floor;
    (0..grid.len())
        .map(|k| {
            if !inside(k) {
                return None;
            }
            let idx = grid.multi_index(k);
            let g = (0..grid.dim())
                .map(|a| {
                    let h = grid.spacing(a);
                    let s = grid.stride(a);
                    let back = idx[a] > 0 && inside(k - s);
                    let fwd = idx[a] + 1 < grid.counts()[a] && inside(k + s);
                    match (back, fwd) {
                        (true, true) => (ratio[k + s] - ratio[k - s]) / (2.0 * h),
                        (false, true) => (ratio[k + s] - ratio[k]) / h,
                        (true, false) => (ratio[k] - ratio[k - s]) / h,
                        (false, false) => 0.0,
                    }
                })
                .collect();
            Some(g)
        })
        .collect()
}

fn grid_fisher_information(nu: &GridDensity, mu: &GridDensity) -> Result<f64> {
    let grads = grid_log_ratio_gradient(nu, Some(mu));
    let mut info = 0.0;
    for (w, g) in nu.weights.iter().zip(&grads) {
        if let Some(g) = g {
            info += w * linalg::norm2(g);
        }
    }
    if !info.is_finite() {
        return Err(Error::NonFinite("Fisher information".into()));
    }
    Ok(info)
}

/// Score `grad log rho` of a Lebesgue density at the support nodes of a grid
/// measure (`None` outside the support).
pub fn grid_score(nu: &GridDensity) -> Vec<Option<Vec<f64>>> {
    grid_log_ratio_gradient(nu, None)
}

/// Quadrature node of a measure with its score `grad log rho` at that node.
#[derive(Debug, Clone)]
pub struct ScoreNode {
    pub x: Vec<f64>,
    pub weight: f64,
    pub score: Vec<f64>,
}

/// Quadrature nodes of `nu` carrying the score of its Lebesgue density:
/// exact for Gaussians, finite differences of `log rho` on grids (support nodes only).
pub fn score_quadrature(nu: &Measure) -> Result<Vec<ScoreNode>> {
    match nu.repr() {
        Representation::Gaussian(g) => {
            let p = g.precision();
            let mut out = Vec::new();
            super::integrate::for_each_node(nu, |x, w| {
                let d = nalgebra::DVector::from_column_slice(x) - &g.mean;
                out.push(ScoreNode {
                    x: x.to_vec(),
                    weight: w,
                    score: (-(&p * d)).iter().copied().collect(),
                });
            })?;
            Ok(out)
        }
        Representation::Grid(g) => Ok(grid_score(g)
            .into_iter()
            .enumerate()
            .filter_map(|(k, s)| {
                s.map(|score| ScoreNode {
                    x: g.grid.point(k),
                    weight: g.weights[k],
                    score,
                })
            })
            .collect()),
        Representation::Particles(_) => Err(no_density()),
        Representation::Product { .. } => score_quadrature(&nu.materialize()?),
    }
}
