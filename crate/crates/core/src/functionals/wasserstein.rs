use statrs::distribution::{ContinuousCDF, Normal};

use super::sinkhorn::{self, Discrete, SinkhornConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{GaussianRepr, Measure, Representation, SUPPORT_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum W2Backend {
    Auto,
    Gaussian,
    Quantile1d,
    Entropic,
}

/// Squared distance together with the backend that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2Estimate {
    pub squared: f64,
    pub backend: W2Backend,
    /// Final entropic regularization, when the entropic backend was used.
    pub epsilon: Option<f64>,
}

impl W2Estimate {
    pub fn distance(&self) -> f64 {
        self.squared.max(0.0).sqrt()
    }
}

/// `W_2(nu, mu)` with the requested backend.
pub fn wasserstein2(nu: &Measure, mu: &Measure, backend: W2Backend) -> Result<W2Estimate> {
    if nu.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    if let (
        Representation::Product { factor: a, copies: p },
        Representation::Product { factor: b, copies: q },
    ) = (nu.repr(), mu.repr())
    {
        if p == q {
            let est = wasserstein2(a, b, backend)?;
            return Ok(W2Estimate {
                squared: *p as f64 * est.squared,
                ..est
            });
        }
    }
    let nu_full;
    let mu_full;
    let (nu, mu) = if matches!(nu.repr(), Representation::Product { .. })
        || matches!(mu.repr(), Representation::Product { .. })
    {
        nu_full = nu.materialize()?;
        mu_full = mu.materialize()?;
        (&nu_full, &mu_full)
    } else {
        (nu, mu)
    };
    let resolved = match backend {
        W2Backend::Auto => {
            if nu.as_gaussian().is_some() && mu.as_gaussian().is_some() {
                W2Backend::Gaussian
            } else if nu.dim() == 1 {
                W2Backend::Quantile1d
            } else {
                W2Backend::Entropic
            }
        }
        b => b,
    };
    match resolved {
        W2Backend::Gaussian => match (nu.as_gaussian(), mu.as_gaussian()) {
            (Some(a), Some(b)) => Ok(W2Estimate {
                squared: gaussian_w2_squared(a, b),
                backend: resolved,
                epsilon: None,
            }),
            _ => Err(Error::Unsupported("gaussian backend needs two Gaussian measures".into())),
        },
        W2Backend::Quantile1d => {
            let a = Quantile::from_measure(nu)?;
            let b = Quantile::from_measure(mu)?;
            Ok(W2Estimate {
                squared: quantile_w2_squared(&a, &b),
                backend: resolved,
                epsilon: None,
            })
        }
        W2Backend::Entropic => {
            let (d, eps) = sinkhorn::sinkhorn_divergence(
                &to_discrete(nu)?,
                &to_discrete(mu)?,
                &SinkhornConfig::default(),
            )?;
            Ok(W2Estimate {
                squared: d,
                backend: resolved,
                epsilon: Some(eps),
            })
        }
        W2Backend::Auto => unreachable!(),
    }
}

/// Shorthand for the automatically selected backend, returning `W_2`.
pub fn w2(nu: &Measure, mu: &Measure) -> Result<f64> {
    Ok(wasserstein2(nu, mu, W2Backend::Auto)?.distance())
}

/// `|m1-m2|^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2})`
pub fn gaussian_w2_squared(a: &GaussianRepr, b: &GaussianRepr) -> f64 {
    let r = linalg::sym_sqrt(&b.covariance);
    let cross = linalg::sym_sqrt(&(&r * &a.covariance * &r));
    let tr = a.covariance.trace() + b.covariance.trace() - 2.0 * cross.trace();
    ((&a.mean - &b.mean).norm_squared() + tr).max(0.0)
}

/// Support points and weights of a grid or particle measure, dropping cells
/// below the support floor.
pub(crate) fn to_discrete(m: &Measure) -> Result<Discrete> {
    let (points, weights): (Vec<Vec<f64>>, Vec<f64>) = match m.repr() {
        Representation::Grid(g) => {
            let floor = SUPPORT_FRACTION * g.max_weight();
            (0..g.grid.len())
                .filter(|&k| g.weights[k] > floor)
                .map(|k| (g.grid.point(k), g.weights[k]))
                .unzip()
        }
        Representation::Particles(p) => p
            .points
            .iter()
            .zip(&p.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| (x.clone(), *w))
            .unzip(),
        _ => {
            return Err(Error::Unsupported(
                "entropic backend needs grid or particle measures".into(),
            ))
        }
    };
    let total: f64 = weights.iter().sum();
    Ok(Discrete {
        points,
        weights: weights.into_iter().map(|w| w / total).collect(),
    })
}

/// Quantile function of a 1D measure.
///
/// Grid cells spread their mass uniformly over `[x - h/2, x + h/2]`, so the
/// quantile is piecewise linear in `u`; particles give a step quantile. Each
/// piece stores both `u` and `1 - u` at its left end so the upper tail keeps
/// full relative precision.
#[derive(Debug, Clone)]
pub enum Quantile {
    Gaussian { mean: f64, sd: f64 },
    Pieces {
        lower_u: Vec<f64>,
        upper_tail: Vec<f64>,
        x_lo: Vec<f64>,
        x_hi: Vec<f64>,
    },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid normal")
}

/// `Phi^{-1}` evaluated from `u` below one half and from `1 - u` above it.
pub(crate) fn probit(u: f64, tail: f64) -> f64 {
    let nd = std_normal();
    if u <= 0.5 {
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else {
            nd.inverse_cdf(u)
        }
    } else if tail <= 0.0 {
        f64::INFINITY
    } else {
        -nd.inverse_cdf(tail)
    }
}

impl Quantile {
    pub fn from_measure(m: &Measure) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::Unsupported("quantile backend is one-dimensional".into()));
        }
        match m.repr() {
            Representation::Gaussian(g) => Ok(Quantile::Gaussian {
                mean: g.mean[0],
                sd: g.covariance[(0, 0)].sqrt(),
            }),
            Representation::Grid(g) => {
                let h = g.grid.spacing(0);
                let items: Vec<(f64, f64, f64)> = (0..g.grid.len())
                    .filter(|&k| g.weights[k] > 0.0)
                    .map(|k| {
                        let x = g.grid.point(k)[0];
                        (x - 0.5 * h, x + 0.5 * h, g.weights[k])
                    })
                    .collect();
                Ok(Self::pieces(items))
            }
            Representation::Particles(p) => {
                let mut items: Vec<(f64, f64, f64)> = p
                    .points
                    .iter()
                    .zip(&p.weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(x, w)| (x[0], x[0], *w))
                    .collect();
                items.sort_by(|a, b| a.0.total_cmp(&b.0));
                Ok(Self::pieces(items))
            }
            Representation::Product { .. } => Self::from_measure(&m.materialize()?),
        }
    }

    fn pieces(items: Vec<(f64, f64, f64)>) -> Self {
        let total: f64 = items.iter().map(|i| i.2).sum();
        let k = items.len();
        let mut lower_u = vec![0.0; k + 1];
        let mut upper_tail = vec![0.0; k + 1];
        for j in 0..k {
            lower_u[j + 1] = lower_u[j] + items[j].2 / total;
        }
        for j in (0..k).rev() {
            upper_tail[j] = upper_tail[j + 1] + items[j].2 / total;
        }
        lower_u[k] = 1.0;
        upper_tail[0] = 1.0;
        Quantile::Pieces {
            lower_u,
            upper_tail,
            x_lo: items.iter().map(|i| i.0).collect(),
            x_hi: items.iter().map(|i| i.1).collect(),
        }
    }

    /// Break points of the quantile in the Gaussian scale `z = Phi^{-1}(u)`.
    fn z_breaks(&self) -> Vec<f64> {
        match self {
            Quantile::Gaussian { .. } => Vec::new(),
            Quantile::Pieces {
                lower_u,
                upper_tail,
                ..
            } => (1..lower_u.len() - 1)
                .map(|j| probit(lower_u[j], upper_tail[j]))
                .filter(|z| z.is_finite())
                .collect(),
        }
    }

    /// Quantile at `z` where `u = Phi(z)`, `tail = 1 - u`; `hint` caches the piece.
    pub(crate) fn at(&self, z: f64, u: f64, tail: f64, hint: &mut usize) -> f64 {
        match self {
            Quantile::Gaussian { mean, sd } => mean + sd * z,
            Quantile::Pieces {
                lower_u,
                upper_tail,
                x_lo,
                x_hi,
            } => {
                let k = x_lo.len();
                let upper = u > 0.5;
                let inside = |j: usize| {
                    if upper {
                        upper_tail[j + 1] <= tail && tail <= upper_tail[j]
                    } else {
                        lower_u[j] <= u && u <= lower_u[j + 1]
                    }
                };
                if *hint >= k || !inside(*hint) {
                    *hint = if upper {
                        upper_tail.partition_point(|t| *t > tail).saturating_sub(1)
                    } else {
                        lower_u.partition_point(|v| *v < u).saturating_sub(1)
                    }
                    .min(k - 1);
                }
                let j = *hint;
                let frac = if upper {
                    let span = upper_tail[j] - upper_tail[j + 1];
                    if span > 0.0 {
                        (upper_tail[j] - tail) / span
                    } else {
                        0.5
                    }
                } else {
                    let span = lower_u[j + 1] - lower_u[j];
                    if span > 0.0 {
                        (u - lower_u[j]) / span
                    } else {
                        0.5
                    }
                };
                x_lo[j] + (x_hi[j] - x_lo[j]) * frac.clamp(0.0, 1.0)
            }
        }
    }
}

const Z_MAX: f64 = 38.0;
const MAX_PIECE: f64 = 0.25;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (8 points).
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `int_0^1 (Q_a(u) - Q_b(u))^2 du`, integrated in the Gaussian scale
/// `u = Phi(z)` piece by piece between the merged break points.
pub fn quantile_w2_squared(a: &Quantile, b: &Quantile) -> f64 {
    let nd = std_normal();
    let mut breaks: Vec<f64> = a.z_breaks();
    breaks.extend(b.z_breaks());
    breaks.retain(|z| z.abs() < Z_MAX);
    breaks.push(-Z_MAX);
    breaks.push(Z_MAX);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (mut ha, mut hb) = (0usize, 0usize);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let pieces = ((hi - lo) / MAX_PIECE).ceil().max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        for p in 0..pieces {
            let c = lo + (p as f64 + 0.5) * step;
            let r = 0.5 * step;
            for &(node, weight) in &GL8 {
                for z in [c - r * node, c + r * node] {
                    let u = nd.cdf(z);
                    let tail = nd.cdf(-z);
                    let d = a.at(z, u, tail, &mut ha) - b.at(z, u, tail, &mut hb);
                    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                    total += weight * r * d * d * phi;
                }
            }
        }
    }
    total
}
