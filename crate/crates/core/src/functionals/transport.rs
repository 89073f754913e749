use nalgebra::{DMatrix, DVector};

use super::entropy::{gaussian_entropy_dx, grid_entropy_dx};
use super::sinkhorn::{self, Discrete, SinkhornConfig};
use super::wasserstein::{gaussian_w2_squared, probit, quantile_w2_squared, to_discrete, Quantile};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{gaussian_auto_grid, GridDensity, Measure, Representation, SUPPORT_FRACTION};

/// Grid size used when a 1D Gaussian source has to be discretized.
pub const SOURCE_GRID_POINTS: usize = 4097;

#[derive(Debug, Clone)]
pub enum PlanKind {
    /// `x -> A x + b` with `A` symmetric positive definite.
    Affine { a: DMatrix<f64>, b: DVector<f64> },
    /// Monotone rearrangement sampled at the source grid nodes.
    Monotone1D {
        nodes: Vec<f64>,
        weights: Vec<f64>,
        map: Vec<f64>,
        /// `T'(x) = rho_source(x) / rho_target(T(x))`; `NaN` on negligible cells
        /// where the target density underflows.
        derivative: Vec<f64>,
    },
    /// Entropic coupling between two discrete measures (row-major `pi`).
    DiscreteCoupling {
        source: Discrete,
        target: Discrete,
        pi: Vec<f64>,
    },
}

/// Optimal transport plan `grad phi` from `source` to `target`.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub source: Measure,
    pub target: Measure,
    pub kind: PlanKind,
    /// Estimate of `W_2^2(source, target)`.
    pub cost: f64,
    /// `Ent_dx` of the source as represented by the plan.
    pub source_entropy: f64,
}

impl TransportPlan {
    /// `grad phi(x)`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            PlanKind::Affine { a, b } => {
                Ok((a * DVector::from_column_slice(x) + b).iter().copied().collect())
            }
            PlanKind::Monotone1D { nodes, map, .. } => {
                let t = x[0];
                let k = nodes.partition_point(|v| *v < t).clamp(1, nodes.len() - 1);
                let (x0, x1) = (nodes[k - 1], nodes[k]);
                let f = ((t - x0) / (x1 - x0)).clamp(0.0, 1.0);
                Ok(vec![map[k - 1] + f * (map[k] - map[k - 1])])
            }
            PlanKind::DiscreteCoupling { .. } => Err(Error::Unsupported(
                "a discrete coupling defines no pointwise map".into(),
            )),
        }
    }

    /// Spectrum of `Hess phi` paired with quadrature weights of the source.
    pub fn hessian_spectrum(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        match &self.kind {
            PlanKind::Affine { a, .. } => {
                Ok(vec![(linalg::sym_eigen(a).eigenvalues.iter().copied().collect(), 1.0)])
            }
            PlanKind::Monotone1D {
                weights,
                derivative,
                ..
            } => Ok(weights
                .iter()
                .zip(derivative)
                .filter(|(_, d)| d.is_finite())
                .map(|(w, d)| (vec![*d], *w))
                .collect()),
            PlanKind::DiscreteCoupling { .. } => Err(Error::Unsupported(
                "Hessian of a discrete coupling is undefined".into(),
            )),
        }
    }

    /// `int Delta phi dsource`
    pub fn laplacian_integral(&self) -> Result<f64> {
        Ok(self
            .hessian_spectrum()?
            .iter()
            .map(|(ev, w)| w * ev.iter().sum::<f64>())
            .sum())
    }

    /// Checks the structural invariants of the plan kind.
    pub fn check(&self) -> Result<()> {
        match &self.kind {
            PlanKind::Affine { a, .. } => {
                linalg::check_spd(a)?;
            }
            PlanKind::Monotone1D { map, .. } => {
                if map.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidPlan("map is not nondecreasing".into()));
                }
            }
            PlanKind::DiscreteCoupling { source, target, pi } => {
                let nb = target.weights.len();
                for (i, a) in source.weights.iter().enumerate() {
                    let r: f64 = pi[i * nb..(i + 1) * nb].iter().sum();
                    if (r - a).abs() > 1e-8 {
                        return Err(Error::InvalidPlan(format!("row marginal {i} off by {}", r - a)));
                    }
                }
                for (j, b) in target.weights.iter().enumerate() {
                    let c: f64 = (0..source.weights.len()).map(|i| pi[i * nb + j]).sum();
                    if (c - b).abs() > 1e-8 {
                        return Err(Error::InvalidPlan(format!("column marginal {j} off by {}", c - b)));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Brenier map between two measures: affine for Gaussian pairs, monotone
/// rearrangement in one dimension, entropic coupling for small discrete pairs.
pub fn brenier_transport(source: &Measure, target: &Measure) -> Result<TransportPlan> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    let s = source.materialize()?;
    let t = target.materialize()?;
    if let (Some(a), Some(b)) = (s.as_gaussian(), t.as_gaussian()) {
        let r = linalg::sym_sqrt(&a.covariance);
        let ri = linalg::sym_inv(&r)?;
        let mid = linalg::sym_sqrt(&(&r * &b.covariance * &r));
        let m = &ri * mid * &ri;
        let m = (&m + m.transpose()) * 0.5;
        let shift = &b.mean - &m * &a.mean;
        return Ok(TransportPlan {
            source: s.clone(),
            target: t.clone(),
            kind: PlanKind::Affine { a: m, b: shift },
            cost: gaussian_w2_squared(a, b),
            source_entropy: gaussian_entropy_dx(a),
        });
    }
    let particles = |m: &Measure| matches!(m.repr(), Representation::Particles(_));
    if s.dim() == 1 && !particles(&s) && !particles(&t) {
        return monotone_1d(&s, &t);
    }
    let (x, y) = (to_discrete(&s)?, to_discrete(&t)?);
    let sol = sinkhorn::entropic_plan(&x, &y, &SinkhornConfig::default())?;
    let cost = sol.primal_cost();
    Ok(TransportPlan {
        source: s,
        target: t,
        kind: PlanKind::DiscreteCoupling {
            source: x,
            target: y,
            pi: sol.coupling(),
        },
        cost,
        source_entropy: f64::NAN,
    })
}

fn target_density(t: &Measure, y: f64) -> f64 {
    match t.repr() {
        Representation::Gaussian(g) => g.log_density(&[y]).exp(),
        Representation::Grid(g) => {
            let h = g.grid.spacing(0);
            let lo = g.grid.lower()[0];
            let pos = (y - lo) / h;
            let last = g.grid.len() - 1;
            if pos <= 0.0 {
                g.weights[0] / h
            } else if pos >= last as f64 {
                g.weights[last] / h
            } else {
                let k = (pos.floor() as usize).min(last - 1);
                let f = pos - k as f64;
                ((1.0 - f) * g.weights[k] + f * g.weights[k + 1]) / h
            }
        }
        _ => f64::NAN,
    }
}

fn monotone_1d(source: &Measure, target: &Measure) -> Result<TransportPlan> {
    let src: GridDensity = match source.repr() {
        Representation::Grid(g) => g.clone(),
        Representation::Gaussian(g) => {
            let grid = gaussian_auto_grid(g, SOURCE_GRID_POINTS)?;
            source.discretize(&grid)?.as_grid().unwrap().clone()
        }
        _ => return Err(Error::Unsupported("monotone map source".into())),
    };
    let q = Quantile::from_measure(target)?;
    let h = src.grid.spacing(0);
    let nodes = src.grid.axis_nodes(0);
    let k = nodes.len();
    let mut below = vec![0.0; k];
    let mut above = vec![0.0; k];
    for i in 1..k {
        below[i] = below[i - 1] + src.weights[i - 1];
    }
    for i in (0..k - 1).rev() {
        above[i] = above[i + 1] + src.weights[i + 1];
    }
    let floor = SUPPORT_FRACTION * src.max_weight();
    let mut map = Vec::with_capacity(k);
    let mut derivative = Vec::with_capacity(k);
    let mut hint = 0usize;
    for i in 0..k {
        let u = below[i] + 0.5 * src.weights[i];
        let tail = above[i] + 0.5 * src.weights[i];
        let z = probit(u, tail).clamp(-38.0, 38.0);
        let t = q.at(z, u, tail, &mut hint);
        let rho_t = target_density(target, t);
        let d = (src.weights[i] / h) / rho_t;
        if src.weights[i] <= floor {
            derivative.push(f64::NAN);
        } else if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidPlan(format!(
                "target density vanishes at T({}) = {t}",
                nodes[i]
            )));
        } else {
            derivative.push(d);
        }
        map.push(t);
    }
    let source_measure = Measure::from_grid_weights(src.grid.clone(), src.weights.clone())?;
    let cost = quantile_w2_squared(&Quantile::from_measure(&source_measure)?, &q);
    Ok(TransportPlan {
        source: source_measure,
        target: target.clone(),
        kind: PlanKind::Monotone1D {
            nodes,
            weights: src.weights.clone(),
            map,
            derivative,
        },
        cost,
        source_entropy: grid_entropy_dx(&src),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_from_potential, isotropic_gaussian, standard_gaussian, GridSpec, Potential};
    use std::sync::Arc;

    #[test]
    fn gaussian_maps() {
        let g = standard_gaussian(1);
        let plan = brenier_transport(&g, &g).unwrap();
        assert!(plan.cost.abs() < 1e-14);
        assert!((plan.apply(&[0.7]).unwrap()[0] - 0.7).abs() < 1e-14);
        let shifted = isotropic_gaussian(&[1.5], 1.0).unwrap();
        let plan = brenier_transport(&g, &shifted).unwrap();
        assert!((plan.apply(&[0.2]).unwrap()[0] - 1.7).abs() < 1e-12);
        assert!((plan.cost - 2.25).abs() < 1e-12);
        let wide = isotropic_gaussian(&[0.0], 4.0).unwrap();
        let plan = brenier_transport(&g, &wide).unwrap();
        assert!((plan.laplacian_integral().unwrap() - 2.0).abs() < 1e-12);
        plan.check().unwrap();
    }

    #[test]
    fn monotone_map_recovers_dilation() {
        let p = Arc::new(Potential::standard_gaussian(1));
        let src = build_from_potential(p, GridSpec::uniform_1d(-12.0, 12.0, 4801).unwrap()).unwrap();
        let wide = isotropic_gaussian(&[0.0], 4.0).unwrap();
        let plan = brenier_transport(&src, &wide).unwrap();
        plan.check().unwrap();
        for x in [-1.0, 0.3, 2.0] {
            assert!((plan.apply(&[x]).unwrap()[0] - 2.0 * x).abs() < 1e-4);
        }
        assert!((plan.laplacian_integral().unwrap() - 2.0).abs() < 1e-4);
        assert!((plan.cost - 1.0).abs() < 1e-4);
    }

    #[test]
    fn quartic_target() {
        let g = standard_gaussian(1);
        let quartic = Arc::new(Potential::quartic(1));
        let t = build_from_potential(quartic, GridSpec::uniform_1d(-4.0, 4.0, 3201).unwrap()).unwrap();
        let plan = brenier_transport(&g, &t).unwrap();
        plan.check().unwrap();
        if let PlanKind::Monotone1D { nodes, weights, map, .. } = &plan.kind {
            let c: f64 = nodes.iter().zip(map).zip(weights).map(|((x, y), w)| w * (x - y).powi(2)).sum();
            assert!((c - plan.cost).abs() < 1e-4 * (1.0 + plan.cost));
        } else {
            panic!("expected monotone plan");
        }
    }
}
