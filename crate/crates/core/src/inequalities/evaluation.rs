use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measures::{Measure, Representation};

/// Absolute tolerance for evaluations built only from closed forms and
/// Gauss-Hermite quadrature.
pub const ANALYTIC_TOLERANCE: f64 = 1e-8;
/// Floor of the tolerance once a grid quadrature is involved.
pub const GRID_TOLERANCE_FLOOR: f64 = 1e-6;
/// Relative tolerance for Monte Carlo ingredients.
pub const SAMPLED_TOLERANCE: f64 = 1e-3;

/// Accuracy class of the numerical ingredients of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accuracy {
    Analytic,
    /// Grid quadrature with the given (largest) spacing.
    Grid(f64),
    Sampled,
}

impl Accuracy {
    /// Coarsest accuracy among the representations of `measures`.
    pub fn of(measures: &[&Measure]) -> Self {
        measures
            .iter()
            .map(|m| Self::of_measure(m))
            .fold(Accuracy::Analytic, Accuracy::combine)
    }

    fn of_measure(m: &Measure) -> Self {
        match m.repr() {
            Representation::Gaussian(_) => Accuracy::Analytic,
            Representation::Grid(g) => Accuracy::Grid(g.grid.max_spacing()),
            Representation::Particles(_) => Accuracy::Sampled,
            Representation::Product { factor, .. } => Self::of_measure(factor),
        }
    }

    pub fn combine(self, other: Self) -> Self {
        use Accuracy::*;
        match (self, other) {
            (Sampled, _) | (_, Sampled) => Sampled,
            (Grid(a), Grid(b)) => Grid(a.max(b)),
            (Grid(h), Analytic) | (Analytic, Grid(h)) => Grid(h),
            (Analytic, Analytic) => Analytic,
        }
    }

    /// Default tolerance for an evaluation with the given sides.
    pub fn tolerance(self, lhs: f64, rhs: f64) -> f64 {
        let scale = lhs.abs() + rhs.abs() + 1.0;
        match self {
            Accuracy::Analytic => ANALYTIC_TOLERANCE,
            Accuracy::Grid(h) => GRID_TOLERANCE_FLOOR.max(10.0 * h * h * scale),
            Accuracy::Sampled => SAMPLED_TOLERANCE * scale,
        }
    }
}

/// One inequality instance in the orientation `lhs <= rhs`.
#[derive(Debug, Clone)]
pub struct InequalityEvaluation {
    pub inequality_id: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub intermediates: BTreeMap<String, f64>,
    pub verdict: bool,
    pub tolerance_used: f64,
    pub accuracy: Accuracy,
}

impl InequalityEvaluation {
    pub fn new(
        id: impl Into<String>,
        lhs: f64,
        rhs: f64,
        intermediates: BTreeMap<String, f64>,
        accuracy: Accuracy,
    ) -> Self {
        let tol = accuracy.tolerance(lhs, rhs);
        let mut e = Self {
            inequality_id: id.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            intermediates,
            verdict: false,
            tolerance_used: tol,
            accuracy,
        };
        e.set_tolerance(tol);
        e
    }

    /// Replaces the tolerance and recomputes the verdict.
    pub fn set_tolerance(&mut self, tol: f64) {
        self.tolerance_used = tol;
        self.verdict = self.slack >= -tol;
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.set_tolerance(tol);
        self
    }

    pub fn intermediate(&self, key: &str) -> Option<f64> {
        self.intermediates.get(key).copied()
    }
}

/// Builds an ordered intermediate map from `(name, value)` pairs.
pub(crate) fn named<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `delta_n(x) = n (e^{-x/n} - 1 + x/n)`
pub fn deficit_delta(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    let u = -x / nf;
    (nf * (u.exp_m1() - u)).max(0.0)
}

/// `Lambda_n(x) = x - n log(1 + x/n)` for `x > -n`.
pub fn deficit_lambda(n: usize, x: f64) -> Result<f64> {
    let nf = n as f64;
    if !(x > -nf) {
        return Err(Error::Domain(format!("Lambda_{n} undefined at {x} <= -{n}")));
    }
    Ok((x - nf * (x / nf).ln_1p()).max(0.0))
}

/// Declared lower Hessian bound `R > 0` of the potential generating `mu`.
pub(crate) fn positive_curvature(mu: &Measure) -> Result<f64> {
    let r = mu
        .potential()
        .ok_or_else(|| Error::Precondition("reference measure has no potential".into()))?
        .convexity_lower
        .ok_or_else(|| Error::Precondition("no declared convexity bound R".into()))?;
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("requires R > 0, got {r}")));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deficit_values() {
        assert_eq!(deficit_delta(3, 0.0), 0.0);
        assert!((deficit_delta(1, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((deficit_delta(2, -2.0) - 2.0 * (1.0f64.exp() - 2.0)).abs() < 1e-14);
        assert_eq!(deficit_lambda(4, 0.0).unwrap(), 0.0);
        assert!((deficit_lambda(1, 1.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((deficit_lambda(2, -1.0).unwrap() - (-1.0 - 2.0 * 0.5f64.ln())).abs() < 1e-15);
        assert!(matches!(deficit_lambda(2, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn verdict_follows_slack() {
        let e = InequalityEvaluation::new("t", 1.0, 1.0 - 5e-9, BTreeMap::new(), Accuracy::Analytic);
        assert!(e.verdict);
        assert_eq!(e.slack, (1.0 - 5e-9) - 1.0);
        assert!(!e.clone().with_tolerance(0.0).verdict);
        let g = Accuracy::Grid(0.01).tolerance(1.0, 1.0);
        assert!((g - 3e-3).abs() < 1e-15);
        assert_eq!(Accuracy::Grid(1e-4).tolerance(0.0, 0.0), GRID_TOLERANCE_FLOOR);
    }
}
