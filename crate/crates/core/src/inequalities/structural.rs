use std::sync::Arc;

use nalgebra::DMatrix;

use super::evaluation::{named, Accuracy, InequalityEvaluation};
use crate::error::{Error, Result};
use crate::functionals::{brenier_transport, entropy_dx, legendre_transform, GeodesicProfile};
use crate::linalg;
use crate::measures::{Measure, Potential, PotentialKind};
use crate::quadrature::TanRule;

/// Tan-rule nodes per axis for the convexity functional.
const TAN_NODES_1D: usize = 4001;
const TAN_NODES_2D: usize = 241;
/// Nodes where `g^{n+1}` exceeds this contribute nothing measurable and are skipped.
const NEGLIGIBLE_DENOMINATOR: f64 = 1e250;
/// Absolute tolerance for the sign of the convexity functional.
pub const CONVEXITY_TOLERANCE: f64 = 1e-5;
/// Minimum number of `s` nodes for the geodesic convexity check.
pub const MIN_GEODESIC_NODES: usize = 33;

/// `int W^*(grad g) / g^{n+1} dx` after rescaling `g` and `W` to
/// `int g^{-n} = int W^{-n} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityFunctional {
    pub value: f64,
    /// Factors `c` with `c g` and `c W` normalized.
    pub g_scale: f64,
    pub w_scale: f64,
    /// Quadrature nodes skipped because `g` was not finite or overflowed.
    pub skipped_nodes: usize,
}

impl ConvexityFunctional {
    pub fn to_evaluation(&self) -> InequalityEvaluation {
        let im = named([
            ("g_scale", self.g_scale),
            ("w_scale", self.w_scale),
            ("skipped_nodes", self.skipped_nodes as f64),
        ]);
        InequalityEvaluation::new("convexity_functional", 0.0, self.value, im, Accuracy::Analytic)
            .with_tolerance(CONVEXITY_TOLERANCE)
    }
}

/// Tensor tan-rule nodes `(x, weight)` in one or two dimensions.
fn tan_nodes(n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match n {
        1 => {
            let t = TanRule::new(TAN_NODES_1D, 1.0);
            Ok(t.nodes.into_iter().zip(t.weights).map(|(x, w)| (vec![x], w)).collect())
        }
        2 => {
            let t = TanRule::new(TAN_NODES_2D, 1.0);
            let mut out = Vec::with_capacity(TAN_NODES_2D * TAN_NODES_2D);
            for (a, wa) in t.nodes.iter().zip(&t.weights) {
                for (b, wb) in t.nodes.iter().zip(&t.weights) {
                    out.push((vec![*a, *b], wa * wb));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!(
            "convexity functional quadrature in dimension {n}"
        ))),
    }
}

/// `c` with `int (c f)^{-n} dx = 1`.
fn normalizing_scale(f: &Potential, nodes: &[(Vec<f64>, f64)], n: usize) -> Result<f64> {
    let total: f64 = nodes
        .iter()
        .map(|(x, w)| w * f.value(x).powi(-(n as i32)))
        .filter(|v| v.is_finite())
        .sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(total.powf(1.0 / n as f64))
}

/// `(c W)^*(y)`, in closed form for potentials with a known conjugate.
fn scaled_conjugate(w: &Potential, c: f64, scaled: &Potential, y: &[f64]) -> Result<f64> {
    // (c W)^*(y) = c W^*(y / c) and W^* = base^* - offset
    let closed = matches!(w.kind(), PotentialKind::Gaussian { .. } | PotentialKind::Power { .. });
    if closed {
        let z: Vec<f64> = y.iter().map(|v| v / c).collect();
        if let Some(b) = w.base_conjugate(&z) {
            return Ok(c * (b - w.offset()));
        }
    }
    legendre_transform(scaled, y)
}

/// Sign check of `int W^*(grad g) / g^{n+1} dx >= 0`; the value vanishes when
/// `g = W` is convex. `g` and `W` are positive functions given by `value`.
pub fn check_convexity_functional(g: &Potential, w: &Potential, n: usize) -> Result<ConvexityFunctional> {
    for d in [g.dim(), w.dim()] {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, got: d });
        }
    }
    let nodes = tan_nodes(n)?;
    let cg = normalizing_scale(g, &nodes, n)?;
    let cw = normalizing_scale(w, &nodes, n)?;
    let inner = Arc::new(w.clone());
    let (i1, i2, i3) = (inner.clone(), inner.clone(), inner);
    let scaled = Potential::custom(
        format!("{}*{cw}", w.name),
        n,
        Arc::new(move |x: &[f64]| cw * i1.value(x)),
        Some(Arc::new(move |x: &[f64]| i2.gradient(x).into_iter().map(|v| cw * v).collect())),
        Some(Arc::new(move |x: &[f64]| -> DMatrix<f64> { i3.hessian(x) * cw })),
    );
    let mut value = 0.0;
    let mut skipped = 0;
    for (x, weight) in &nodes {
        let gv = cg * g.value(x);
        let denom = gv.powi(n as i32 + 1);
        if !(gv > 0.0) || !denom.is_finite() || denom > NEGLIGIBLE_DENOMINATOR {
            skipped += 1;
            continue;
        }
        let grad: Vec<f64> = g.gradient(x).into_iter().map(|v| cg * v).collect();
        if grad.iter().any(|v| !v.is_finite()) {
            skipped += 1;
            continue;
        }
        let conj = scaled_conjugate(w, cw, &scaled, &grad)?;
        value += weight * conj / denom;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("convexity functional".into()));
    }
    Ok(ConvexityFunctional {
        value,
        g_scale: cg,
        w_scale: cw,
        skipped_nodes: skipped,
    })
}

/// `n exp((Ent_dx(m1) - Ent_dx(m2))/n) <= int Delta phi dm1` for the Brenier
/// map `grad phi` from `m1` to `m2`.
pub fn check_trace_bound(m1: &Measure, m2: &Measure) -> Result<InequalityEvaluation> {
    let plan = brenier_transport(m1, m2)?;
    let n = m1.dim() as f64;
    let e1 = plan.source_entropy;
    let e2 = entropy_dx(&plan.target)?;
    let lhs = n * ((e1 - e2) / n).exp();
    let rhs = plan.laplacian_integral()?;
    let im = named([("entropy_source", e1), ("entropy_target", e2)]);
    Ok(InequalityEvaluation::new(
        "trace_bound",
        lhs,
        rhs,
        im,
        Accuracy::of(&[&plan.source, &plan.target]),
    ))
}

/// Worst-case slacks of the three equivalent forms of the convexity of
/// `s -> exp(-psi(s)/n)` along a displacement geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicConvexityReport {
    pub nodes: usize,
    /// `min psi'' - psi'^2 / n` over interior nodes.
    pub derivative_slack: f64,
    /// `min n - psi'(r)(s - r) - n e^{(psi(r) - psi(s))/n}` over ordered pairs `r != s`.
    pub tangent_slack: f64,
    /// `min (psi'(s) - psi'(r))(s - r) - 4n sinh^2((psi(s) - psi(r))/(2n))` over pairs.
    pub chord_slack: f64,
    /// Derivative form with central differences of `psi` in place of `psi', psi''`.
    pub finite_difference_slack: f64,
    pub accuracy: Accuracy,
}

impl GeodesicConvexityReport {
    pub fn to_evaluations(&self) -> Vec<InequalityEvaluation> {
        [
            ("geodesic.derivative", self.derivative_slack),
            ("geodesic.tangent", self.tangent_slack),
            ("geodesic.chord", self.chord_slack),
        ]
        .into_iter()
        .map(|(id, slack)| {
            let im = named([
                ("nodes", self.nodes as f64),
                ("finite_difference_slack", self.finite_difference_slack),
            ]);
            InequalityEvaluation::new(id, 0.0, slack, im, self.accuracy)
        })
        .collect()
    }
}

pub fn check_geodesic_convexity(profile: &GeodesicProfile) -> Result<GeodesicConvexityReport> {
    let k = profile.s_grid.len();
    if k < MIN_GEODESIC_NODES {
        return Err(Error::Precondition(format!(
            "geodesic profile has {k} nodes, at least {MIN_GEODESIC_NODES} required"
        )));
    }
    let n = profile.dim as f64;
    let (s, psi, d1, d2) = (&profile.s_grid, &profile.psi, &profile.dpsi, &profile.d2psi);
    let derivative_slack = (1..k - 1)
        .map(|i| d2[i] - d1[i] * d1[i] / n)
        .fold(f64::INFINITY, f64::min);
    let mut tangent_slack = f64::INFINITY;
    let mut chord_slack = f64::INFINITY;
    for r in 0..k {
        for t in 0..k {
            if r == t {
                continue;
            }
            let ds = s[t] - s[r];
            let tangent = -n * ((psi[r] - psi[t]) / n).exp_m1() - d1[r] * ds;
            tangent_slack = tangent_slack.min(tangent);
            if t > r {
                let sh = ((psi[t] - psi[r]) / (2.0 * n)).sinh();
                chord_slack = chord_slack.min((d1[t] - d1[r]) * ds - 4.0 * n * sh * sh);
            }
        }
    }
    let finite_difference_slack = profile
        .finite_differences()
        .into_iter()
        .map(|(_, a, b)| b - a * a / n)
        .fold(f64::INFINITY, f64::min);
    Ok(GeodesicConvexityReport {
        nodes: k,
        derivative_slack,
        tangent_slack,
        chord_slack,
        finite_difference_slack,
        accuracy: Accuracy::of(&[&profile.plan.source, &profile.plan.target]),
    })
}

/// `x -> c (1 + |x|^2)` with analytic derivatives; with `c = 1/pi` in 1D,
/// `int f^{-1} dx = 1`.
pub fn cauchy_profile(n: usize, c: f64) -> Potential {
    Potential::custom(
        "cauchy_profile",
        n,
        Arc::new(move |x: &[f64]| c * (1.0 + linalg::norm2(x))),
        Some(Arc::new(move |x: &[f64]| x.iter().map(|v| 2.0 * c * v).collect())),
        Some(Arc::new(move |x: &[f64]| DMatrix::identity(x.len(), x.len()) * (2.0 * c))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::geodesic_profile;
    use crate::measures::{isotropic_gaussian, standard_gaussian};

    #[test]
    fn cauchy_equality_case() {
        let w = cauchy_profile(1, std::f64::consts::PI);
        let r = check_convexity_functional(&w, &w, 1).unwrap();
        assert!(r.value.abs() < 1e-8, "{r:?}");
        assert!((r.g_scale - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dilations_are_equality_cases() {
        let w = cauchy_profile(1, 1.0);
        let g = cauchy_profile(1, 1.0);
        let g = Potential::custom(
            "dilated",
            1,
            Arc::new(move |x: &[f64]| g.value(&[0.5 * x[0]])),
            Some(Arc::new(|x: &[f64]| vec![0.5 * x[0]])),
            None,
        );
        let r = check_convexity_functional(&g, &w, 1).unwrap();
        assert!(r.value.abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn quartic_profile_is_positive() {
        let w = cauchy_profile(1, 1.0);
        let g = Potential::custom(
            "quartic_profile",
            1,
            Arc::new(|x: &[f64]| 1.0 + x[0].powi(4)),
            Some(Arc::new(|x: &[f64]| vec![4.0 * x[0].powi(3)])),
            None,
        );
        let r = check_convexity_functional(&g, &w, 1).unwrap();
        assert!(r.value > 1e-3, "{r:?}");
    }

    #[test]
    fn trace_bound_on_gaussians() {
        let g = standard_gaussian(1);
        let e = check_trace_bound(&g, &g).unwrap();
        assert!((e.lhs - 1.0).abs() < 1e-12 && (e.rhs - 1.0).abs() < 1e-12);
        let wide = isotropic_gaussian(&[0.0], 4.0).unwrap();
        let e = check_trace_bound(&g, &wide).unwrap();
        assert!((e.lhs - 2.0).abs() < 1e-12 && e.slack.abs() < 1e-12);
    }

    #[test]
    fn geodesic_dilation_equality() {
        let g = standard_gaussian(1);
        let wide = isotropic_gaussian(&[0.0], 4.0).unwrap();
        let prof = geodesic_profile(&g, &wide, 33).unwrap();
        let rep = check_geodesic_convexity(&prof).unwrap();
        assert!(rep.derivative_slack.abs() < 1e-12);
        assert!(rep.tangent_slack >= -1e-12 && rep.chord_slack >= -1e-12);
        assert!(matches!(
            check_geodesic_convexity(&geodesic_profile(&g, &wide, 9).unwrap()),
            Err(Error::Precondition(_))
        ));
    }
}
