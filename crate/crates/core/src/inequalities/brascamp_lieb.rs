use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::evaluation::{named, Accuracy, InequalityEvaluation};
use crate::error::{Error, Result};
use crate::functionals::{for_each_node, numerical_gradient};
use crate::linalg;
use crate::measures::{Measure, ScalarFn, VectorFn};

/// Test function `f` with an optional analytic gradient.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    value: ScalarFn,
    gradient: Option<VectorFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, value: ScalarFn, gradient: Option<VectorFn>) -> Self {
        Self {
            name: name.into(),
            value,
            gradient,
        }
    }

    /// `x -> a . x`
    pub fn linear(a: Vec<f64>) -> Self {
        let g = a.clone();
        Self::new(
            "linear",
            Arc::new(move |x: &[f64]| linalg::dot(&a, x)),
            Some(Arc::new(move |_: &[f64]| g.clone())),
        )
    }

    /// `x -> |x|^2`
    pub fn squared_norm() -> Self {
        Self::new(
            "squared_norm",
            Arc::new(|x: &[f64]| linalg::norm2(x)),
            Some(Arc::new(|x: &[f64]| x.iter().map(|v| 2.0 * v).collect())),
        )
    }

    /// Probabilists' Hermite polynomial `He_k` of the first coordinate.
    pub fn hermite(k: usize) -> Self {
        let eval = move |t: f64| -> (f64, f64) {
            // He_{j+1} = t He_j - j He_{j-1};  He_k' = k He_{k-1}
            let (mut prev, mut cur) = (0.0, 1.0);
            for j in 0..k {
                let next = t * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            (cur, k as f64 * prev)
        };
        Self::new(
            format!("hermite{k}"),
            Arc::new(move |x: &[f64]| eval(x[0]).0),
            Some(Arc::new(move |x: &[f64]| {
                let mut g = vec![0.0; x.len()];
                g[0] = eval(x[0]).1;
                g
            })),
        )
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(x),
            None => numerical_gradient(&*self.value, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlVariant {
    Classical,
    TransportI,
    BblII,
    GaussianDim,
    GaussianSpectral,
    Harge,
    BobkovLedoux,
}

impl BlVariant {
    pub const ALL: [BlVariant; 7] = [
        BlVariant::Classical,
        BlVariant::TransportI,
        BlVariant::BblII,
        BlVariant::GaussianDim,
        BlVariant::GaussianSpectral,
        BlVariant::Harge,
        BlVariant::BobkovLedoux,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlVariant::Classical => "classical",
            BlVariant::TransportI => "transport_I",
            BlVariant::BblII => "bbl_II",
            BlVariant::GaussianDim => "gaussian_dim",
            BlVariant::GaussianSpectral => "gaussian_spectral",
            BlVariant::Harge => "harge",
            BlVariant::BobkovLedoux => "bobkov_ledoux",
        }
    }

    pub fn id(self) -> String {
        format!("bl.{}", self.name())
    }

    fn gaussian_only(self) -> bool {
        matches!(
            self,
            BlVariant::GaussianDim | BlVariant::GaussianSpectral | BlVariant::BobkovLedoux
        )
    }
}

impl fmt::Display for BlVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown Brascamp-Lieb variant {s:?}")))
    }
}

struct Node {
    x: Vec<f64>,
    w: f64,
    f: f64,
    grad: Vec<f64>,
}

fn weighted(nodes: &[Node], g: impl Fn(&Node) -> f64) -> f64 {
    nodes.iter().map(|k| k.w * g(k)).sum()
}

/// `Var_mu(f) <= rhs` for the selected Brascamp-Lieb type bound; the
/// correction subtracted from the energy term is recorded as `correction`.
pub fn evaluate_brascamp_lieb(
    f: &TestFunction,
    mu: &Measure,
    variant: BlVariant,
) -> Result<InequalityEvaluation> {
    let n = mu.dim();
    let nf = n as f64;
    if variant.gaussian_only() && !mu.is_standard_gaussian() {
        return Err(Error::Precondition(format!(
            "{variant} needs the standard Gaussian reference"
        )));
    }
    let mut nodes = Vec::new();
    for_each_node(mu, |x, w| {
        nodes.push(Node {
            x: x.to_vec(),
            w,
            f: f.value(x),
            grad: f.gradient(x),
        })
    })?;
    let mass: f64 = nodes.iter().map(|k| k.w).sum();
    for k in nodes.iter_mut() {
        k.w /= mass;
    }
    let mean = weighted(&nodes, |k| k.f);
    let var = weighted(&nodes, |k| (k.f - mean).powi(2));
    let energy = weighted(&nodes, |k| linalg::norm2(&k.grad));
    let mut im = named([("variance", var), ("mean", mean)]);

    let rhs = match variant {
        BlVariant::GaussianDim => {
            let m = weighted(&nodes, |k| (linalg::norm2(&k.x) - nf) * k.f);
            let corr = m * m / (2.0 * nf);
            im.insert("energy".into(), energy);
            im.insert("correction".into(), corr);
            energy - corr
        }
        BlVariant::GaussianSpectral => {
            let mut gm = vec![0.0; n];
            for k in &nodes {
                for (a, g) in gm.iter_mut().zip(&k.grad) {
                    *a += k.w * g;
                }
            }
            let sq = linalg::norm2(&gm);
            im.insert("energy".into(), energy);
            im.insert("mean_gradient_sq".into(), sq);
            0.5 * energy + 0.5 * sq
        }
        BlVariant::BobkovLedoux => {
            let t = weighted(&nodes, |k| {
                linalg::dot(&k.grad, &k.x).powi(2) / (nf + linalg::norm2(&k.x))
            });
            im.insert("energy".into(), energy);
            im.insert("correction".into(), 6.0 * t);
            6.0 * energy - 6.0 * t
        }
        _ => {
            let pot = mu
                .potential()
                .ok_or_else(|| Error::Precondition("reference measure has no potential".into()))?;
            let mut classical = 0.0;
            let mut hinv_grad_v = Vec::with_capacity(nodes.len());
            for k in &nodes {
                let e = pot.eval(&k.x)?;
                let hf = linalg::spd_solve(&e.hessian, &k.grad).map_err(|_| {
                    Error::Precondition(format!("Hess V not positive definite at {:?}", k.x))
                })?;
                classical += k.w * linalg::dot(&k.grad, &hf);
                let hv = linalg::spd_solve(&e.hessian, &e.gradient)?;
                hinv_grad_v.push((e.value, e.gradient, hv));
            }
            im.insert("classical_rhs".into(), classical);
            let v_mean: f64 = nodes.iter().zip(&hinv_grad_v).map(|(k, h)| k.w * h.0).sum();
            let cov: f64 = nodes
                .iter()
                .zip(&hinv_grad_v)
                .map(|(k, h)| k.w * (h.0 - v_mean) * (k.f - mean))
                .sum();
            let corr = match variant {
                BlVariant::Classical => 0.0,
                BlVariant::TransportI => {
                    let var_v: f64 = nodes
                        .iter()
                        .zip(&hinv_grad_v)
                        .map(|(k, h)| k.w * (h.0 - v_mean).powi(2))
                        .sum();
                    im.insert("variance_V".into(), var_v);
                    im.insert("covariance_Vf".into(), cov);
                    if var_v >= nf {
                        return Err(Error::PotentialVarianceTooLarge { variance: var_v, n });
                    }
                    cov * cov / (nf - var_v)
                }
                BlVariant::Harge => {
                    let r = pot.convexity_lower.unwrap_or(0.0).max(0.0);
                    let ratio = match pot.convexity_upper {
                        Some(s) if s > 0.0 && s.is_finite() => {
                            if r > s {
                                return Err(Error::Precondition(format!(
                                    "declared R = {r} exceeds S = {s}"
                                )));
                            }
                            r / s
                        }
                        _ => 0.0,
                    };
                    im.insert("covariance_Vf".into(), cov);
                    im.insert("R_over_S".into(), ratio);
                    (1.0 + ratio) / nf * cov * cov
                }
                BlVariant::BblII => {
                    im.insert("centering_shift".into(), -mean);
                    let mut x_mean = 0.0;
                    let mut y_mean = 0.0;
                    let mut corr = 0.0;
                    for (k, (_, gv, hv)) in nodes.iter().zip(&hinv_grad_v) {
                        let x = linalg::dot(&k.grad, hv);
                        let y = linalg::dot(gv, hv);
                        x_mean += k.w * x;
                        y_mean += k.w * y;
                        corr += k.w * (k.f - mean - x).powi(2) / (nf + y);
                    }
                    im.insert("X_mean".into(), x_mean);
                    im.insert("Y_mean".into(), y_mean);
                    corr
                }
                _ => unreachable!("Gaussian variants handled above"),
            };
            im.insert("correction".into(), corr);
            classical - corr
        }
    };
    Ok(InequalityEvaluation::new(
        variant.id(),
        var,
        rhs,
        im,
        Accuracy::of(&[mu]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_from_potential, standard_gaussian, GridSpec, Potential};

    #[test]
    fn gaussian_extremals() {
        for n in [1, 3] {
            let g = standard_gaussian(n);
            let mut a = vec![0.5; n];
            a[0] = -1.2;
            let e = evaluate_brascamp_lieb(&TestFunction::linear(a), &g, BlVariant::GaussianSpectral)
                .unwrap();
            assert!(e.slack.abs() < 1e-10, "{e:?}");
            let e = evaluate_brascamp_lieb(&TestFunction::squared_norm(), &g, BlVariant::GaussianDim)
                .unwrap();
            assert!((e.lhs - 2.0 * n as f64).abs() < 1e-10 && e.slack.abs() < 1e-10);
        }
    }

    #[test]
    fn all_variants_hold_on_hermite() {
        let g = standard_gaussian(1);
        for k in 1..=5 {
            for v in BlVariant::ALL {
                let e = evaluate_brascamp_lieb(&TestFunction::hermite(k), &g, v).unwrap();
                assert!(e.verdict, "H{k} {v}: {e:?}");
            }
        }
    }

    #[test]
    fn bbl_ii_extremal_on_quartic() {
        let q = std::sync::Arc::new(Potential::gaussian_plus_power(1, 4.0).unwrap());
        let mu = build_from_potential(q.clone(), GridSpec::uniform_1d(-5.0, 5.0, 8001).unwrap())
            .unwrap();
        let qq = q.clone();
        let f = TestFunction::new(
            "a_plus_grad_v",
            Arc::new(move |x: &[f64]| 0.7 + qq.gradient(x)[0]),
            None,
        );
        let e = evaluate_brascamp_lieb(&f, &mu, BlVariant::BblII).unwrap();
        assert!(e.slack.abs() < 1e-5, "{e:?}");
        assert!((e.intermediate("centering_shift").unwrap() + 0.7).abs() < 1e-6);
    }
}
