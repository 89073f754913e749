use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Shape of the unnormalized part of a potential.
#[derive(Clone)]
pub enum PotentialKind {
    /// `(x-m)^T P (x-m) / 2`
    Gaussian {
        mean: DVector<f64>,
        precision: DMatrix<f64>,
        covariance: DMatrix<f64>,
    },
    /// `coef * |x|^power`
    Power { coef: f64, power: f64 },
    /// `|x|^2 / 2 + |x|^power`
    GaussianPlusPower { power: f64 },
    /// 1D natural cubic spline through tabulated values on a uniform grid.
    Tabulated(Spline),
    /// Sum of `copies` independent copies of a factor potential.
    Tensor { factor: Arc<Potential>, copies: usize },
    Custom {
        value: ScalarFn,
        gradient: Option<VectorFn>,
        hessian: Option<MatrixFn>,
    },
}

/// A potential `V` with `mu = e^{-V} dx`, plus its declared structural constants.
///
/// `value(x) = base(x) + offset`; the offset is the normalization `beta` making
/// `e^{-V}` a probability density when it is known. Homogeneity, when declared,
/// refers to `base`.
#[derive(Clone)]
pub struct Potential {
    pub name: String,
    dim: usize,
    kind: PotentialKind,
    offset: f64,
    /// Declared lower bound `R` on the Hessian spectrum.
    pub convexity_lower: Option<f64>,
    /// Declared upper bound `S` on the Hessian spectrum.
    pub convexity_upper: Option<f64>,
    /// Declared homogeneity degree `q > 1` of `base`.
    pub homogeneity: Option<f64>,
    /// Declared doubling condition `V(x+y) <= C(1+V(x)+V(y))`; recorded, never checked.
    pub doubling: bool,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("offset", &self.offset)
            .field("convexity_lower", &self.convexity_lower)
            .field("convexity_upper", &self.convexity_upper)
            .field("homogeneity", &self.homogeneity)
            .finish()
    }
}

/// Value, gradient and Hessian of a potential at one point.
#[derive(Debug, Clone)]
pub struct PotentialEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

fn fd_step(x: &[f64], power: f64) -> f64 {
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    f64::EPSILON.powf(power) * scale
}

fn norm(x: &[f64]) -> f64 {
    linalg::norm2(x).sqrt()
}

/// `log int_{R^n} exp(-coef |x|^p) dx`
fn log_power_mass(n: usize, coef: f64, p: f64) -> f64 {
    let nf = n as f64;
    0.5 * nf * std::f64::consts::PI.ln() + ln_gamma(nf / p + 1.0)
        - ln_gamma(nf / 2.0 + 1.0)
        - (nf / p) * coef.ln()
}

impl Potential {
    /// Gaussian potential of `N(mean, covariance)`, normalized.
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.nrows(),
            });
        }
        let ev = linalg::check_spd(&covariance)?;
        let precision = linalg::sym_inv(&covariance)?;
        let log_det: f64 = ev.iter().map(|v| v.ln()).sum();
        let offset = 0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        let centered = mean.iter().all(|m| *m == 0.0);
        Ok(Self {
            name: "gaussian".into(),
            dim: n,
            convexity_lower: Some(1.0 / ev.max()),
            convexity_upper: Some(1.0 / ev.min()),
            homogeneity: centered.then_some(2.0),
            kind: PotentialKind::Gaussian {
                mean,
                precision,
                covariance,
            },
            offset,
            doubling: true,
        })
    }

    pub fn standard_gaussian(n: usize) -> Self {
        Self::gaussian(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity is SPD")
    }

    /// `coef |x|^power + beta`, normalized; `power > 1`.
    pub fn power(n: usize, coef: f64, power: f64) -> Result<Self> {
        if !(power > 1.0) || !(coef > 0.0) {
            return Err(Error::Domain(format!(
                "power potential needs power > 1 and coef > 0 (got {power}, {coef})"
            )));
        }
        let (lower, upper) = if (power - 2.0).abs() < 1e-15 {
            (Some(2.0 * coef), Some(2.0 * coef))
        } else {
            (Some(0.0), None)
        };
        Ok(Self {
            name: format!("power{power}"),
            dim: n,
            kind: PotentialKind::Power { coef, power },
            offset: log_power_mass(n, coef, power),
            convexity_lower: lower,
            convexity_upper: upper,
            homogeneity: Some(power),
            doubling: true,
        })
    }

    /// `x^4 + beta` in one dimension (`|x|^4` in general).
    pub fn quartic(n: usize) -> Self {
        let mut p = Self::power(n, 1.0, 4.0).expect("valid quartic");
        p.name = "quartic".into();
        p
    }

    /// `|x|^2/2 + |x|^p + Z_p`, with `Hess V >= Id` for `p >= 2`.
    pub fn gaussian_plus_power(n: usize, power: f64) -> Result<Self> {
        if !(power >= 2.0) {
            return Err(Error::Domain(format!(
                "gaussian_plus_power needs p >= 2 (got {power})"
            )));
        }
        let mut p = Self {
            name: format!("gaussian_plus_power{power}"),
            dim: n,
            kind: PotentialKind::GaussianPlusPower { power },
            offset: 0.0,
            convexity_lower: Some(1.0),
            convexity_upper: (power == 2.0).then_some(3.0),
            homogeneity: None,
            doubling: true,
        };
        p.offset = p.radial_log_mass()?;
        Ok(p)
    }

    /// 1D tabulated potential on `[lower, upper]`, normalized by quadrature of the spline.
    pub fn tabulated(lower: f64, upper: f64, values: Vec<f64>) -> Result<Self> {
        let spline = Spline::new(lower, upper, values)?;
        let mut p = Self {
            name: "tabulated".into(),
            dim: 1,
            kind: PotentialKind::Tabulated(spline),
            offset: 0.0,
            convexity_lower: None,
            convexity_upper: None,
            homogeneity: None,
            doubling: false,
        };
        if let PotentialKind::Tabulated(s) = &p.kind {
            p.offset = s.log_mass();
        }
        Ok(p)
    }

    /// Arbitrary potential; missing derivatives fall back to central differences.
    /// The offset is zero until [`Potential::with_offset`] is applied.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        value: ScalarFn,
        gradient: Option<VectorFn>,
        hessian: Option<MatrixFn>,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            kind: PotentialKind::Custom {
                value,
                gradient,
                hessian,
            },
            offset: 0.0,
            convexity_lower: None,
            convexity_upper: None,
            homogeneity: None,
            doubling: false,
        }
    }

    /// `sum_k V(x_k)` over `copies` blocks of the factor dimension.
    pub fn tensor(factor: Arc<Potential>, copies: usize) -> Self {
        Self {
            name: format!("{}^{copies}", factor.name),
            dim: factor.dim * copies,
            offset: factor.offset * copies as f64,
            convexity_lower: factor.convexity_lower,
            convexity_upper: factor.convexity_upper,
            homogeneity: factor.homogeneity,
            doubling: factor.doubling,
            kind: PotentialKind::Tensor { factor, copies },
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_convexity(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.convexity_lower = lower;
        self.convexity_upper = upper;
        self
    }

    pub fn with_homogeneity(mut self, q: Option<f64>) -> Self {
        self.homogeneity = q;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// Normalization constant `beta` added to `base`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_standard_gaussian(&self) -> bool {
        match &self.kind {
            PotentialKind::Gaussian {
                mean, covariance, ..
            } => mean.amax() == 0.0 && linalg::is_identity(covariance, 1e-14),
            PotentialKind::Tensor { factor, .. } => factor.is_standard_gaussian(),
            _ => false,
        }
    }

    /// Unnormalized part of `V`.
    pub fn base_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian {
                mean, precision, ..
            } => {
                let d = DVector::from_column_slice(x) - mean;
                0.5 * d.dot(&(precision * &d))
            }
            PotentialKind::Power { coef, power } => coef * norm(x).powf(*power),
            PotentialKind::GaussianPlusPower { power } => {
                let r = norm(x);
                0.5 * r * r + r.powf(*power)
            }
            PotentialKind::Tabulated(s) => s.value(x[0]),
            PotentialKind::Tensor { factor, copies } => {
                let k = factor.dim;
                (0..*copies)
                    .map(|c| factor.base_value(&x[c * k..(c + 1) * k]))
                    .sum()
            }
            PotentialKind::Custom { value, .. } => value(x),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.base_value(x) + self.offset
    }

    fn analytic_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            PotentialKind::Gaussian {
                mean, precision, ..
            } => {
                let d = DVector::from_column_slice(x) - mean;
                Some((precision * d).iter().copied().collect())
            }
            PotentialKind::Power { coef, power } => {
                let r = norm(x);
                if r == 0.0 {
                    return Some(vec![0.0; x.len()]);
                }
                let s = coef * power * r.powf(power - 2.0);
                Some(x.iter().map(|v| s * v).collect())
            }
            PotentialKind::GaussianPlusPower { power } => {
                let r = norm(x);
                let s = if r == 0.0 {
                    1.0
                } else {
                    1.0 + power * r.powf(power - 2.0)
                };
                Some(x.iter().map(|v| s * v).collect())
            }
            PotentialKind::Tabulated(s) => Some(vec![s.derivative(x[0])]),
            PotentialKind::Tensor { factor, copies } => {
                let k = factor.dim;
                let mut g = Vec::with_capacity(x.len());
                for c in 0..*copies {
                    g.extend(factor.gradient(&x[c * k..(c + 1) * k]));
                }
                Some(g)
            }
            PotentialKind::Custom { gradient, .. } => gradient.as_ref().map(|g| g(x)),
        }
    }

    fn analytic_hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let n = x.len();
        match &self.kind {
            PotentialKind::Gaussian { precision, .. } => Some(precision.clone()),
            PotentialKind::Power { coef, power } => {
                let r = norm(x);
                if r == 0.0 {
                    let d = if (*power - 2.0).abs() < 1e-15 {
                        2.0 * coef
                    } else if *power > 2.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    return Some(DMatrix::from_diagonal_element(n, n, d));
                }
                let a = coef * power * r.powf(power - 2.0);
                let b = coef * power * (power - 2.0) * r.powf(power - 4.0);
                let xv = DVector::from_column_slice(x);
                Some(DMatrix::from_diagonal_element(n, n, a) + &xv * xv.transpose() * b)
            }
            PotentialKind::GaussianPlusPower { power } => {
                let r = norm(x);
                let mut h = DMatrix::identity(n, n);
                if r > 0.0 {
                    let a = power * r.powf(power - 2.0);
                    let b = power * (power - 2.0) * r.powf(power - 4.0);
                    let xv = DVector::from_column_slice(x);
                    h += DMatrix::from_diagonal_element(n, n, a) + &xv * xv.transpose() * b;
                } else if (*power - 2.0).abs() < 1e-15 {
                    h *= 3.0;
                }
                Some(h)
            }
            PotentialKind::Tabulated(s) => Some(DMatrix::from_element(1, 1, s.second(x[0]))),
            PotentialKind::Tensor { factor, copies } => {
                let k = factor.dim;
                let mut h = DMatrix::zeros(n, n);
                for c in 0..*copies {
                    let b = factor.hessian(&x[c * k..(c + 1) * k]);
                    h.view_mut((c * k, c * k), (k, k)).copy_from(&b);
                }
                Some(h)
            }
            PotentialKind::Custom { hessian, .. } => hessian.as_ref().map(|h| h(x)),
        }
    }

    /// Central-difference gradient of `value` with step `cbrt(eps) (1 + |x|)`.
    pub fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = fd_step(x, 1.0 / 3.0);
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|i| {
                xp[i] = x[i] + h;
                let fp = self.base_value(&xp);
                xp[i] = x[i] - h;
                let fm = self.base_value(&xp);
                xp[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.analytic_gradient(x)
            .unwrap_or_else(|| self.fd_gradient(x))
    }

    /// Hessian; falls back to differences of the gradient (or of the value when
    /// no analytic gradient exists, with step `eps^{1/4} (1 + |x|)`).
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(h) = self.analytic_hessian(x) {
            return h;
        }
        let n = x.len();
        let mut out = DMatrix::zeros(n, n);
        if self.analytic_gradient(x).is_some() {
            let h = fd_step(x, 1.0 / 3.0);
            let mut xp = x.to_vec();
            for j in 0..n {
                xp[j] = x[j] + h;
                let gp = self.gradient(&xp);
                xp[j] = x[j] - h;
                let gm = self.gradient(&xp);
                xp[j] = x[j];
                for i in 0..n {
                    out[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
        } else {
            let h = fd_step(x, 0.25);
            let f0 = self.base_value(x);
            let mut xp = x.to_vec();
            for i in 0..n {
                for j in 0..=i {
                    let v = if i == j {
                        xp[i] = x[i] + h;
                        let fp = self.base_value(&xp);
                        xp[i] = x[i] - h;
                        let fm = self.base_value(&xp);
                        xp[i] = x[i];
                        (fp - 2.0 * f0 + fm) / (h * h)
                    } else {
                        let mut q = |si: f64, sj: f64| {
                            xp[i] = x[i] + si * h;
                            xp[j] = x[j] + sj * h;
                            let v = self.base_value(&xp);
                            xp[i] = x[i];
                            xp[j] = x[j];
                            v
                        };
                        (q(1.0, 1.0) - q(1.0, -1.0) - q(-1.0, 1.0) + q(-1.0, -1.0)) / (4.0 * h * h)
                    };
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
        }
        out
    }

    /// Value, gradient and Hessian at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<PotentialEval> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let value = self.value(x);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{}({x:?})", self.name)));
        }
        let gradient = self.gradient(x);
        let hessian = self.hessian(x);
        if gradient.iter().any(|g| !g.is_finite()) || hessian.iter().any(|h| !h.is_finite()) {
            return Err(Error::NonFinite(format!("derivatives of {} at {x:?}", self.name)));
        }
        Ok(PotentialEval {
            value,
            gradient,
            hessian,
        })
    }

    /// Closed-form convex conjugate of `base`, when one is known.
    pub fn base_conjugate(&self, y: &[f64]) -> Option<f64> {
        match &self.kind {
            PotentialKind::Gaussian {
                mean, covariance, ..
            } => {
                let yv = DVector::from_column_slice(y);
                Some(mean.dot(&yv) + 0.5 * yv.dot(&(covariance * &yv)))
            }
            PotentialKind::Power { coef, power } => {
                // sup_x <x,y> - c|x|^q = (q-1)/q * |y| * (|y|/(c q))^{1/(q-1)}
                let r = norm(y);
                let q = *power;
                Some((q - 1.0) / q * r * (r / (coef * q)).powf(1.0 / (q - 1.0)))
            }
            PotentialKind::Tensor { factor, copies } => {
                let k = factor.dim;
                (0..*copies)
                    .map(|c| factor.base_conjugate(&y[c * k..(c + 1) * k]))
                    .sum()
            }
            _ => None,
        }
    }

    /// `log int exp(-base)` for radial potentials by 1D quadrature in `r`.
    fn radial_log_mass(&self) -> Result<f64> {
        let n = self.dim as f64;
        // log |S^{n-1}| = log 2 + (n/2) log pi - lgamma(n/2)
        let log_sphere =
            std::f64::consts::LN_2 + 0.5 * n * std::f64::consts::PI.ln() - ln_gamma(n / 2.0);
        let count = 200_000;
        let r_max = 40.0;
        let dr = r_max / count as f64;
        let mut e1 = vec![0.0; self.dim];
        let mut acc = 0.0;
        for k in 0..count {
            let r = (k as f64 + 0.5) * dr;
            e1[0] = r;
            acc += r.powf(n - 1.0) * (-self.base_value(&e1)).exp() * dr;
        }
        if !(acc > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(log_sphere + acc.ln())
    }

    /// Checks declared structure at sample points: Hessian lower/upper bounds,
    /// homogeneity of `base`, and analytic gradient against central differences.
    pub fn check_invariants(&self, samples: &[Vec<f64>], tol: f64) -> Result<()> {
        for x in samples {
            let h = self.hessian(x);
            let ev = linalg::sym_eigen(&h).eigenvalues;
            if let Some(r) = self.convexity_lower {
                if ev.min() < r - tol {
                    return Err(Error::Precondition(format!(
                        "Hessian eigenvalue {} below declared R = {r} at {x:?}",
                        ev.min()
                    )));
                }
            }
            if let Some(s) = self.convexity_upper {
                if ev.max() > s + tol {
                    return Err(Error::Precondition(format!(
                        "Hessian eigenvalue {} above declared S = {s} at {x:?}",
                        ev.max()
                    )));
                }
            }
            if let Some(q) = self.homogeneity {
                for lambda in [0.5, 2.0, 3.0] {
                    let xs: Vec<f64> = x.iter().map(|v| lambda * v).collect();
                    let lhs = self.base_value(&xs);
                    let rhs = lambda.powf(q) * self.base_value(x);
                    if (lhs - rhs).abs() > tol * (1.0 + rhs.abs()) {
                        return Err(Error::Precondition(format!(
                            "base not {q}-homogeneous at {x:?}: {lhs} vs {rhs}"
                        )));
                    }
                }
            }
            if let Some(g) = self.analytic_gradient(x) {
                let fd = self.fd_gradient(x);
                let scale = 1.0 + self.base_value(x).abs();
                for (a, b) in g.iter().zip(&fd) {
                    if (a - b).abs() > 1e-5 * scale.max(a.abs()) {
                        return Err(Error::Precondition(format!(
                            "gradient mismatch at {x:?}: analytic {a} vs fd {b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Natural cubic spline on a uniform grid; constant extrapolation of slope
/// beyond the table ends.
#[derive(Debug, Clone)]
pub struct Spline {
    lower: f64,
    step: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl Spline {
    pub fn new(lower: f64, upper: f64, values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 3 || !(upper > lower) {
            return Err(Error::InvalidGrid(
                "tabulated potential needs >= 3 values on a nondegenerate interval".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated values".into()));
        }
        let step = (upper - lower) / (m - 1) as f64;
        // tridiagonal system for second derivatives, natural end conditions
        let mut second = vec![0.0; m];
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for i in 1..m - 1 {
            let rhs = 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (step * step);
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
        for i in (1..m - 1).rev() {
            second[i] = d[i] - c[i] * second[i + 1];
        }
        Ok(Self {
            lower,
            step,
            values,
            second,
        })
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let m = self.values.len();
        let t = ((x - self.lower) / self.step).clamp(0.0, (m - 1) as f64);
        let i = (t.floor() as usize).min(m - 2);
        (i, t - i as f64)
    }

    fn upper(&self) -> f64 {
        self.lower + self.step * (self.values.len() - 1) as f64
    }

    pub fn value(&self, x: f64) -> f64 {
        if x < self.lower {
            return self.values[0] + self.derivative(self.lower) * (x - self.lower);
        }
        let up = self.upper();
        if x > up {
            return self.values[self.values.len() - 1] + self.derivative(up) * (x - up);
        }
        let (i, t) = self.locate(x);
        let h = self.step;
        let (a, b) = (1.0 - t, t);
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let xc = x.clamp(self.lower, self.upper());
        let (i, t) = self.locate(xc);
        let h = self.step;
        let (a, b) = (1.0 - t, t);
        (self.values[i + 1] - self.values[i]) / h
            + (-(3.0 * a * a - 1.0) * self.second[i] + (3.0 * b * b - 1.0) * self.second[i + 1])
                * h
                / 6.0
    }

    pub fn second(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper() {
            return 0.0;
        }
        let (i, t) = self.locate(x);
        (1.0 - t) * self.second[i] + t * self.second[i + 1]
    }

    /// `log int exp(-s)` over the table range, by fine midpoint quadrature.
    fn log_mass(&self) -> f64 {
        let count = 20 * self.values.len();
        let dx = (self.upper() - self.lower) / count as f64;
        let vmin = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let s: f64 = (0..count)
            .map(|k| (-(self.value(self.lower + (k as f64 + 0.5) * dx) - vmin)).exp() * dx)
            .sum();
        s.ln() - vmin
    }
}
