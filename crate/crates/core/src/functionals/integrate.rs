use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{GaussianRepr, Measure, PotentialKind, Representation};
use crate::quadrature::{for_each_multi_index, GaussHermite};

/// Total Gauss-Hermite node budget for Gaussian expectations.
pub const HERMITE_BUDGET: usize = 200_000;
/// Upper bound on Gauss-Hermite nodes per axis.
pub const HERMITE_MAX_PER_AXIS: usize = 60;
/// Minimal fraction (by weight) of finite integrand values on particle clouds.
pub const FINITE_FRACTION: f64 = 0.999;

/// Visits the quadrature nodes `(x, w)` of `mu`; weights sum to one.
///
/// Products are materialized first, so only Gaussian factors and small grid
/// products are accepted.
pub fn for_each_node(mu: &Measure, mut visit: impl FnMut(&[f64], f64)) -> Result<()> {
    match mu.repr() {
        Representation::Gaussian(g) => {
            gaussian_nodes(g, &mut visit)?;
        }
        Representation::Grid(g) => {
            for (k, &w) in g.weights.iter().enumerate() {
                if w > 0.0 {
                    visit(&g.grid.point(k), w);
                }
            }
        }
        Representation::Particles(p) => {
            for (x, &w) in p.points.iter().zip(&p.weights) {
                visit(x, w);
            }
        }
        Representation::Product { .. } => {
            let full = mu.materialize()?;
            for_each_node(&full, visit)?;
        }
    }
    Ok(())
}

fn gaussian_nodes(g: &GaussianRepr, visit: &mut impl FnMut(&[f64], f64)) -> Result<()> {
    let n = g.mean.len();
    let m = GaussHermite::nodes_per_axis(n, HERMITE_BUDGET, HERMITE_MAX_PER_AXIS);
    let gh = GaussHermite::new(m);
    let l = linalg::cholesky_lower(&g.covariance)?;
    let mut z = vec![0.0; n];
    let mut x = vec![0.0; n];
    for_each_multi_index(n, m, |idx| {
        let mut w = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            z[a] = gh.nodes[i];
            w *= gh.weights[i];
        }
        for (r, xr) in x.iter_mut().enumerate() {
            *xr = g.mean[r] + (0..=r).map(|c| l[(r, c)] * z[c]).sum::<f64>();
        }
        visit(&x, w);
    });
    Ok(())
}

/// `int f dmu`. Non-finite values on grid nodes with positive weight are
/// errors; particle clouds tolerate up to 0.1% non-finite mass, which is dropped.
pub fn expectation(f: &dyn Fn(&[f64]) -> f64, mu: &Measure) -> Result<f64> {
    let particles = matches!(mu.repr(), Representation::Particles(_));
    let mut sum = 0.0;
    let mut finite_mass = 0.0;
    let mut bad = false;
    for_each_node(mu, |x, w| {
        let v = f(x);
        if v.is_finite() {
            sum += w * v;
            finite_mass += w;
        } else {
            bad = true;
        }
    })?;
    if bad && (!particles || finite_mass < FINITE_FRACTION) {
        return Err(Error::NonFinite(format!(
            "integrand (finite mass fraction {finite_mass})"
        )));
    }
    Ok(sum / finite_mass)
}

/// Componentwise `int F dmu` for a vector-valued `F` with `len` components.
pub fn expectation_vec(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    len: usize,
    mu: &Measure,
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; len];
    let mut bad = false;
    for_each_node(mu, |x, w| {
        for (s, v) in sum.iter_mut().zip(f(x)) {
            if v.is_finite() {
                *s += w * v;
            } else {
                bad = true;
            }
        }
    })?;
    if bad {
        return Err(Error::NonFinite("vector integrand".into()));
    }
    Ok(sum)
}

/// `(Var_mu(f), mu(f))`, computed with a shifted two-pass sum.
pub fn variance(f: &dyn Fn(&[f64]) -> f64, mu: &Measure) -> Result<(f64, f64)> {
    let mean = expectation(f, mu)?;
    let var = expectation(&|x| (f(x) - mean).powi(2), mu)?;
    Ok((var.max(0.0), mean))
}

/// `int V dnu` for the potential generating `mu`, closed form when both are Gaussian.
pub fn potential_expectation(mu: &Measure, nu: &Measure) -> Result<f64> {
    let p = mu
        .potential()
        .ok_or_else(|| Error::Precondition("reference measure has no potential".into()))?;
    if let (
        Representation::Product { factor, copies },
        Representation::Product { factor: mf, copies: mc },
    ) = (nu.repr(), mu.repr())
    {
        if copies == mc && mf.potential().is_some() {
            return Ok(*copies as f64 * potential_expectation(mf, factor)?);
        }
    }
    if let PotentialKind::Gaussian { mean, precision, .. } = p.kind() {
        if let Ok(full) = nu.materialize() {
            if let Some(g) = full.as_gaussian() {
                let d = &g.mean - mean;
                return Ok(0.5 * ((precision * &g.covariance).trace() + d.dot(&(precision * &d)))
                    + p.offset());
            }
        }
    }
    expectation(&|x| p.value(x), nu)
}

/// Central-difference gradient of a scalar function.
pub fn numerical_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = f64::EPSILON.cbrt() * scale;
    let mut y = x.to_vec();
    (0..x.len())
        .map(|a| {
            y[a] = x[a] + h;
            let fp = f(&y);
            y[a] = x[a] - h;
            let fm = f(&y);
            y[a] = x[a];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
