use super::evaluation::{
    deficit_delta, deficit_lambda, named, positive_curvature, Accuracy, InequalityEvaluation,
};
use crate::error::Result;
use crate::functionals::{
    fisher_information, potential_expectation, relative_entropy, wasserstein2, W2Backend,
};
use crate::measures::Measure;

/// `delta_LSI = I/2 - R H` and `delta_Tal = H - R W_2^2 / 2` with their ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreDeficits {
    pub delta_lsi: f64,
    pub delta_tal: f64,
    pub entropy: f64,
    pub fisher: f64,
    pub w2_squared: f64,
}

pub fn core_deficits(nu: &Measure, mu: &Measure, r: f64) -> Result<CoreDeficits> {
    let h = relative_entropy(nu, mu)?;
    let i = fisher_information(nu, mu)?;
    let w = wasserstein2(nu, mu, W2Backend::Auto)?.squared;
    Ok(CoreDeficits {
        delta_lsi: 0.5 * i - r * h,
        delta_tal: h - 0.5 * r * w,
        entropy: h,
        fisher: i,
        w2_squared: w,
    })
}

/// `(R/2) W_2^2 <= D + n - n exp((D - H)/n)` with `D = nu(V) - mu(V)`.
///
/// Records the two deficit lower bounds, the gap to the classical bound `H`,
/// and the moment-form bound `delta_n(H)` when `D <= 0`.
pub fn evaluate_talagrand_dimensional(nu: &Measure, mu: &Measure) -> Result<InequalityEvaluation> {
    let r = positive_curvature(mu)?;
    let n = mu.dim();
    let nf = n as f64;
    let h = relative_entropy(nu, mu)?;
    let w = wasserstein2(nu, mu, W2Backend::Auto)?;
    let nu_v = potential_expectation(mu, nu)?;
    let mu_v = potential_expectation(mu, mu)?;
    let d = nu_v - mu_v;
    let exponent = (d - h) / nf;
    let lhs = 0.5 * r * w.squared;
    let rhs = d - nf * exponent.exp_m1();
    let mut im = named([
        ("H", h),
        ("W2_squared", w.squared),
        ("nu_V", nu_v),
        ("mu_V", mu_v),
        ("D", d),
        ("R", r),
        ("exponent", exponent),
        ("delta_tal", h - lhs),
        ("deficit_bound_delta", deficit_delta(n, h - d)),
        ("deficit_bound_lambda", deficit_lambda(n, d - lhs).unwrap_or(f64::NAN)),
        ("classical_gap", h - rhs),
    ]);
    if d <= 0.0 {
        im.insert("moment_bound".into(), deficit_delta(n, h));
        im.insert(
            "moment_bound_floor".into(),
            (-1.0f64).exp() * h.min(h * h / nf),
        );
    }
    Ok(InequalityEvaluation::new(
        "talagrand.dimensional",
        lhs,
        rhs,
        im,
        Accuracy::of(&[nu, mu]),
    ))
}

/// Dimensional HWI inequality between `f mu` and `g mu`:
/// `n exp((H_f - H_g + mu(gV) - mu(fV))/n) - n <= mu(gV) - mu(fV) + W sqrt(I_f) - (R/2) W^2`.
///
/// When `W > 0` the transport-refined log-Sobolev bound
/// `R delta_n(-h) + (delta_n(h) + delta_n(-h))^2 / (2 W^2)` with
/// `h = H_f + mu(V) - (f mu)(V)` is recorded next to `delta_LSI`.
pub fn evaluate_hwi(
    f_measure: &Measure,
    g_measure: &Measure,
    mu: &Measure,
    r: f64,
) -> Result<InequalityEvaluation> {
    let n = mu.dim();
    let nf = n as f64;
    let h_f = relative_entropy(f_measure, mu)?;
    let h_g = relative_entropy(g_measure, mu)?;
    let fv = potential_expectation(mu, f_measure)?;
    let gv = potential_expectation(mu, g_measure)?;
    let mu_v = potential_expectation(mu, mu)?;
    let i_f = fisher_information(f_measure, mu)?;
    let w2 = wasserstein2(f_measure, g_measure, W2Backend::Auto)?.squared;
    let w = w2.sqrt();
    let lhs = nf * ((h_f - h_g + gv - fv) / nf).exp_m1();
    let rhs = gv - fv + w * i_f.sqrt() - 0.5 * r * w2;
    let mut im = named([
        ("H_f", h_f),
        ("H_g", h_g),
        ("mu_fV", fv),
        ("mu_gV", gv),
        ("I_f", i_f),
        ("W2_squared", w2),
        ("R", r),
        ("delta_lsi", 0.5 * i_f - r * h_f),
    ]);
    if w2 > 0.0 {
        let h = h_f + mu_v - fv;
        let (dp, dm) = (deficit_delta(n, h), deficit_delta(n, -h));
        im.insert("h".into(), h);
        im.insert("combined_bound".into(), r * dm + 0.5 * (dp + dm).powi(2) / w2);
    }
    Ok(InequalityEvaluation::new(
        "hwi.dimensional",
        lhs,
        rhs,
        im,
        Accuracy::of(&[f_measure, g_measure, mu]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{isotropic_gaussian, standard_gaussian, tensor_power};

    #[test]
    fn translated_gaussians_are_extremal() {
        for n in [1, 2, 5] {
            let g = standard_gaussian(n);
            let mut a = vec![0.0; n];
            a[0] = 1.3;
            let nu = isotropic_gaussian(&a, 1.0).unwrap();
            let t = evaluate_talagrand_dimensional(&nu, &g).unwrap();
            assert!(t.slack.abs() < 1e-10, "{t:?}");
            let hwi = evaluate_hwi(&nu, &g, &g, 1.0).unwrap();
            assert!(hwi.slack.abs() < 1e-10, "{hwi:?}");
            let d = core_deficits(&nu, &g, 1.0).unwrap();
            assert!(d.delta_lsi.abs() < 1e-10 && d.delta_tal.abs() < 1e-10);
        }
    }

    #[test]
    fn dilation_deficit() {
        let g = standard_gaussian(1);
        let nu = isotropic_gaussian(&[0.0], 2.0).unwrap();
        let d = core_deficits(&nu, &g, 1.0).unwrap();
        let oracle = 0.25 - 0.5 * (1.0 - 2f64.ln());
        assert!((d.delta_lsi - oracle).abs() < 1e-14);
        let t = evaluate_talagrand_dimensional(&nu, &g).unwrap();
        assert!(t.verdict && t.intermediate("classical_gap").unwrap() >= 0.0);
    }

    #[test]
    fn tensorization_is_additive() {
        let g = standard_gaussian(1);
        let nu = isotropic_gaussian(&[0.4], 1.7).unwrap();
        let one = core_deficits(&nu, &g, 1.0).unwrap();
        for copies in [2, 5, 10] {
            let big = core_deficits(
                &tensor_power(&nu, copies).unwrap(),
                &tensor_power(&g, copies).unwrap(),
                1.0,
            )
            .unwrap();
            assert!((big.delta_tal - copies as f64 * one.delta_tal).abs() < 1e-12);
        }
    }
}
