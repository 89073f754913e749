use std::collections::BTreeMap;

use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::functionals::{expectation, wasserstein2, W2Backend};
use crate::inequalities::{Accuracy, InequalityEvaluation};
use crate::measures::Representation;

/// Largest time step accepted by the trapezoid rule of the dimensional contraction bound.
pub const MAX_CONTRACTION_STEP: f64 = 1.0 / 200.0;
/// Tolerance floor added for the trapezoid error in the dimensional contraction bound.
pub const TRAPEZOID_TOLERANCE: f64 = 1e-6;

/// Per-time evaluations of one audit plus scalar summaries.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub audit_id: String,
    /// Every evaluation carries its time as the intermediate `t`.
    pub evaluations: Vec<InequalityEvaluation>,
    pub summary: BTreeMap<String, f64>,
}

impl AuditReport {
    fn new(audit_id: &str) -> Self {
        Self {
            audit_id: audit_id.to_string(),
            evaluations: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.evaluations.iter().all(|e| e.verdict)
    }

    /// Evaluations with the given id, in time order.
    pub fn rows(&self, id: &str) -> impl Iterator<Item = &InequalityEvaluation> {
        let id = id.to_string();
        self.evaluations.iter().filter(move |e| e.inequality_id == id)
    }

    pub fn min_slack(&self, id: &str) -> f64 {
        self.rows(id).map(|e| e.slack).fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, id: &str, t: f64, lhs: f64, rhs: f64, mut im: BTreeMap<String, f64>, acc: Accuracy) {
        im.insert("t".into(), t);
        self.evaluations.push(InequalityEvaluation::new(id, lhs, rhs, im, acc));
    }
}

fn trajectory_accuracy(u: &Trajectory) -> Accuracy {
    let states: Vec<_> = u.states.iter().collect();
    Accuracy::of(&states)
}

fn grids_match(u: &Trajectory, v: &Trajectory) -> bool {
    match (u.states[0].repr(), v.states[0].repr()) {
        (Representation::Grid(a), Representation::Grid(b)) => a.grid == b.grid,
        (Representation::Grid(_), _) | (_, Representation::Grid(_)) => false,
        _ => true,
    }
}

/// Classical and dimensional contraction of `W_2` between two solutions of the
/// same Fokker-Planck equation with `Hess V >= R`.
///
/// The dimensional bound is
/// `e^{-2Rt} W_2^2(u_0, v_0) - 8n int_0^t e^{-2R(t-s)} sinh^2((Ent(v_s) - Ent(u_s)) / 2n) ds`
/// with the integral accumulated by the trapezoid rule on the shared time grid.
pub fn audit_contraction(u: &Trajectory, v: &Trajectory, r: f64, n: usize) -> Result<AuditReport> {
    if u.times != v.times {
        return Err(Error::Precondition("trajectories use different time grids".into()));
    }
    if u.dim() != v.dim() || u.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if u.dim() != n { u.dim() } else { v.dim() },
        });
    }
    if !grids_match(u, v) {
        return Err(Error::Precondition("trajectories live on different grids".into()));
    }
    if let Some(step) = u.times.windows(2).map(|w| w[1] - w[0]).reduce(f64::max) {
        if step > MAX_CONTRACTION_STEP * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "time step {step} exceeds {MAX_CONTRACTION_STEP} required by the trapezoid rule"
            )));
        }
    }
    let ents = |tr: &Trajectory, label: &str| -> Result<Vec<f64>> {
        tr.records
            .iter()
            .map(|rec| {
                if rec.entropy_dx.is_finite() {
                    Ok(rec.entropy_dx)
                } else {
                    Err(Error::MissingRecord(format!("Ent_dx along {label}")))
                }
            })
            .collect()
    };
    let (eu, ev) = (ents(u, "u")?, ents(v, "v")?);
    let acc = trajectory_accuracy(u).combine(trajectory_accuracy(v));
    let nf = n as f64;
    let w0 = wasserstein2(&u.states[0], &v.states[0], W2Backend::Auto)?.distance();
    let g = |k: usize| ((ev[k] - eu[k]) / (2.0 * nf)).sinh().powi(2);

    let mut report = AuditReport::new("contraction");
    let mut integral = 0.0;
    let mut worst_gap = f64::INFINITY;
    for (k, &t) in u.times.iter().enumerate() {
        if k > 0 {
            let step = t - u.times[k - 1];
            let decay = (-2.0 * r * step).exp();
            integral = decay * integral + 0.5 * step * (decay * g(k - 1) + g(k));
        }
        let w = wasserstein2(&u.states[k], &v.states[k], W2Backend::Auto)?.distance();
        let classical = (-r * (t - u.times[0])).exp() * w0;
        let dimensional = classical * classical - 8.0 * nf * integral;
        let im = BTreeMap::from([
            ("W2".to_string(), w),
            ("integral".to_string(), integral),
            ("ent_gap".to_string(), ev[k] - eu[k]),
        ]);
        report.push("contraction.classical", t, w, classical, im.clone(), acc);
        let mut dim_eval = InequalityEvaluation::new("contraction.dimensional", w * w, dimensional, im.clone(), acc);
        dim_eval.intermediates.insert("t".into(), t);
        let tol = dim_eval.tolerance_used + TRAPEZOID_TOLERANCE;
        report.evaluations.push(dim_eval.with_tolerance(tol));
        report.push("contraction.domination", t, dimensional, classical * classical, im, acc);
        worst_gap = worst_gap.min(classical * classical - dimensional);
    }
    report.summary.insert("W2_initial".into(), w0);
    report.summary.insert("min_domination_gap".into(), worst_gap);
    Ok(report)
}

/// Inputs of the entropy smoothing audit; absent fields skip their checks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmoothingBounds {
    pub r: Option<f64>,
    /// Declared bound on `u_t(|grad V|^2)`.
    pub m: Option<f64>,
    /// Last time included in the audit.
    pub t_max: Option<f64>,
}

/// Short-time entropy smoothing along `u`.
///
/// For the standard Gaussian potential every `t > 0` is checked against
/// `H(u_t|gamma) <= -(n/2) log(1 - e^{-2t})`, which needs `u_0(|x|^2) <= n`.
/// For any potential the report holds `c_hat = sup t e^{2H/n}` over times with
/// `H >= 1`, and the ratio `H / ((n/2) log(1/t))` for `t < 1`.
pub fn audit_entropy_smoothing(u: &Trajectory, bounds: SmoothingBounds) -> Result<AuditReport> {
    let n = u.dim();
    let nf = n as f64;
    let gaussian = u.potential.is_standard_gaussian();
    if gaussian {
        let m2 = u.states[0].second_moment();
        if m2 > nf * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "initial second moment {m2} exceeds n = {n}"
            )));
        }
    }
    let acc = trajectory_accuracy(u);
    let v = u.potential.clone();
    let mut report = AuditReport::new("entropy_smoothing");
    let mut c_hat = f64::NEG_INFINITY;
    let mut max_grad = f64::NEG_INFINITY;
    for (k, &t) in u.times.iter().enumerate() {
        if bounds.t_max.is_some_and(|tm| t > tm) {
            break;
        }
        let h = u.records[k].entropy;
        if !h.is_finite() {
            return Err(Error::MissingRecord(format!("relative entropy at t = {t}")));
        }
        let mut im = BTreeMap::from([("H".to_string(), h)]);
        if t > 0.0 && t < 1.0 {
            im.insert("short_time_ratio".into(), h / (0.5 * nf * (1.0 / t).ln()));
        }
        if h >= 1.0 && t > 0.0 {
            c_hat = c_hat.max(t * (2.0 * h / nf).exp());
        }
        if gaussian && t > 0.0 {
            let bound = -0.5 * nf * (-(-2.0 * t).exp_m1()).ln();
            report.push("smoothing.gaussian", t, h, bound, im.clone(), acc);
        }
        if let Some(m) = bounds.m {
            let g2 = expectation(
                &|x: &[f64]| v.gradient(x).iter().map(|g| g * g).sum(),
                &u.states[k],
            )?;
            max_grad = max_grad.max(g2);
            report.push("smoothing.gradient_moment", t, g2, m, im, acc);
        }
    }
    if c_hat.is_finite() {
        report.summary.insert("c_hat".into(), c_hat);
    }
    if max_grad.is_finite() {
        report.summary.insert("max_gradient_moment".into(), max_grad);
    }
    if let Some(r) = bounds.r {
        report.summary.insert("R".into(), r);
    }
    Ok(report)
}

/// Improved convergence rate of `x(t) = W_2^2(u_t, gamma) / 2n` under the
/// Ornstein-Uhlenbeck flow started with `u_0(|x|^2) <= n`:
/// `x(t) <= 1 - sqrt(1 - (2 x_0 - x_0^2) e^{-2t}) <= e^{-2t} x_0`.
pub fn audit_improved_rate(u: &Trajectory) -> Result<AuditReport> {
    if !u.potential.is_standard_gaussian() {
        return Err(Error::Precondition(
            "improved rate needs the standard Gaussian potential".into(),
        ));
    }
    let n = u.dim();
    let nf = n as f64;
    let m2 = u.states[0].second_moment();
    if m2 > nf * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "initial second moment {m2} exceeds n = {n}"
        )));
    }
    let xs: Vec<f64> = u
        .records
        .iter()
        .zip(&u.times)
        .map(|(rec, t)| {
            if rec.w2.is_finite() {
                Ok(rec.w2 * rec.w2 / (2.0 * nf))
            } else {
                Err(Error::MissingRecord(format!("W2 at t = {t}")))
            }
        })
        .collect::<Result<_>>()?;
    let x0 = xs[0];
    if x0 >= 1.0 {
        return Err(Error::Precondition(format!("x(0) = {x0} is not below 1")));
    }
    let acc = trajectory_accuracy(u);
    let t0 = u.times[0];
    let mut report = AuditReport::new("improved_rate");
    for (&t, &x) in u.times.iter().zip(&xs) {
        let decay = (-2.0 * (t - t0)).exp();
        let a = (2.0 * x0 - x0 * x0) * decay;
        let improved = a / (1.0 + (1.0 - a).sqrt());
        let classical = decay * x0;
        let im = BTreeMap::from([
            ("x".to_string(), x),
            ("improved".to_string(), improved),
            ("classical".to_string(), classical),
        ]);
        report.push("improved_rate.bound", t, x, improved, im.clone(), acc);
        report.push("improved_rate.domination", t, improved, classical, im.clone(), acc);
        let square = (1.0 - x0 * decay).powi(2);
        report.push("improved_rate.racine", t, square, 1.0 - a, im, acc);
    }
    report.summary.insert("x0".into(), x0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{fundamental_entropy, mehler_trajectory};
    use crate::measures::{isotropic_gaussian, standard_gaussian};

    fn grid(t_end: f64, per_unit: usize) -> Vec<f64> {
        let count = (t_end * per_unit as f64).round() as usize;
        (0..=count).map(|k| k as f64 / per_unit as f64).collect()
    }

    #[test]
    fn symmetric_pair_is_classical() {
        let times = grid(2.0, 200);
        let u = mehler_trajectory(&isotropic_gaussian(&[1.0], 1.0).unwrap(), &times).unwrap();
        let v = mehler_trajectory(&isotropic_gaussian(&[-1.0], 1.0).unwrap(), &times).unwrap();
        let rep = audit_contraction(&u, &v, 1.0, 1).unwrap();
        for e in rep.rows("contraction.dimensional") {
            let t = e.intermediate("t").unwrap();
            assert!((e.lhs - 4.0 * (-2.0 * t).exp()).abs() < 1e-12);
            assert!(e.slack.abs() < 1e-12);
        }
        assert!(rep.passed());
    }

    #[test]
    fn dimensional_contraction_against_oracle() {
        let times = grid(2.0, 400);
        let u = mehler_trajectory(&isotropic_gaussian(&[0.0], 4.0).unwrap(), &times).unwrap();
        let v = mehler_trajectory(&standard_gaussian(1), &times).unwrap();
        let rep = audit_contraction(&u, &v, 1.0, 1).unwrap();
        assert!(rep.passed());
        // independent oracle: W2 = |sigma_u - 1|, Ent gap = log(sigma_u) in n = 1
        let fine = 20_000;
        let sigma = |s: f64| (4.0 * (-2.0 * s).exp() + 1.0 - (-2.0 * s).exp()).sqrt();
        let t_end = 2.0;
        let h = t_end / fine as f64;
        let integral: f64 = (0..=fine)
            .map(|k| {
                let s = k as f64 * h;
                let w = if k == 0 || k == fine { 0.5 } else { 1.0 };
                w * (-2.0 * (t_end - s)).exp() * (0.5 * sigma(s).ln()).sinh().powi(2)
            })
            .sum::<f64>()
            * h;
        let last = rep.rows("contraction.dimensional").last().unwrap();
        let oracle = (-4.0f64).exp() - 8.0 * integral;
        assert!((last.rhs - oracle).abs() < 1e-6, "{} vs {oracle}", last.rhs);
        assert!(rep.min_slack("contraction.domination") > 0.0 - 1e-15);
    }

    #[test]
    fn contraction_rejects_coarse_or_mismatched_grids() {
        let u = mehler_trajectory(&standard_gaussian(1), &[0.0, 0.5]).unwrap();
        assert!(audit_contraction(&u, &u, 1.0, 1).is_err());
        let a = mehler_trajectory(&standard_gaussian(1), &grid(0.1, 200)).unwrap();
        let b = mehler_trajectory(&standard_gaussian(1), &grid(0.1, 400)).unwrap();
        assert!(audit_contraction(&a, &b, 1.0, 1).is_err());
    }

    #[test]
    fn fundamental_solution_smoothing() {
        let times: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
        let u = mehler_trajectory(&isotropic_gaussian(&[0.0], 1e-4).unwrap(), &times).unwrap();
        let rep = audit_entropy_smoothing(&u, SmoothingBounds::default()).unwrap();
        assert!(rep.passed());
        for e in rep.rows("smoothing.gaussian") {
            let t = e.intermediate("t").unwrap();
            let closed = fundamental_entropy(1, t).unwrap().value;
            assert!((e.lhs - closed).abs() < 0.05 * closed);
        }
        let small =
            mehler_trajectory(&isotropic_gaussian(&[0.0], 1e-12).unwrap(), &[1e-3, 1e-2]).unwrap();
        let rep = audit_entropy_smoothing(&small, SmoothingBounds::default()).unwrap();
        let ratios: Vec<f64> = rep
            .rows("smoothing.gaussian")
            .map(|e| e.intermediate("short_time_ratio").unwrap())
            .collect();
        // (log(1/2t) - 1) / log(1/t) up to O(t)
        for (r, t) in ratios.iter().zip([1e-3f64, 1e-2]) {
            let oracle = ((0.5 / t).ln() - 1.0) / (1.0 / t).ln();
            assert!((r - oracle).abs() < 0.01, "{r} vs {oracle}");
        }
        assert!(ratios[0] > ratios[1] && ratios[0] < 1.0);
        assert!(rep.summary["c_hat"] > 0.0);
    }

    #[test]
    fn equilibrium_smoothing_is_trivial() {
        let u = mehler_trajectory(&standard_gaussian(2), &[0.0, 0.5, 1.0]).unwrap();
        let rep = audit_entropy_smoothing(
            &u,
            SmoothingBounds {
                m: Some(2.0 + 1e-9),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.passed());
        assert!(rep.rows("smoothing.gaussian").all(|e| e.lhs.abs() < 1e-12));
    }

    #[test]
    fn improved_rate_dominates_classical() {
        let times: Vec<f64> = (0..=40).map(|k| 0.05 * k as f64).collect();
        let u = mehler_trajectory(&isotropic_gaussian(&[0.0], 0.25).unwrap(), &times).unwrap();
        let rep = audit_improved_rate(&u).unwrap();
        assert!((rep.summary["x0"] - 0.125).abs() < 1e-15);
        for e in rep.rows("improved_rate.bound") {
            let t = e.intermediate("t").unwrap();
            let s = (0.25 * (-2.0 * t).exp() + 1.0 - (-2.0 * t).exp()).sqrt();
            assert!((e.lhs - 0.5 * (s - 1.0).powi(2)).abs() < 1e-14);
            assert!(e.slack >= -1e-10);
        }
        for e in rep.rows("improved_rate.domination").skip(1) {
            assert!(e.slack > 0.0);
        }
        assert!(rep.passed());
    }

    #[test]
    fn improved_rate_refusals() {
        let off = mehler_trajectory(&isotropic_gaussian(&[0.3], 1.0).unwrap(), &[0.0, 1.0]).unwrap();
        assert!(matches!(audit_improved_rate(&off), Err(Error::Precondition(_))));
        let eq = mehler_trajectory(&standard_gaussian(1), &[0.0, 1.0]).unwrap();
        let rep = audit_improved_rate(&eq).unwrap();
        assert!(rep.evaluations.iter().all(|e| e.lhs.abs() < 1e-15 && e.rhs.abs() < 1e-15 || e.inequality_id.ends_with("racine")));
    }
}
