//! Acceptance suite: one PASS/FAIL line per criterion.

use std::sync::Arc;
use std::time::Instant;

use dimineq::dynamics::{
    audit_contraction, audit_improved_rate, fp_solve, fundamental_entropy, max_stable_dt,
    mehler_trajectory, SolverConfig,
};
use dimineq::functionals::geodesic_profile;
use dimineq::inequalities::{
    cauchy_profile, check_convexity_functional, check_geodesic_convexity, concentration_profile,
    core_deficits, deficit_delta, evaluate_brascamp_lieb, evaluate_hwi, evaluate_lsi_dimensional,
    evaluate_talagrand_dimensional, BlVariant, LsiVariant, SetDescriptor, TestFunction,
};
use dimineq::measures::{
    build_from_potential, isotropic_gaussian, standard_gaussian, tensor_power, GridSpec, Measure,
    Potential,
};
use dimineq_cli::report::to_csv;
use dimineq_cli::runner::{run_scenario, RunOptions};
use dimineq_cli::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn shifted(n: usize, a: f64) -> Measure {
    let mut mean = vec![0.0; n];
    mean[0] = a;
    isotropic_gaussian(&mean, 1.0).unwrap()
}

fn gaussian_equality_suite() -> Outcome {
    let mut worst = 0.0f64;
    for n in [1, 2, 5] {
        let g = standard_gaussian(n);
        for a in [0.5, 1.0, 2.0] {
            let nu = shifted(n, a);
            let evals = [
                evaluate_lsi_dimensional(&nu, &g, LsiVariant::GaussianBl).map_err(err)?,
                evaluate_talagrand_dimensional(&nu, &g).map_err(err)?,
                evaluate_hwi(&nu, &g, &g, 1.0).map_err(err)?,
            ];
            for e in evals {
                worst = worst.max(e.slack.abs());
            }
        }
    }
    check(worst <= 1e-8, format!("max |slack| = {worst:.3e} (limit 1e-8)"))
}

fn brascamp_lieb_equalities() -> Outcome {
    let mut analytic = 0.0f64;
    for n in [1, 2, 5] {
        let g = standard_gaussian(n);
        let a: Vec<f64> = (0..n).map(|k| 1.0 + 0.5 * k as f64).collect();
        let lin = evaluate_brascamp_lieb(&TestFunction::linear(a), &g, BlVariant::GaussianSpectral)
            .map_err(err)?;
        let sq = evaluate_brascamp_lieb(&TestFunction::squared_norm(), &g, BlVariant::GaussianDim)
            .map_err(err)?;
        analytic = analytic.max(lin.slack.abs()).max(sq.slack.abs());
    }
    let grid = GridSpec::uniform_1d(-12.0, 12.0, 2049).map_err(err)?;
    let g1 = build_from_potential(Arc::new(Potential::standard_gaussian(1)), grid).map_err(err)?;
    let lin = evaluate_brascamp_lieb(&TestFunction::linear(vec![1.5]), &g1, BlVariant::GaussianSpectral)
        .map_err(err)?;
    let sq = evaluate_brascamp_lieb(&TestFunction::squared_norm(), &g1, BlVariant::GaussianDim)
        .map_err(err)?;
    let on_grid = lin.slack.abs().max(sq.slack.abs());
    check(
        analytic <= 1e-8 && on_grid <= 1e-4,
        format!("analytic max |slack| = {analytic:.3e} (1e-8), 1D grid max |slack| = {on_grid:.3e} (1e-4)"),
    )
}

fn hermite_reproduction() -> Outcome {
    let grid = GridSpec::uniform_1d(-12.0, 12.0, 1 << 14).map_err(err)?;
    let g = build_from_potential(Arc::new(Potential::standard_gaussian(1)), grid).map_err(err)?;
    let mut worst = f64::INFINITY;
    for k in 1..=7 {
        let f = TestFunction::hermite(k);
        let bbl = evaluate_brascamp_lieb(&f, &g, BlVariant::BblII).map_err(err)?;
        let spectral = evaluate_brascamp_lieb(&f, &g, BlVariant::GaussianSpectral).map_err(err)?;
        worst = worst.min(spectral.rhs + 1e-6 - bbl.rhs);
    }
    check(
        worst >= 0.0,
        format!("min (rhs_spectral + 1e-6 - rhs_bbl_II) over H_1..H_7 = {worst:.3e}"),
    )
}

fn deficit_floor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for n in 1..=10 {
        let nf = n as f64;
        for _ in 0..10_000 {
            let x: f64 = rng.random_range(-50.0..=50.0);
            let floor = x.abs().min(x * x / nf) / std::f64::consts::E;
            if deficit_delta(n, x) < floor {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{violations} violations in 10^5 samples"))
}

fn domination_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let quartic_grid = GridSpec::uniform_1d(-5.0, 5.0, 1001).map_err(err)?;
    let quartic = build_from_potential(
        Arc::new(Potential::gaussian_plus_power(1, 4.0).map_err(err)?),
        quartic_grid,
    )
    .map_err(err)?;
    let r_values: Vec<f64> = (1..=40).map(|k| 0.125 * k as f64).collect();
    for case in 0..100 {
        let mu = if case % 2 == 0 {
            let m: f64 = rng.random_range(-1.0..1.0);
            let v: f64 = rng.random_range(0.3..2.0);
            isotropic_gaussian(&[m], v).map_err(err)?
        } else {
            quartic.clone()
        };
        let center = mu.mean()[0];
        let (shift, variance) = if case % 2 == 0 {
            (rng.random_range(-1.0..1.0), rng.random_range(0.2..0.6))
        } else {
            (rng.random_range(-0.5..0.5), rng.random_range(0.1..0.4))
        };
        let nu = isotropic_gaussian(&[center + shift], variance).map_err(err)?;
        let ev = evaluate_talagrand_dimensional(&nu, &mu).map_err(err)?;
        let h = ev.intermediate("H").unwrap();
        if ev.rhs > h + ev.tolerance_used {
            violations += 1;
        }
        let set = if rng.random_bool(0.5) {
            SetDescriptor::Ball {
                center: vec![center + rng.random_range(-0.5..0.5)],
                radius: rng.random_range(0.2..1.5),
            }
        } else {
            SetDescriptor::HalfSpace {
                direction: vec![if rng.random_bool(0.5) { 1.0 } else { -1.0 }],
                threshold: rng.random_range(-0.5..0.5),
            }
        };
        for row in concentration_profile(&mu, &set, &r_values).map_err(err)? {
            if row.applicable && row.dimensional_bound > row.classical_bound + 1e-12 {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{violations} violations over 100 scenarios"))
}

fn mehler_vs_grid() -> Outcome {
    let started = Instant::now();
    let p = Arc::new(Potential::standard_gaussian(1));
    let grid = GridSpec::uniform_1d(-8.0, 8.0, 4097).map_err(err)?;
    let init = isotropic_gaussian(&[0.5], 1.0).map_err(err)?;
    let times: Vec<f64> = (0..41).map(|k| 0.05 * k as f64).collect();
    let dt = max_stable_dt(&p, &grid);
    let traj = fp_solve(p, &init, &times, &SolverConfig::grid_fv(grid, dt)).map_err(err)?;
    let exact = mehler_trajectory(&init, &times).map_err(err)?;
    let (mut e_h, mut e_m) = (0.0f64, 0.0f64);
    for (a, b) in traj.records.iter().zip(&exact.records) {
        e_h = e_h.max(((a.entropy - b.entropy) / b.entropy).abs());
        e_m = e_m.max(((a.second_moment - b.second_moment) / b.second_moment).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        e_h <= 0.05 && e_m <= 0.01 && secs < 60.0,
        format!("max rel err H = {e_h:.3e} (5%), second moment = {e_m:.3e} (1%), runtime {secs:.1}s (<60s)"),
    )
}

fn fundamental_solution() -> Outcome {
    let mut formula = 0.0f64;
    let mut above = 0;
    for k in 1..=200 {
        let t = 0.01 * k as f64;
        for n in [1, 2, 3] {
            let f = fundamental_entropy(n, t).map_err(err)?;
            let nf = n as f64;
            let oracle = -0.5 * nf * ((-2.0 * t).exp() + (1.0 - (-2.0 * t).exp()).ln());
            formula = formula.max((f.value - oracle).abs());
            if f.value > nf / (2.0 * t) {
                above += 1;
            }
        }
    }
    let p = Arc::new(Potential::standard_gaussian(1));
    let grid = GridSpec::uniform_1d(-8.0, 8.0, 4097).map_err(err)?;
    let init = isotropic_gaussian(&[0.0], 1e-4).map_err(err)?;
    let mut times = vec![0.0];
    times.extend((1..=40).map(|k| 0.05 * k as f64));
    let dt = max_stable_dt(&p, &grid);
    let traj = fp_solve(p, &init, &times, &SolverConfig::grid_fv(grid, dt)).map_err(err)?;
    let mut rel = 0.0f64;
    for (t, r) in traj.times.iter().zip(&traj.records).skip(1) {
        let f = fundamental_entropy(1, *t).map_err(err)?;
        rel = rel.max(((r.entropy - f.value) / f.value).abs());
    }
    check(
        formula < 1e-14 && above == 0 && rel <= 0.05,
        format!("formula err {formula:.1e}, {above} values above n/(2t), grid max rel err {rel:.3e} (5%)"),
    )
}

fn dimensional_contraction() -> Outcome {
    let times: Vec<f64> = (0..=800).map(|k| k as f64 / 400.0).collect();
    let u = mehler_trajectory(&isotropic_gaussian(&[0.0], 4.0).map_err(err)?, &times).map_err(err)?;
    let v = mehler_trajectory(&standard_gaussian(1), &times).map_err(err)?;
    let rep = audit_contraction(&u, &v, 1.0, 1).map_err(err)?;
    let dim = rep.min_slack("contraction.dimensional");
    let dom = rep.min_slack("contraction.domination");
    check(
        dim >= -1e-6 && dom >= 0.0,
        format!("min dimensional slack = {dim:.3e} (>= -1e-6), min classical - dimensional = {dom:.3e}"),
    )
}

fn improved_rate() -> Outcome {
    let times: Vec<f64> = (0..=40).map(|k| 0.05 * k as f64).collect();
    let u = mehler_trajectory(&isotropic_gaussian(&[0.0], 0.25).map_err(err)?, &times).map_err(err)?;
    let rep = audit_improved_rate(&u).map_err(err)?;
    let worst = ["improved_rate.bound", "improved_rate.domination", "improved_rate.racine"]
        .iter()
        .map(|id| rep.min_slack(id))
        .fold(f64::INFINITY, f64::min);
    check(worst >= -1e-10, format!("min slack = {worst:.3e} (>= -1e-10)"))
}

fn tensorization() -> Outcome {
    let g = standard_gaussian(1);
    let nu = isotropic_gaussian(&[0.7], 1.8).map_err(err)?;
    let one = core_deficits(&nu, &g, 1.0).map_err(err)?.delta_tal;
    let mut worst = 0.0f64;
    for copies in [2, 5, 10] {
        let big = core_deficits(
            &tensor_power(&nu, copies).map_err(err)?,
            &tensor_power(&g, copies).map_err(err)?,
            1.0,
        )
        .map_err(err)?
        .delta_tal;
        worst = worst.max((big - copies as f64 * one).abs());
    }
    check(worst <= 1e-12, format!("max |delta_Tal(N) - N delta_Tal| = {worst:.3e} (1e-12)"))
}

fn profile(name: &str, value: fn(f64) -> f64, derivative: fn(f64) -> f64) -> Potential {
    Potential::custom(
        name,
        1,
        Arc::new(move |x: &[f64]| value(x[0])),
        Some(Arc::new(move |x: &[f64]| vec![derivative(x[0])])),
        None,
    )
}

fn convexity_functional() -> Outcome {
    let beta = 0.3;
    let exp_quad = || {
        Potential::custom(
            "exp_quadratic",
            1,
            Arc::new(move |x: &[f64]| (0.5 * x[0] * x[0] + beta).exp()),
            Some(Arc::new(move |x: &[f64]| vec![x[0] * (0.5 * x[0] * x[0] + beta).exp()])),
            None,
        )
    };
    let cauchy = cauchy_profile(1, std::f64::consts::PI);
    let dilated = profile("dilated_cauchy", |x| 1.0 + 0.25 * x * x, |x| 0.5 * x);
    let quartic = profile("quartic_profile", |x| 1.0 + x.powi(4), |x| 4.0 * x.powi(3));
    let cases = [
        ("g=W=exp(x^2/2+b)", exp_quad(), exp_quad(), true),
        ("g=W=pi(1+x^2)", cauchy.clone(), cauchy.clone(), true),
        ("dilation of W", dilated, cauchy.clone(), false),
        ("exp(x^2/2) vs Cauchy", exp_quad(), cauchy, false),
        ("quartic vs Gaussian", quartic, Potential::standard_gaussian(1), false),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, g, w, equality) in cases {
        let v = check_convexity_functional(&g, &w, 1).map_err(err)?.value;
        ok &= v >= -1e-5 && (!equality || v.abs() <= 1e-5);
        lines.push(format!("{name}: {v:.3e}"));
    }
    check(ok, lines.join(", "))
}

fn geodesic_convexity() -> Outcome {
    let grid = GridSpec::uniform_1d(-10.0, 10.0, 2001).map_err(err)?;
    let on_grid = |p: Potential| build_from_potential(Arc::new(p), grid.clone()).map_err(err);
    let pairs = [
        (standard_gaussian(1), isotropic_gaussian(&[0.0], 4.0).map_err(err)?),
        (
            on_grid(Potential::standard_gaussian(1))?,
            on_grid(Potential::gaussian_plus_power(1, 4.0).map_err(err)?)?,
        ),
        (
            on_grid(Potential::quartic(1))?,
            on_grid(Potential::gaussian(
                nalgebra::DVector::from_vec(vec![1.0]),
                nalgebra::DMatrix::from_element(1, 1, 0.5),
            )
            .map_err(err)?)?,
        ),
    ];
    let mut worst = f64::INFINITY;
    for (a, b) in &pairs {
        let rep = check_geodesic_convexity(&geodesic_profile(a, b, 33).map_err(err)?).map_err(err)?;
        worst = worst.min(rep.derivative_slack).min(rep.tangent_slack).min(rep.chord_slack);
    }
    check(worst >= -1e-4, format!("min slack over 3 pairs = {worst:.3e} (>= -1e-4)"))
}

fn determinism() -> Outcome {
    let text = include_str!("../scenarios/ou_audits.json");
    let scenario = Scenario::parse(text).map_err(err)?;
    let a = to_csv(&run_scenario(&scenario, &RunOptions::default()).map_err(err)?);
    let b = to_csv(&run_scenario(&scenario, &RunOptions::default()).map_err(err)?);
    let ga = to_csv(
        &run_scenario(
            &Scenario::parse(include_str!("../scenarios/gaussian_equalities.json")).map_err(err)?,
            &RunOptions::default(),
        )
        .map_err(err)?,
    );
    let gb = to_csv(
        &run_scenario(
            &Scenario::parse(include_str!("../scenarios/gaussian_equalities.json")).map_err(err)?,
            &RunOptions::default(),
        )
        .map_err(err)?,
    );
    check(
        a == b && ga == gb,
        format!("{} + {} CSV bytes compared", a.len(), ga.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("Gaussian equality suite", gaussian_equality_suite),
        ("Brascamp-Lieb equality suite", brascamp_lieb_equalities),
        ("Hermite reproduction", hermite_reproduction),
        ("deficit-function floor", deficit_floor),
        ("domination properties", domination_properties),
        ("Mehler vs grid oracle", mehler_vs_grid),
        ("fundamental-solution entropy", fundamental_solution),
        ("dimensional contraction", dimensional_contraction),
        ("improved-rate audit", improved_rate),
        ("tensorization exactness", tensorization),
        ("convexity functional", convexity_functional),
        ("geodesic convexity", geodesic_convexity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

