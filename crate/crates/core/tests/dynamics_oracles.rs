use std::sync::Arc;

use dimineq::dynamics::{
    audit_contraction, fp_solve, fundamental_entropy, langevin_simulate, max_stable_dt,
    mehler_trajectory, SolverConfig,
};
use dimineq::measures::{isotropic_gaussian, standard_gaussian, GridSpec, Potential};

fn times(t_end: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t_end * k as f64 / (count - 1) as f64).collect()
}

#[test]
fn grid_solver_tracks_mehler_and_improves_under_refinement() {
    let p = Arc::new(Potential::standard_gaussian(1));
    let init = isotropic_gaussian(&[0.5], 1.0).unwrap();
    let ts = times(1.0, 11);
    let exact = mehler_trajectory(&init, &ts).unwrap();
    let mut errors = Vec::new();
    for count in [129, 257] {
        let grid = GridSpec::uniform_1d(-8.0, 8.0, count).unwrap();
        let dt = max_stable_dt(&p, &grid);
        let traj = fp_solve(p.clone(), &init, &ts, &SolverConfig::grid_fv(grid, dt)).unwrap();
        let err = traj
            .records
            .iter()
            .zip(&exact.records)
            .map(|(a, b)| ((a.entropy - b.entropy) / b.entropy).abs())
            .fold(0.0, f64::max);
        for (a, b) in traj.records.iter().zip(&exact.records) {
            assert!((a.second_moment - b.second_moment).abs() < 0.01 * b.second_moment);
        }
        errors.push(err);
    }
    assert!(errors[1] < errors[0], "{errors:?}");
    assert!(errors[1] < 0.05);
}

#[test]
fn narrow_start_follows_fundamental_entropy() {
    let p = Arc::new(Potential::standard_gaussian(1));
    let grid = GridSpec::uniform_1d(-8.0, 8.0, 2049).unwrap();
    let init = isotropic_gaussian(&[0.0], 1e-4).unwrap();
    let ts: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let dt = max_stable_dt(&p, &grid);
    let traj = fp_solve(p, &init, &[&[0.0][..], &ts].concat(), &SolverConfig::grid_fv(grid, dt)).unwrap();
    for (t, r) in traj.times.iter().zip(&traj.records).skip(1) {
        let f = fundamental_entropy(1, *t).unwrap();
        assert!((r.entropy - f.value).abs() < 0.05 * f.value, "t={t}");
        assert!(r.entropy <= f.regularization_bound);
    }
}

#[test]
fn equilibrium_cloud_keeps_its_moments() {
    let p = Arc::new(Potential::standard_gaussian(2));
    let count = 10_000;
    let traj = langevin_simulate(
        p,
        &standard_gaussian(2),
        &[0.0, 0.5, 1.0],
        &SolverConfig::langevin(count, 1e-3),
        11,
    )
    .unwrap();
    // Var |X|^2 = 2n for the standard Gaussian
    let se = (4.0 / count as f64).sqrt();
    for r in &traj.records {
        assert!((r.second_moment - 2.0).abs() < 3.0 * se + 2e-3, "{r:?}");
        assert!(r.w2 < 0.05);
        assert!(r.entropy.is_nan() && r.entropy_dx.is_nan());
    }
}

#[test]
fn contraction_refuses_particle_trajectories() {
    let p = Arc::new(Potential::standard_gaussian(1));
    let ts = times(0.05, 11);
    let cfg = SolverConfig::langevin(1000, 1e-3);
    let u = langevin_simulate(p.clone(), &standard_gaussian(1), &ts, &cfg, 1).unwrap();
    let v = langevin_simulate(p, &isotropic_gaussian(&[1.0], 1.0).unwrap(), &ts, &cfg, 2).unwrap();
    assert!(audit_contraction(&u, &v, 1.0, 1).is_err());
}
