use std::sync::Arc;

use dimineq::dynamics::{ou_evolve_gaussian, fp_solve, max_stable_dt, SolverConfig};
use dimineq::inequalities::{
    concentration_profile, core_deficits, deficit_delta, deficit_lambda,
    evaluate_talagrand_dimensional, SetDescriptor,
};
use dimineq::measures::{
    build_gaussian, isotropic_gaussian, standard_gaussian, tensor_power, GridSpec, Potential,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #[test]
    fn deficit_delta_dominates_quadratic_linear_floor(x in -50.0f64..50.0, n in 1usize..=10) {
        let nf = n as f64;
        let floor = (-1.0f64).exp() * x.abs().min(x * x / nf);
        prop_assert!(deficit_delta(n, x) >= floor * (1.0 - 1e-12));
    }

    #[test]
    fn deficit_lambda_is_nonnegative_and_convex(x in -0.99f64..20.0, n in 1usize..=6, d in 1e-3f64..0.5) {
        let nf = n as f64;
        let x = x * nf;
        let l = |y: f64| deficit_lambda(n, y).unwrap();
        prop_assert!(l(x) >= 0.0);
        if x - d > -nf {
            prop_assert!(l(x - d) + l(x + d) - 2.0 * l(x) >= -1e-9 * (1.0 + l(x)));
        }
    }

    #[test]
    fn talagrand_holds_on_random_gaussians(m in -3.0f64..3.0, s in 0.2f64..3.0) {
        let nu = isotropic_gaussian(&[m], s * s).unwrap();
        let ev = evaluate_talagrand_dimensional(&nu, &standard_gaussian(1)).unwrap();
        prop_assert!(ev.verdict, "{ev:?}");
        // dimensional bound sharpens the classical one: rhs <= H
        let h = ev.intermediate("H").unwrap();
        prop_assert!(ev.rhs <= h + 1e-12);
    }

    #[test]
    fn talagrand_deficit_tensorizes(m in -2.0f64..2.0, s in 0.3f64..2.0, copies in 2usize..=6) {
        let nu = isotropic_gaussian(&[m], s * s).unwrap();
        let mu = standard_gaussian(1);
        let one = core_deficits(&nu, &mu, 1.0).unwrap().delta_tal;
        let many = core_deficits(
            &tensor_power(&nu, copies).unwrap(),
            &tensor_power(&mu, copies).unwrap(),
            1.0,
        )
        .unwrap()
        .delta_tal;
        prop_assert!((many - copies as f64 * one).abs() <= 1e-12 * (1.0 + many.abs()));
    }

    #[test]
    fn mehler_second_moment_solves_its_ode(m in -2.0f64..2.0, s in 0.1f64..3.0, t in 0.0f64..3.0) {
        let u0 = isotropic_gaussian(&[m, -m], s).unwrap();
        let m0 = u0.second_moment();
        let ut = ou_evolve_gaussian(&u0, t).unwrap();
        // d/dt m = 2n - 2m
        let exact = 2.0 + (m0 - 2.0) * (-2.0 * t).exp();
        prop_assert!((ut.second_moment() - exact).abs() < 1e-12 * (1.0 + exact));
    }

    #[test]
    fn dimensional_concentration_below_classical(m in -1.0f64..1.0, radius in 0.2f64..1.5) {
        let mu = build_gaussian(DVector::from_vec(vec![m]), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let set = SetDescriptor::Ball { center: vec![m], radius };
        let rs: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
        for row in concentration_profile(&mu, &set, &rs).unwrap() {
            if row.applicable {
                prop_assert!(row.dimensional_bound <= row.classical_bound + 1e-12, "{row:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn grid_solver_conserves_mass_and_dissipates_entropy(a in -1.5f64..1.5, var in 0.3f64..2.0) {
        let p = Arc::new(Potential::standard_gaussian(1));
        let grid = GridSpec::uniform_1d(-12.0, 12.0, 385).unwrap();
        let init = isotropic_gaussian(&[a], var).unwrap();
        let dt = max_stable_dt(&p, &grid);
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let traj = fp_solve(p, &init, &times, &SolverConfig::grid_fv(grid, dt)).unwrap();
        for s in &traj.states {
            prop_assert!((s.mass() - 1.0).abs() < 1e-10);
        }
        for w in traj.records.windows(2) {
            prop_assert!(w[1].entropy <= w[0].entropy + 1e-6);
        }
    }
}
