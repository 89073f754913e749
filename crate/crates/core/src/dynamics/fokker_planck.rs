use std::sync::Arc;

use super::trajectory::{check_times, equilibrium, record_density, Scheme, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::measures::{Measure, Potential, Representation};

/// Safety factor in `dt <= CFL * h^2 / (2 + h max|V'|)`.
pub const CFL: f64 = 0.4;
/// Most negative weight tolerated (rounding) before the solver reports a fault.
const NEGATIVE_WEIGHT_GUARD: f64 = -1e-14;

/// Bernoulli function `z / (e^z - 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Largest explicit time step accepted for `potential` on a 1D grid.
pub fn max_stable_dt(potential: &Potential, grid: &crate::measures::GridSpec) -> f64 {
    let h = grid.spacing(0);
    let nodes = grid.axis_nodes(0);
    let slope_nodes = nodes
        .iter()
        .map(|x| potential.gradient(&[*x])[0].abs())
        .fold(0.0f64, f64::max);
    let slope_edges = nodes
        .windows(2)
        .map(|w| ((potential.value(&[w[1]]) - potential.value(&[w[0]])) / h).abs())
        .fold(0.0f64, f64::max);
    CFL * h * h / (2.0 + h * slope_nodes.max(slope_edges))
}

/// Explicit finite-volume solver for `du/dt = u'' + (u V')'` on a 1D grid.
///
/// The Scharfetter-Gummel flux `(B(dV) w_i - B(-dV) w_{i+1}) / h^2` between
/// neighbouring nodes vanishes exactly on `w ~ e^{-V}`, so the discrete
/// equilibrium is the discretized target. Zero-flux boundaries conserve mass.
pub fn fp_solve(
    potential: Arc<Potential>,
    init: &Measure,
    t_grid: &[f64],
    config: &SolverConfig,
) -> Result<Trajectory> {
    check_times(t_grid)?;
    if potential.dim() != 1 {
        return Err(Error::Unsupported("grid Fokker-Planck solver is one-dimensional".into()));
    }
    let grid = config
        .grid
        .clone()
        .ok_or_else(|| Error::Precondition("grid_fv solver needs a grid".into()))?;
    let start = match init.repr() {
        Representation::Grid(g) if g.grid == grid => init.clone(),
        Representation::Grid(_) => {
            return Err(Error::Precondition("initial state lives on another grid".into()))
        }
        _ => init.discretize(&grid)?,
    };
    let required = max_stable_dt(&potential, &grid);
    if !(config.dt > 0.0) || config.dt > required {
        return Err(Error::Unstable {
            dt: config.dt,
            required,
        });
    }
    let target = equilibrium(&potential, Some(&grid))?.expect("grid given");
    let h = grid.spacing(0);
    let nodes = grid.axis_nodes(0);
    let v: Vec<f64> = nodes.iter().map(|x| potential.value(&[*x])).collect();
    let inv_h2 = 1.0 / (h * h);
    // per edge i: flux = fwd[i] w_i - bwd[i] w_{i+1}
    let fwd: Vec<f64> = v.windows(2).map(|p| bernoulli(p[1] - p[0]) * inv_h2).collect();
    let bwd: Vec<f64> = v.windows(2).map(|p| bernoulli(p[0] - p[1]) * inv_h2).collect();

    let mut w = start.as_grid().expect("grid state").weights.clone();
    let mut flux = vec![0.0; w.len().saturating_sub(1)];
    let mut t = t_grid[0];
    let mut states = Vec::with_capacity(t_grid.len());
    let mut records = Vec::with_capacity(t_grid.len());
    for &t_next in t_grid {
        let span = t_next - t;
        if span > 0.0 {
            let steps = (span / config.dt).ceil() as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                for (i, f) in flux.iter_mut().enumerate() {
                    *f = fwd[i] * w[i] - bwd[i] * w[i + 1];
                }
                for (i, f) in flux.iter().enumerate() {
                    w[i] -= dt * f;
                    w[i + 1] += dt * f;
                }
            }
            for x in w.iter_mut() {
                if *x < 0.0 {
                    if *x < NEGATIVE_WEIGHT_GUARD {
                        return Err(Error::SolverFault(format!(
                            "negative weight {x} at t = {t_next}"
                        )));
                    }
                    *x = 0.0;
                }
            }
            t = t_next;
        }
        let state = Measure::from_grid_weights(grid.clone(), w.clone())?;
        records.push(record_density(&state, &target)?);
        states.push(state);
    }
    Ok(Trajectory {
        potential,
        times: t_grid.to_vec(),
        states,
        records,
        scheme: Scheme::GridFv,
        config_hash: config.config_hash(),
        seed: None,
    })
}
