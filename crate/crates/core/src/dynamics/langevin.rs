use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::trajectory::{check_times, equilibrium, record_particles, Scheme, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::measures::{Measure, Potential};

/// Minimum particle count accepted by the sampler.
pub const MIN_PARTICLES: usize = 1000;
/// Any coordinate beyond this magnitude counts as a blow-up.
const OVERFLOW_GUARD: f64 = 1e8;
/// Stream reserved for drawing the initial positions.
const INIT_STREAM: u64 = u64::MAX;

/// Overdamped Langevin dynamics `dX = sqrt(2) dB - grad V(X) dt` by
/// Euler-Maruyama. Every particle owns a ChaCha8 stream derived from `seed`,
/// so results do not depend on the thread count.
pub fn langevin_simulate(
    potential: Arc<Potential>,
    init: &Measure,
    t_grid: &[f64],
    config: &SolverConfig,
    seed: u64,
) -> Result<Trajectory> {
    check_times(t_grid)?;
    let count = config
        .particle_count
        .ok_or_else(|| Error::Precondition("Langevin sampler needs a particle count".into()))?;
    if count < MIN_PARTICLES {
        return Err(Error::Precondition(format!(
            "at least {MIN_PARTICLES} particles required, got {count}"
        )));
    }
    if !(config.dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {}", config.dt)));
    }
    if init.dim() != potential.dim() {
        return Err(Error::DimensionMismatch {
            expected: potential.dim(),
            got: init.dim(),
        });
    }
    let target = equilibrium(&potential, config.grid.as_ref())?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(INIT_STREAM);
    let points = init.sample(count, &mut init_rng)?;
    let mut particles: Vec<(Vec<f64>, ChaCha8Rng)> = points
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (x, rng)
        })
        .collect();

    let mut t = t_grid[0];
    let mut states = Vec::with_capacity(t_grid.len());
    let mut records = Vec::with_capacity(t_grid.len());
    for &t_next in t_grid {
        let span = t_next - t;
        if span > 0.0 {
            let steps = (span / config.dt).ceil() as usize;
            let dt = span / steps as f64;
            let noise = (2.0 * dt).sqrt();
            let p = &potential;
            let blown = particles
                .par_iter_mut()
                .map(|(x, rng)| {
                    for _ in 0..steps {
                        let g = p.gradient(x);
                        for (xi, gi) in x.iter_mut().zip(g) {
                            let z: f64 = StandardNormal.sample(rng);
                            *xi += -gi * dt + noise * z;
                        }
                        if x.iter().any(|v| !(v.abs() <= OVERFLOW_GUARD)) {
                            return true;
                        }
                    }
                    false
                })
                .reduce(|| false, |a, b| a || b);
            if blown {
                return Err(Error::BlowUp(t_next));
            }
            t = t_next;
        }
        let state = Measure::from_particles(particles.iter().map(|(x, _)| x.clone()).collect(), None)?;
        records.push(record_particles(&state, target.as_ref()));
        states.push(state);
    }
    Ok(Trajectory {
        potential,
        times: t_grid.to_vec(),
        states,
        records,
        scheme: Scheme::LangevinEm,
        config_hash: config.config_hash(),
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{isotropic_gaussian, standard_gaussian};

    #[test]
    fn same_seed_same_records() {
        let p = Arc::new(Potential::standard_gaussian(2));
        let init = standard_gaussian(2);
        let cfg = SolverConfig::langevin(2000, 0.01);
        let a = langevin_simulate(p.clone(), &init, &[0.0, 0.2], &cfg, 7).unwrap();
        let b = langevin_simulate(p.clone(), &init, &[0.0, 0.2], &cfg, 7).unwrap();
        let c = langevin_simulate(p, &init, &[0.0, 0.2], &cfg, 8).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn mean_decays_exponentially() {
        let p = Arc::new(Potential::standard_gaussian(1));
        let init = isotropic_gaussian(&[2.0], 1.0).unwrap();
        let count = 20_000;
        let traj =
            langevin_simulate(p, &init, &[0.0, 0.5, 1.0], &SolverConfig::langevin(count, 1e-3), 3)
                .unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let se = 1.0 / (count as f64).sqrt();
            assert!((s.mean()[0] - 2.0 * (-t).exp()).abs() < 3.0 * se + 2e-3, "t={t}");
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let p = Arc::new(Potential::quartic(1));
        let init = isotropic_gaussian(&[3.0], 0.1).unwrap();
        let err = langevin_simulate(p, &init, &[0.0, 5.0], &SolverConfig::langevin(1000, 0.5), 1)
            .unwrap_err();
        assert!(matches!(err, Error::BlowUp(_)));
    }
}
