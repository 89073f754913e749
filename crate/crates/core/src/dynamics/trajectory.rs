use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{
    entropy_dx, fisher_information, gaussian_w2_squared, relative_entropy, wasserstein2, W2Backend,
};
use crate::measures::{
    build_from_potential, build_gaussian, GaussianRepr, GridSpec, Measure, Potential,
    PotentialKind, Representation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Mehler,
    GridFv,
    LangevinEm,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mehler => "mehler",
            Scheme::GridFv => "grid_fv",
            Scheme::LangevinEm => "langevin_em",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Time step; ignored by the Mehler scheme.
    pub dt: f64,
    pub grid: Option<GridSpec>,
    pub particle_count: Option<usize>,
}

impl SolverConfig {
    pub fn mehler() -> Self {
        Self {
            scheme: Scheme::Mehler,
            dt: 0.0,
            grid: None,
            particle_count: None,
        }
    }

    pub fn grid_fv(grid: GridSpec, dt: f64) -> Self {
        Self {
            scheme: Scheme::GridFv,
            dt,
            grid: Some(grid),
            particle_count: None,
        }
    }

    pub fn langevin(particle_count: usize, dt: f64) -> Self {
        Self {
            scheme: Scheme::LangevinEm,
            dt,
            grid: None,
            particle_count: Some(particle_count),
        }
    }

    /// Stable hash of the configuration, recorded with each trajectory.
    pub fn config_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.scheme.hash(&mut h);
        self.dt.to_bits().hash(&mut h);
        if let Some(g) = &self.grid {
            for v in g.lower().iter().chain(g.upper()) {
                v.to_bits().hash(&mut h);
            }
            g.counts().hash(&mut h);
        }
        self.particle_count.hash(&mut h);
        h.finish()
    }
}

/// Functionals of one state against the equilibrium `e^{-V}`; `NaN` when not estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub entropy: f64,
    pub fisher: f64,
    pub w2: f64,
    pub second_moment: f64,
    pub entropy_dx: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub potential: Arc<Potential>,
    pub times: Vec<f64>,
    pub states: Vec<Measure>,
    pub records: Vec<TrajectoryRecord>,
    pub scheme: Scheme,
    pub config_hash: u64,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    /// CSV with columns `t,H,I,W2,second_moment,Ent_dx`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,H,I,W2,second_moment,Ent_dx\n");
        for (t, r) in self.times.iter().zip(&self.records) {
            let _ = writeln!(
                out,
                "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.entropy, r.fisher, r.w2, r.second_moment, r.entropy_dx
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

pub(crate) fn check_times(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid[0] < 0.0 || !t_grid.iter().all(|t| t.is_finite()) {
        return Err(Error::Domain("times must be finite and nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Equilibrium `e^{-V}`: exact for Gaussian potentials, discretized on `grid` otherwise.
pub fn equilibrium(potential: &Arc<Potential>, grid: Option<&GridSpec>) -> Result<Option<Measure>> {
    match (potential.kind(), grid) {
        (_, Some(g)) => Ok(Some(build_from_potential(potential.clone(), g.clone())?)),
        (PotentialKind::Gaussian { mean, covariance, .. }, None) => {
            Ok(Some(build_gaussian(mean.clone(), covariance.clone())?))
        }
        _ => Ok(None),
    }
}

fn or_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

/// Records of a state with a density (Gaussian or grid) against `target`.
pub(crate) fn record_density(state: &Measure, target: &Measure) -> Result<TrajectoryRecord> {
    Ok(TrajectoryRecord {
        entropy: relative_entropy(state, target)?,
        fisher: fisher_information(state, target)?,
        w2: wasserstein2(state, target, W2Backend::Auto)?.distance(),
        second_moment: state.second_moment(),
        entropy_dx: entropy_dx(state)?,
    })
}

/// Records of a particle cloud: second moment always, `W_2` to a Gaussian
/// target through the moment-matched Gaussian, 1D quantile coupling otherwise.
pub(crate) fn record_particles(state: &Measure, target: Option<&Measure>) -> TrajectoryRecord {
    let w2 = match target.map(|t| t.repr()) {
        Some(Representation::Gaussian(g)) => {
            let fit = GaussianRepr {
                mean: nalgebra::DVector::from_vec(state.mean()),
                covariance: state.covariance(),
            };
            gaussian_w2_squared(&fit, g).max(0.0).sqrt()
        }
        Some(_) if state.dim() == 1 => or_nan(
            wasserstein2(state, target.unwrap(), W2Backend::Quantile1d).map(|e| e.distance()),
        ),
        _ => f64::NAN,
    };
    TrajectoryRecord {
        entropy: f64::NAN,
        fisher: f64::NAN,
        w2,
        second_moment: state.second_moment(),
        entropy_dx: f64::NAN,
    }
}
