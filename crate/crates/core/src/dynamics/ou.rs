use std::sync::Arc;

use nalgebra::DMatrix;

use super::trajectory::{check_times, record_density, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::measures::{build_gaussian, standard_gaussian, Measure, Potential};

/// Mehler solution of the Ornstein-Uhlenbeck equation started at a Gaussian:
/// `N(m e^{-t}, e^{-2t} S + (1 - e^{-2t}) Id)`.
pub fn ou_evolve_gaussian(init: &Measure, t: f64) -> Result<Measure> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("negative time {t}")));
    }
    let g = init
        .as_gaussian()
        .ok_or_else(|| Error::Unsupported("Mehler evolution needs a Gaussian initial state".into()))?;
    if t == 0.0 {
        return Ok(init.clone());
    }
    let n = g.mean.len();
    let decay = (-t).exp();
    let cov = &g.covariance * (decay * decay) + DMatrix::identity(n, n) * (-(-2.0 * t).exp_m1());
    build_gaussian(&g.mean * decay, (&cov + cov.transpose()) * 0.5)
}

/// Exact Ornstein-Uhlenbeck trajectory (potential `|x|^2/2`) sampled at `t_grid`.
pub fn mehler_trajectory(init: &Measure, t_grid: &[f64]) -> Result<Trajectory> {
    check_times(t_grid)?;
    let n = init.dim();
    let target = standard_gaussian(n);
    let mut states = Vec::with_capacity(t_grid.len());
    let mut records = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let s = ou_evolve_gaussian(init, t)?;
        records.push(record_density(&s, &target)?);
        states.push(s);
    }
    Ok(Trajectory {
        potential: Arc::new(Potential::standard_gaussian(n)),
        times: t_grid.to_vec(),
        states,
        records,
        scheme: super::Scheme::Mehler,
        config_hash: SolverConfig::mehler().config_hash(),
        seed: None,
    })
}

/// Relative entropy of the fundamental solution (Dirac start) with its two comparison bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalEntropy {
    /// `-(n/2) (e^{-2t} + log(1 - e^{-2t}))`
    pub value: f64,
    /// `-(n/2) log(1 - e^{-2t})`
    pub log_bound: f64,
    /// `n / (2t)`
    pub regularization_bound: f64,
}

pub fn fundamental_entropy(n: usize, t: f64) -> Result<FundamentalEntropy> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("fundamental entropy needs t > 0, got {t}")));
    }
    let nf = n as f64;
    let e = (-2.0 * t).exp();
    let log_term = (-(-2.0 * t).exp_m1()).ln();
    Ok(FundamentalEntropy {
        value: -0.5 * nf * (e + log_term),
        log_bound: -0.5 * nf * log_term,
        regularization_bound: nf / (2.0 * t),
    })
}
