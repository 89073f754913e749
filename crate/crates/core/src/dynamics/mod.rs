//! Fokker-Planck and Langevin evolutions with audits of contraction,
//! entropy smoothing and convergence rates.

mod audits;
mod fokker_planck;
mod langevin;
mod ou;
mod trajectory;

pub use audits::{
    audit_contraction, audit_entropy_smoothing, audit_improved_rate, AuditReport, SmoothingBounds,
    MAX_CONTRACTION_STEP, TRAPEZOID_TOLERANCE,
};
pub use fokker_planck::{fp_solve, max_stable_dt, CFL};
pub use langevin::{langevin_simulate, MIN_PARTICLES};
pub use ou::{fundamental_entropy, mehler_trajectory, ou_evolve_gaussian, FundamentalEntropy};
pub use trajectory::{equilibrium, Scheme, SolverConfig, Trajectory, TrajectoryRecord};
