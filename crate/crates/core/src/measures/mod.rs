//! Probability measures `e^{-V}` on `R^n`: potentials, grids, and the
//! representations (Gaussian, grid, particles, product) the functionals act on.

mod grid;
mod measure;
mod potential;

pub use grid::{GridSpec, DENSITY_FLOOR, SUPPORT_FRACTION, TAIL_EPSILON};
pub use measure::{
    build_from_potential, build_gaussian, gaussian_auto_grid, isotropic_gaussian,
    perturb_density, potential_eval, standard_gaussian, tensor_power, GaussianRepr, GridDensity,
    Measure, ParticleCloud, Representation,
};
pub use potential::{
    MatrixFn, Potential, PotentialEval, PotentialKind, ScalarFn, Spline, VectorFn,
};
