//! Information and transport functionals: relative entropy, Lebesgue entropy,
//! Fisher information, variance, Wasserstein-2 distance, Brenier maps,
//! Legendre transforms and entropy profiles along displacement geodesics.

mod entropy;
mod geodesic;
mod integrate;
mod legendre;
pub mod sinkhorn;
mod transport;
mod wasserstein;

pub use entropy::{
    entropy_dx, fisher_information, gaussian_entropy_dx, gaussian_fisher_information,
    gaussian_relative_entropy, grid_score, relative_entropy, score_quadrature, ScoreNode,
};
pub use geodesic::{geodesic_profile, GeodesicProfile};
pub use integrate::{
    expectation, expectation_vec, for_each_node, numerical_gradient, potential_expectation,
    variance,
};
pub use legendre::{legendre_discrete_1d, legendre_discrete_2d, legendre_transform};
pub use transport::{brenier_transport, PlanKind, TransportPlan};
pub use wasserstein::{
    gaussian_w2_squared, quantile_w2_squared, w2, wasserstein2, Quantile, W2Backend, W2Estimate,
};
