//! Dimensional functional inequalities evaluated as deficit reports: each
//! instance yields both sides, its slack, the named intermediates and a verdict.

mod brascamp_lieb;
mod concentration;
mod evaluation;
mod lsi;
mod structural;
mod talagrand;

pub use brascamp_lieb::{evaluate_brascamp_lieb, BlVariant, TestFunction};
pub use concentration::{concentration_profile, ConcentrationRow, SetDescriptor};
pub use evaluation::{
    deficit_delta, deficit_lambda, Accuracy, InequalityEvaluation, ANALYTIC_TOLERANCE,
    GRID_TOLERANCE_FLOOR, SAMPLED_TOLERANCE,
};
pub use lsi::{evaluate_lp_euclidean_lsi, evaluate_lsi_dimensional, LsiVariant};
pub use structural::{
    cauchy_profile, check_convexity_functional, check_geodesic_convexity, check_trace_bound,
    ConvexityFunctional, GeodesicConvexityReport, CONVEXITY_TOLERANCE, MIN_GEODESIC_NODES,
};
pub use talagrand::{core_deficits, evaluate_hwi, evaluate_talagrand_dimensional, CoreDeficits};
