pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod inequalities;
pub mod linalg;
pub mod measures;
pub mod quadrature;

pub use error::{Error, Result};
