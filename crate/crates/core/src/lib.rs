//! Bayesian nonparametric mixture inference from differentially private data.
//!
//! Confidential data `Y` are released through a privacy channel `q(z | y)`;
//! the samplers in [`samplers`] and [`marginal_gaussian`] target the exact
//! posterior of a Dirichlet process mixture for `Y` given only the released
//! data.

pub mod channels;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod marginal_gaussian;
pub mod mixtures;
pub mod num;
pub mod quadrature;
pub mod samplers;
pub mod special;

pub use error::{Error, Result};
pub use num::Real;

/// Default scalar of the samplers.
pub type Scalar = f64;
