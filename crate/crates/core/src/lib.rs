//! Desk-scale laboratory for the k-spin Potts antiferromagnet on sparse
//! random graphs: exact partition oracles, first/second moment calculators,
//! overlap-landscape optimization, separability predicates, planted ensembles
//! and MCMC estimators.

pub mod ensembles;
pub mod entropy;
pub mod error;
pub mod exact;
pub mod io;
pub mod landscape;
pub mod matrix;
pub mod mcmc;
pub mod model;
pub mod moments;
pub mod numeric;
pub mod separability;

pub use error::{PottsError, Result};
pub use matrix::{MatrixKind, StochasticMatrix};
pub use model::{ColorAssignment, ModelParams, SimpleGraph};
