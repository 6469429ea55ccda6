//! Robust split feasibility with polytopic matrix uncertainty: residual
//! evaluation, subgradient descent, error-bound certificates and exact
//! oracles for polyhedral instances.

pub mod error;
pub mod certify;
pub mod geometry;
pub mod instances;
pub mod oracle;
pub mod problem;
pub mod residual;
pub mod solver;
pub mod tol;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{ConvexSet, Matrix, Vector};
pub use problem::{load_problem, Problem, ProblemFile};
pub use residual::{residual, residual_dual_lb, subdifferential_data, subgradient, RegionTag, ResidualEval};
pub use tol::Tolerances;
pub use uncertainty::UncertaintySet;
