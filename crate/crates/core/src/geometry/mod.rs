//! Dense vectors and matrices, convex sets and the small solvers behind them.

pub mod active_set;
pub mod dykstra;
pub mod linalg;
pub mod minnorm;
pub mod serde_vec;
pub mod sets;

pub use linalg::{lambda_extremes_sym, operator_norm, sur};
pub use minnorm::{polar_membership, simplex_project};
pub use sets::{ConvexSet, Projection};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
