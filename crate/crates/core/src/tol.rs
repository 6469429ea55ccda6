use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
///
/// All fields can be overridden from a problem file; missing keys fall back
/// to the defaults below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Membership / feasibility threshold (absolute).
    pub tol_feas: f64,
    /// Stopping threshold for iterative projections.
    pub tol_proj: f64,
    /// Off-diagonal threshold of the Jacobi eigensolver.
    pub tol_eig: f64,
    /// Relative slack deciding whether a constraint is active.
    pub tol_active: f64,
    /// Residual threshold for cone membership tests.
    pub tol_dual: f64,
    /// Iteration cap for Dykstra and projected-gradient loops.
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_feas: 1e-9,
            tol_proj: 1e-10,
            tol_eig: 1e-12,
            tol_active: 1e-8,
            tol_dual: 1e-8,
            max_iter: 100_000,
        }
    }
}
