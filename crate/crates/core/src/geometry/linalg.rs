//! Small dense symmetric eigenproblems and the matrix quantities built on them.

use crate::error::{Error, Result};
use crate::geometry::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
///
/// The input is symmetrized first; an asymmetry above `1e-12` (relative to
/// the largest entry, floored at 1) is rejected.
pub fn symmetric_eigenvalues(s: &Matrix, tol_eig: f64) -> Result<Vec<f64>> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(Error::DimensionMismatch {
            context: "symmetric eigenproblem (square matrix)",
            expected: n,
            found: s.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Precondition("empty matrix".into()));
    }
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Precondition(format!(
            "matrix is not symmetric (asymmetry {asym:.3e})"
        )));
    }
    let mut a = (s + s.transpose()) * 0.5;

    let off = |a: &Matrix| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += a[(i, j)] * a[(i, j)];
                }
            }
        }
        sum.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > tol_eig * scale && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
        sweeps += 1;
    }
    let residual = off(&a);
    if residual > tol_eig * scale * 1e3 {
        return Err(Error::NotConverged {
            what: "jacobi eigensolver",
            iterations: sweeps,
            gap: residual,
            last: a.diagonal(),
        });
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn lambda_extremes_sym(s: &Matrix, tol_eig: f64) -> Result<(f64, f64)> {
    let eig = symmetric_eigenvalues(s, tol_eig)?;
    Ok((eig[0], eig[eig.len() - 1]))
}

/// Spectral norm `sqrt(λ_max(AᵀA))`.
pub fn operator_norm(a: &Matrix) -> f64 {
    let gram = a.transpose() * a;
    match lambda_extremes_sym(&gram, 1e-12) {
        Ok((_, hi)) => hi.max(0.0).sqrt(),
        Err(_) => a.norm(),
    }
}

/// Exact covering bound `min_{‖u‖=1} ‖Aᵀu‖ = sqrt(λ_min(AAᵀ))`.
pub fn sur(a: &Matrix) -> f64 {
    let gram = a * a.transpose();
    match lambda_extremes_sym(&gram, 1e-12) {
        Ok((lo, _)) => lo.max(0.0).sqrt(),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_extremes_small_cases() {
        let id = Matrix::identity(2, 2);
        assert_eq!(lambda_extremes_sym(&id, 1e-12).unwrap(), (1.0, 1.0));
        let d = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        assert_eq!(lambda_extremes_sym(&d, 1e-12).unwrap(), (1.0, 4.0));
        let s = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = lambda_extremes_sym(&s, 1e-12).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_square_and_asymmetric() {
        let r = Matrix::zeros(2, 3);
        assert!(matches!(
            lambda_extremes_sym(&r, 1e-12),
            Err(Error::DimensionMismatch { .. })
        ));
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(lambda_extremes_sym(&a, 1e-12).is_err());
    }

    #[test]
    fn three_by_three_matches_trace_and_determinant() {
        let s = Matrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 1.0, 2.0, 0.0, -2.0, 0.0, 3.0]);
        let eig = symmetric_eigenvalues(&s, 1e-12).unwrap();
        assert_abs_diff_eq!(eig.iter().sum::<f64>(), 9.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eig.iter().product::<f64>(), s.determinant(), epsilon = 1e-9);
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&Matrix::identity(2, 2)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(operator_norm(&(Matrix::identity(3, 3) * 3.0)), 3.0, epsilon = 1e-12);
        let a = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(operator_norm(&a), golden, epsilon = 1e-12);
    }

    #[test]
    fn sur_examples() {
        assert_abs_diff_eq!(sur(&Matrix::identity(2, 2)), 1.0, epsilon = 1e-12);
        let half = Matrix::from_element(2, 2, 0.5);
        assert!(sur(&half) < 1e-7);
        let a = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        // smaller eigenvalue of AAᵀ = [[2,-1],[-1,1]] is (3-√5)/2
        let expected = ((3.0 - 5f64.sqrt()) / 2.0).sqrt();
        assert_abs_diff_eq!(sur(&a), expected, epsilon = 1e-12);
        assert!(sur(&a) >= 0.5);
        // more rows than columns: never onto
        assert!(sur(&Matrix::from_row_slice(2, 1, &[1.0, 1.0])) < 1e-7);
    }
}
