//! Exact projection onto `{y : Gy ≤ h}` by the Goldfarb–Idnani dual
//! active-set method (identity Hessian).
//!
//! Starts from the unconstrained minimizer `x` and adds violated constraints
//! one at a time, dropping active ones whose multiplier would turn negative.
//! Terminates after finitely many steps with either the projection or a
//! proof that the system has no solution.

use crate::geometry::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum ActiveSetOutcome {
    Projected { point: Vector, active: Vec<usize>, steps: usize },
    /// A violated row that cannot be satisfied together with the active ones.
    Infeasible { row: usize, point: Vector, steps: usize },
    /// Step cap hit (numerical trouble); the iterate is not trustworthy.
    Stalled { point: Vector, steps: usize },
}

/// Project `x` onto `{y : Gy ≤ h}`; rows with normalized violation at most
/// `tol_feas` count as satisfied. Rows of `g` must be nonzero.
pub fn project_halfspaces(g: &Matrix, h: &Vector, x: &Vector, tol_feas: f64) -> ActiveSetOutcome {
    let rows: Vec<Vector> = (0..g.nrows()).map(|j| g.row(j).transpose()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm()).collect();
    let mut y = x.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let cap = 20 * (rows.len() + x.len()) + 20;
    let eps = 1e-12;

    let mut steps = 0;
    loop {
        // Most violated row, in normalized units.
        let worst = (0..rows.len())
            .filter(|j| !active.contains(j))
            .map(|j| (j, (rows[j].dot(&y) - h[j]) / norms[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, _)) = worst.filter(|&(_, v)| v > tol_feas) else {
            return ActiveSetOutcome::Projected { point: y, active, steps };
        };
        let np = &rows[p];
        let mut up = 0.0;
        loop {
            steps += 1;
            if steps > cap {
                return ActiveSetOutcome::Stalled { point: y, steps };
            }
            // Split the new normal into its part along the active normals
            // (coefficients r) and the orthogonal remainder z.
            let (r, z) = if active.is_empty() {
                (Vector::zeros(0), np.clone())
            } else {
                let n = Matrix::from_columns(&active.iter().map(|&j| rows[j].clone()).collect::<Vec<_>>());
                let r = n.clone().svd(true, true).solve(np, eps).unwrap_or_else(|_| Vector::zeros(active.len()));
                let z = np - &n * &r;
                (r, z)
            };
            let zz = z.norm_squared();
            let full = if zz > eps * eps * norms[p] * norms[p] {
                (np.dot(&y) - h[p]) / zz
            } else {
                f64::INFINITY
            };
            let (partial, drop) = (0..active.len())
                .filter(|&i| r[i] > eps)
                .map(|i| (mult[i] / r[i], i))
                .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a });
            let t = full.min(partial);
            if !t.is_finite() {
                return ActiveSetOutcome::Infeasible { row: p, point: y, steps };
            }
            for (i, m) in mult.iter_mut().enumerate() {
                *m -= t * r[i];
            }
            up += t;
            if full.is_finite() {
                y.axpy(-t, &z, 1.0);
            }
            if full <= partial {
                active.push(p);
                mult.push(up);
                break;
            }
            active.remove(drop);
            mult.remove(drop);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn point(o: ActiveSetOutcome) -> Vector {
        match o {
            ActiveSetOutcome::Projected { point, .. } => point,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn box_matches_clamping() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let d = rng.gen_range(1..=4);
            let lo = Vector::from_fn(d, |_, _| rng.gen_range(-2.0..0.0));
            let hi = Vector::from_fn(d, |i, _| lo[i] + rng.gen_range(0.0..2.0));
            let mut g = Matrix::zeros(2 * d, d);
            let mut h = Vector::zeros(2 * d);
            for i in 0..d {
                g[(2 * i, i)] = 1.0;
                h[2 * i] = hi[i];
                g[(2 * i + 1, i)] = -1.0;
                h[2 * i + 1] = -lo[i];
            }
            let x = Vector::from_fn(d, |_, _| rng.gen_range(-5.0..5.0));
            let expected = Vector::from_fn(d, |i, _| x[i].clamp(lo[i], hi[i]));
            let got = point(project_halfspaces(&g, &h, &x, 1e-12));
            assert!((got - expected).norm() <= 1e-10);
        }
    }

    #[test]
    fn thin_slab_corner() {
        // Two slabs of width ~0 meeting at a point, plus a redundant row.
        let g = Matrix::from_row_slice(5, 2, &[1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 0.0]);
        let h = v(&[1.0, -1.0, 0.0, 0.0, 5.0]);
        let got = point(project_halfspaces(&g, &h, &v(&[-3.0, 7.0]), 1e-12));
        assert!((got - v(&[0.5, 0.5])).norm() <= 1e-12);
    }

    #[test]
    fn detects_empty_systems() {
        let g = Matrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let h = v(&[-1.0, -1.0]);
        assert!(matches!(project_halfspaces(&g, &h, &v(&[0.0]), 1e-12), ActiveSetOutcome::Infeasible { .. }));
    }

    #[test]
    fn inside_points_are_fixed() {
        let g = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let got = point(project_halfspaces(&g, &v(&[1.0, 1.0]), &v(&[0.5, -3.0]), 1e-12));
        assert_eq!(got, v(&[0.5, -3.0]));
    }
}
