//! Dykstra's alternating projection onto `{x : Gx ≤ h}`.

use crate::geometry::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    pub point: Vector,
    pub cycles: usize,
    /// Largest normalized violation `(⟨gⱼ,x⟩ − hⱼ)/‖gⱼ‖` at the returned point.
    pub max_violation: f64,
    /// Movement over the last full cycle.
    pub last_move: f64,
    pub converged: bool,
}

/// Project `x` onto the polyhedron `{y : Gy ≤ h}`. Rows of `g` must be nonzero.
///
/// Stops once a full cycle moves the iterate less than `tol_proj` and the
/// worst violation is below `tol_feas`, or after `max_cycles` cycles.
pub fn dykstra(g: &Matrix, h: &Vector, x: &Vector, tol_proj: f64, tol_feas: f64, max_cycles: usize) -> DykstraOutcome {
    let rows: Vec<Vector> = (0..g.nrows()).map(|j| g.row(j).transpose()).collect();
    let norms2: Vec<f64> = rows.iter().map(|r| r.norm_squared()).collect();

    let violation = |y: &Vector| -> f64 {
        rows.iter()
            .zip(h.iter())
            .zip(norms2.iter())
            .map(|((r, &hj), &n2)| (r.dot(y) - hj) / n2.sqrt())
            .fold(0.0, f64::max)
    };

    let v0 = violation(x);
    if v0 <= 0.0 {
        return DykstraOutcome {
            point: x.clone(),
            cycles: 0,
            max_violation: 0.0,
            last_move: 0.0,
            converged: true,
        };
    }
    if rows.len() == 1 {
        let t = (rows[0].dot(x) - h[0]) / norms2[0];
        let point = x - &rows[0] * t;
        let max_violation = violation(&point);
        return DykstraOutcome {
            point,
            cycles: 1,
            max_violation,
            last_move: 0.0,
            converged: true,
        };
    }

    // Increment vectors for halfspaces are multiples of the row normals, so
    // store only the scalar coefficients.
    let mut incr = vec![0.0; rows.len()];
    let mut cur = x.clone();
    let mut cycles = 0;
    let mut last_move = f64::INFINITY;
    while cycles < max_cycles {
        let start = cur.clone();
        for (j, r) in rows.iter().enumerate() {
            // y = cur + incr_j·r_j ; project y onto halfspace j
            let ry = r.dot(&cur) + incr[j] * norms2[j];
            let excess = ry - h[j];
            let t = if excess > 0.0 { excess / norms2[j] } else { 0.0 };
            // new cur = y − t·r_j, new incr_j = t
            let delta = incr[j] - t;
            if delta != 0.0 {
                cur.axpy(delta, r, 1.0);
            }
            incr[j] = t;
        }
        cycles += 1;
        last_move = (&cur - &start).norm();
        if last_move < tol_proj {
            let max_violation = violation(&cur);
            if max_violation < tol_feas {
                return DykstraOutcome {
                    point: cur,
                    cycles,
                    max_violation,
                    last_move,
                    converged: true,
                };
            }
        }
    }
    let max_violation = violation(&cur);
    DykstraOutcome {
        point: cur,
        cycles,
        max_violation,
        last_move,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_halfspace_closed_form() {
        let g = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let h = Vector::from_row_slice(&[0.0]);
        let out = dykstra(&g, &h, &Vector::from_row_slice(&[1.0, 0.0]), 1e-12, 1e-12, 10);
        assert_abs_diff_eq!(out.point[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.point[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn box_as_halfspaces_matches_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let lo = Vector::from_fn(3, |_, _| rng.gen_range(-2.0..0.0));
            let hi = Vector::from_fn(3, |i, _| lo[i] + rng.gen_range(0.0..2.0));
            let mut g = Matrix::zeros(6, 3);
            let mut h = Vector::zeros(6);
            for i in 0..3 {
                g[(2 * i, i)] = 1.0;
                h[2 * i] = hi[i];
                g[(2 * i + 1, i)] = -1.0;
                h[2 * i + 1] = -lo[i];
            }
            let x = Vector::from_fn(3, |_, _| rng.gen_range(-5.0..5.0));
            let out = dykstra(&g, &h, &x, 1e-12, 1e-12, 100_000);
            let clamp = Vector::from_fn(3, |i, _| x[i].clamp(lo[i], hi[i]));
            assert!(out.converged);
            assert!((out.point - clamp).amax() < 1e-8);
        }
    }

    #[test]
    fn empty_intersection_does_not_converge() {
        // x ≥ 1 and x ≤ 0
        let g = Matrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let h = Vector::from_row_slice(&[-1.0, 0.0]);
        let out = dykstra(&g, &h, &Vector::from_row_slice(&[3.0]), 1e-10, 1e-9, 1000);
        assert!(!out.converged);
        assert!(out.max_violation > 0.4);
    }
}
