//! Random instance generators shared by the integration suites.
#![allow(dead_code)]

use rand::Rng;
use robust_split::{ConvexSet, Matrix, Problem, UncertaintySet, Vector};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

pub fn mat(r: usize, c: usize, xs: &[f64]) -> Matrix {
    Matrix::from_row_slice(r, c, xs)
}

pub fn random_vec(rng: &mut impl Rng, d: usize, r: f64) -> Vector {
    Vector::from_fn(d, |_, _| rng.gen_range(-r..=r))
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-2.0..=2.0))
}

fn nonzero_rows(rng: &mut impl Rng, rows: usize, d: usize) -> Matrix {
    loop {
        let g = random_matrix(rng, rows, d);
        if (0..rows).all(|j| g.row(j).norm() > 0.2) {
            return g;
        }
    }
}

/// Which kinds of set [`random_set`] may return.
#[derive(Clone, Copy, PartialEq)]
pub enum SetKind {
    /// Any supported variant.
    Any,
    /// Closed convex cones only.
    Cone,
    /// Variants with a finite support function or a polar cone.
    Dualizable,
}

pub fn random_set(rng: &mut impl Rng, d: usize, kind: SetKind) -> ConvexSet {
    loop {
        let s = match rng.gen_range(0..8) {
            0 => ConvexSet::NonnegOrthant { dim: d },
            1 => ConvexSet::NonposOrthant { dim: d },
            2 => {
                let lo = random_vec(rng, d, 2.0);
                let hi = Vector::from_fn(d, |i, _| lo[i] + rng.gen_range(0.0..2.0));
                ConvexSet::Box { lo, hi }
            }
            3 => ConvexSet::Ball { center: random_vec(rng, d, 2.0), radius: rng.gen_range(0.1..2.0) },
            4 => {
                let rows = rng.gen_range(1..=d.min(3));
                ConvexSet::Halfspaces { g: nonzero_rows(rng, rows, d), h: Vector::zeros(rows) }
            }
            5 => {
                let rows = rng.gen_range(1..=3);
                let h = Vector::from_fn(rows, |_, _| rng.gen_range(0.0..2.0));
                ConvexSet::Halfspaces { g: nonzero_rows(rng, rows, d), h }
            }
            6 => ConvexSet::WholeSpace { dim: d },
            _ => ConvexSet::Singleton { point: random_vec(rng, d, 2.0) },
        };
        let ok = match kind {
            SetKind::Any => true,
            SetKind::Cone => s.is_cone(),
            SetKind::Dualizable => !matches!(s, ConvexSet::WholeSpace { .. }) && (s.is_cone() || !matches!(s, ConvexSet::Halfspaces { .. })),
        };
        if ok {
            return s;
        }
    }
}

/// Random instance with `n, m, k ≤ 3`.
pub fn random_problem(rng: &mut impl Rng, c_kind: SetKind, q_kind: SetKind) -> Problem {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    let vertices = (0..k).map(|_| random_matrix(rng, m, n)).collect();
    let c = random_set(rng, n, c_kind);
    let q = random_set(rng, m, q_kind);
    Problem::new(c, q, UncertaintySet::new(vertices).unwrap()).unwrap()
}

/// Unit directions spread over the sphere of `ℝᵈ` (`d ≤ 3`).
pub fn sphere_directions(d: usize, count: usize) -> Vec<Vector> {
    match d {
        1 => vec![v(&[1.0]), v(&[-1.0])],
        2 => (0..count)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / count as f64;
                v(&[t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    v(&[r * t.cos(), r * t.sin(), z])
                })
                .collect()
        }
        _ => panic!("sphere_directions supports d ≤ 3"),
    }
}

/// Distance from `y` to `ℝᵈ₋`.
pub fn dist_nonpos(y: &Vector) -> f64 {
    y.map(|t| t.max(0.0)).norm()
}
