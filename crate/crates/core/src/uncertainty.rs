//! Polytopic uncertainty sets `U = conv{A₁, …, A_k}` and the set-valued map
//! `x ↦ {Ax : A ∈ U}`.
//!
//! Everything is evaluated on the vertex list: the image of `x` is the
//! convex hull of `{Aᵢx}`, and because `dist(·, Q)` is convex its supremum
//! over that hull is attained at one of the `Aᵢx`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::sets::{matrix_from_rows, matrix_to_rows};
use crate::geometry::{operator_norm, sur, ConvexSet, Matrix, Vector};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UncertaintyRepr", into = "UncertaintyRepr")]
pub struct UncertaintySet {
    vertices: Vec<Matrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UncertaintyRepr {
    vertices: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<UncertaintyRepr> for UncertaintySet {
    type Error = String;

    fn try_from(r: UncertaintyRepr) -> std::result::Result<Self, String> {
        let vertices = r
            .vertices
            .iter()
            .enumerate()
            .map(|(i, rows)| matrix_from_rows(rows, &format!("U.vertices[{i}]")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        UncertaintySet::new(vertices).map_err(|e| e.to_string())
    }
}

impl From<UncertaintySet> for UncertaintyRepr {
    fn from(u: UncertaintySet) -> Self {
        Self {
            vertices: u.vertices.iter().map(matrix_to_rows).collect(),
        }
    }
}

/// Result of [`UncertaintySet::sur_inf_estimate`].
#[derive(Debug, Clone, Serialize)]
pub struct SurEstimate {
    /// Smallest covering bound found; an upper bound on `inf_{A∈U} sur(A)`.
    pub value: f64,
    /// Convex weights of the minimizing combination.
    pub witness_weights: Vec<f64>,
    pub evaluated: usize,
}

impl UncertaintySet {
    pub fn new(vertices: Vec<Matrix>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidProblem("uncertainty set needs at least one vertex (k ≥ 1)".into()))?;
        let (m, n) = first.shape();
        if m == 0 || n == 0 {
            return Err(Error::InvalidProblem("vertex matrices must be at least 1×1".into()));
        }
        for (i, a) in vertices.iter().enumerate() {
            if a.shape() != (m, n) {
                return Err(Error::InvalidProblem(format!(
                    "vertex {i} has shape {:?}, expected {:?}",
                    a.shape(),
                    (m, n)
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidProblem(format!("vertex {i} has non-finite entries")));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Matrix] {
        &self.vertices
    }

    /// Number of vertices `k`.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Output dimension `m`.
    pub fn rows(&self) -> usize {
        self.vertices[0].nrows()
    }

    /// Input dimension `n`.
    pub fn cols(&self) -> usize {
        self.vertices[0].ncols()
    }

    /// `Σ λᵢ Aᵢ`.
    pub fn combination(&self, weights: &[f64]) -> Result<Matrix> {
        check_dim("convex weights", self.len(), weights.len())?;
        let mut out = Matrix::zeros(self.rows(), self.cols());
        for (a, &w) in self.vertices.iter().zip(weights) {
            out += a * w;
        }
        Ok(out)
    }

    /// `[A₁x, …, A_k x]`; the image of `x` is their convex hull.
    pub fn evaluate_vertices(&self, x: &Vector) -> Result<Vec<Vector>> {
        check_dim("uncertainty map input", self.cols(), x.len())?;
        Ok(self.vertices.iter().map(|a| a * x).collect())
    }

    /// `dist(Aᵢx, Q)` for every vertex.
    pub fn vertex_distances(&self, x: &Vector, q: &ConvexSet, tol: &Tolerances) -> Result<Vec<f64>> {
        check_dim("target set Q", self.rows(), q.dim())?;
        self.evaluate_vertices(x)?
            .iter()
            .map(|y| q.distance(y, tol))
            .collect()
    }

    /// Excess `sup_{A∈U} dist(Ax, Q) = maxᵢ dist(Aᵢx, Q)`.
    pub fn excess(&self, x: &Vector, q: &ConvexSet, tol: &Tolerances) -> Result<f64> {
        Ok(self
            .vertex_distances(x, q, tol)?
            .into_iter()
            .fold(0.0, f64::max))
    }

    /// Vertex indices attaining the excess up to `tol_cleanup`
    /// (default `1e-8·(1 + excess)`). Never empty.
    pub fn cleanup_set(&self, x: &Vector, q: &ConvexSet, tol: &Tolerances, tol_cleanup: Option<f64>) -> Result<Vec<usize>> {
        let d = self.vertex_distances(x, q, tol)?;
        Ok(cleanup_from_distances(&d, tol_cleanup))
    }

    /// Lipschitz constant `β = maxᵢ ‖Aᵢ‖` of the map on `U`.
    pub fn lipschitz_beta(&self) -> f64 {
        self.vertices.iter().map(operator_norm).fold(0.0, f64::max)
    }

    /// Sampled minimum of `sur` over convex combinations of the vertices.
    ///
    /// Uses every simplex point with denominators `grid_density` when
    /// `k ≤ 3`, seeded Dirichlet samples (`grid_density·k` of them) otherwise,
    /// followed by `refine_iters` pairwise weight-transfer line searches.
    /// The value is an upper bound on the infimum over `U`.
    pub fn sur_inf_estimate(&self, grid_density: usize, refine_iters: usize, seed: u64) -> SurEstimate {
        let k = self.len();
        if k == 1 {
            return SurEstimate {
                value: sur(&self.vertices[0]),
                witness_weights: vec![1.0],
                evaluated: 1,
            };
        }
        let density = grid_density.max(1);
        let candidates: Vec<Vec<f64>> = if k <= 3 {
            simplex_grid(k, density)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            pts.push(vec![1.0 / k as f64; k]);
            for _ in 0..density * k {
                pts.push(dirichlet_uniform(&mut rng, k));
            }
            pts
        };
        let evaluated = candidates.len();
        // ties go to the smallest candidate index so the result is worker-independent
        let (mut best_val, best_idx) = candidates
            .par_iter()
            .enumerate()
            .map(|(i, w)| (self.sur_at(w), i))
            .reduce(
                || (f64::INFINITY, usize::MAX),
                |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            );
        let mut best_w = candidates[best_idx].clone();

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        for _ in 0..refine_iters {
            let i = rng.gen_range(0..k);
            let mut j = rng.gen_range(0..k - 1);
            if j >= i {
                j += 1;
            }
            // move t from vertex i to vertex j, t ∈ [−w_j, w_i]
            let (lo, hi) = (-best_w[j], best_w[i]);
            if hi - lo <= 1e-15 {
                continue;
            }
            let eval = |t: f64| {
                let mut w = best_w.clone();
                w[i] -= t;
                w[j] += t;
                (self.sur_at(&w), w)
            };
            let t = golden_section(lo, hi, 60, |t| eval(t).0);
            let (val, w) = eval(t);
            if val < best_val {
                best_val = val;
                best_w = w;
            }
        }
        SurEstimate {
            value: best_val,
            witness_weights: best_w,
            evaluated: evaluated + refine_iters,
        }
    }

    fn sur_at(&self, weights: &[f64]) -> f64 {
        let mut a = Matrix::zeros(self.rows(), self.cols());
        for (v, &w) in self.vertices.iter().zip(weights) {
            a += v * w;
        }
        sur(&a)
    }
}

pub(crate) fn cleanup_from_distances(d: &[f64], tol_cleanup: Option<f64>) -> Vec<usize> {
    let exc = d.iter().copied().fold(0.0, f64::max);
    let slack = tol_cleanup.unwrap_or(1e-8 * (1.0 + exc));
    (0..d.len()).filter(|&i| exc - d[i] <= slack).collect()
}

fn simplex_grid(k: usize, density: usize) -> Vec<Vec<f64>> {
    let d = density as f64;
    match k {
        2 => (0..=density).map(|i| vec![i as f64 / d, (density - i) as f64 / d]).collect(),
        3 => {
            let mut out = Vec::new();
            for i in 0..=density {
                for j in 0..=(density - i) {
                    out.push(vec![i as f64 / d, j as f64 / d, (density - i - j) as f64 / d]);
                }
            }
            out
        }
        _ => unreachable!("grid only used for k ≤ 3"),
    }
}

fn dirichlet_uniform(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn golden_section(mut a: f64, mut b: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// The affine parameterization of the 3×3 doubly stochastic matrices by
/// `ω ∈ ℝ⁴`.
pub fn birkhoff_map(omega: &[f64; 4]) -> Matrix {
    let [w1, w2, w3, w4] = *omega;
    Matrix::from_row_slice(
        3,
        3,
        &[
            w1,
            w2,
            1.0 - w1 - w2,
            w3,
            w4,
            1.0 - w3 - w4,
            1.0 - w1 - w3,
            1.0 - w2 - w4,
            w1 + w2 + w3 + w4 - 1.0,
        ],
    )
}

/// Membership in the parameter polytope whose image under [`birkhoff_map`]
/// is the Birkhoff polytope.
pub fn birkhoff_omega_contains(omega: &[f64; 4], tol: f64) -> bool {
    let [w1, w2, w3, w4] = *omega;
    omega.iter().all(|&w| w >= -tol)
        && w1 + w2 <= 1.0 + tol
        && w1 + w3 <= 1.0 + tol
        && w2 + w4 <= 1.0 + tol
        && w3 + w4 <= 1.0 + tol
        && w1 + w2 + w3 + w4 >= 1.0 - tol
}

/// The six 3×3 permutation matrices (vertices of the Birkhoff polytope).
pub fn birkhoff_vertices() -> Vec<Matrix> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| Matrix::from_fn(3, 3, |i, j| if p[i] == j { 1.0 } else { 0.0 }))
        .collect()
}
