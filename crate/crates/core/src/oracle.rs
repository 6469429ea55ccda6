//! Reference distances to the solution set and sampled error-bound ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Matrix, Vector};
use crate::problem::Problem;
use crate::residual::residual;
use crate::solver::{project_system, PolishOutcome};

/// Largest grid the fallback will build.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    /// Dykstra projection onto the assembled halfspace system.
    Exact,
    /// Nearest member of a grid over a box.
    Grid,
}

/// Distance oracle for the solution set of one problem. Construction runs
/// the emptiness check (exact path) or enumerates the grid members once.
#[derive(Debug, Clone)]
pub struct SolvOracle<'a> {
    problem: &'a Problem,
    kind: OracleKind,
}

#[derive(Debug, Clone)]
enum OracleKind {
    Exact { g: Matrix, h: Vector },
    Empty,
    Grid { members: Vec<Vector>, step: f64 },
}

impl<'a> SolvOracle<'a> {
    /// Exact path for polyhedral `C` and `Q`; otherwise a grid over
    /// `[−10, 10]ⁿ` with step `10/500` when `n ≤ 3`.
    pub fn new(p: &'a Problem) -> Result<Self> {
        if p.c.is_polyhedral() && p.q.is_polyhedral() {
            Self::exact(p)
        } else {
            Self::grid(p, 10.0, None)
        }
    }

    pub fn exact(p: &'a Problem) -> Result<Self> {
        let kind = match p.solution_system()? {
            None => OracleKind::Empty,
            Some((g, h)) => match project_system(&g, &h, &Vector::zeros(p.n()), p) {
                PolishOutcome::LikelyEmpty { .. } => OracleKind::Empty,
                PolishOutcome::Exact { .. } => OracleKind::Exact { g, h },
            },
        };
        Ok(Self { problem: p, kind })
    }

    /// Grid over `[−radius, radius]ⁿ` with the given step (default
    /// `radius/500`), coarsened if needed to stay under [`MAX_GRID_POINTS`].
    /// Members are grid points with residual at most `tol_feas`.
    pub fn grid(p: &'a Problem, radius: f64, step: Option<f64>) -> Result<Self> {
        let n = p.n();
        if n > 3 {
            return Err(Error::Unsupported {
                op: "grid distance oracle",
                variant: format!("dimension {n}"),
                reason: "grid fallback needs n ≤ 3".into(),
            });
        }
        if !(radius > 0.0) {
            return Err(Error::Precondition("grid radius must be positive".into()));
        }
        let mut step = step.unwrap_or(radius / 500.0);
        let per_axis = |s: f64| 2 * (radius / s).floor() as usize + 1;
        while per_axis(step).pow(n as u32) > MAX_GRID_POINTS {
            step *= 1.1;
        }
        let half = (radius / step).floor() as i64;
        let side = (2 * half + 1) as usize;
        let total = side.pow(n as u32);
        let members: Vec<Vector> = (0..total)
            .into_par_iter()
            .filter_map(|idx| {
                let mut rest = idx;
                let x = Vector::from_fn(n, |_, _| {
                    let k = (rest % side) as i64 - half;
                    rest /= side;
                    k as f64 * step
                });
                match residual(p, &x) {
                    Ok(r) if r.value <= p.tol.tol_feas => Some(Ok(x)),
                    Ok(_) => None,
                    Err(e) => Some(Err(e)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let kind = if members.is_empty() { OracleKind::Empty } else { OracleKind::Grid { members, step } };
        Ok(Self { problem: p, kind })
    }

    pub fn method(&self) -> OracleMethod {
        match self.kind {
            OracleKind::Grid { .. } => OracleMethod::Grid,
            _ => OracleMethod::Exact,
        }
    }

    pub fn grid_step(&self) -> Option<f64> {
        match self.kind {
            OracleKind::Grid { step, .. } => Some(step),
            _ => None,
        }
    }

    pub fn empty_suspected(&self) -> bool {
        matches!(self.kind, OracleKind::Empty)
    }

    /// `dist(x, Solv)`, `+∞` when the set looks empty.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        self.problem.check_point(x)?;
        Ok(match &self.kind {
            OracleKind::Empty => f64::INFINITY,
            OracleKind::Exact { g, h } => match project_system(g, h, x, self.problem) {
                PolishOutcome::Exact { distance, .. } => distance,
                PolishOutcome::LikelyEmpty { .. } => f64::INFINITY,
            },
            OracleKind::Grid { members, .. } => {
                members.iter().map(|m| (m - x).norm()).fold(f64::INFINITY, f64::min)
            }
        })
    }
}

/// Distance from `x` to the solution set; see [`SolvOracle`].
pub fn solv_distance(p: &Problem, x: &Vector) -> Result<f64> {
    SolvOracle::new(p)?.distance(x)
}

/// Distance from `x` to `{y : Aᵢy ∈ Q ∀i}` (polyhedral `Q`).
pub fn preimage_distance(p: &Problem, x: &Vector) -> Result<f64> {
    p.check_point(x)?;
    let Some((g, h)) = p.preimage_system()? else {
        return Ok(f64::INFINITY);
    };
    Ok(match project_system(&g, &h, x, p) {
        PolishOutcome::Exact { distance, .. } => distance,
        PolishOutcome::LikelyEmpty { .. } => f64::INFINITY,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTau {
    pub sup_ratio: f64,
    #[serde(with = "crate::geometry::serde_vec")]
    pub argmax_point: Vector,
    /// Raw samples drawn.
    pub samples: usize,
    /// Samples with positive residual.
    pub evaluated: usize,
    pub seed: u64,
    pub solv_empty_suspected: bool,
    pub method: OracleMethod,
}

/// Uniform point of `[−r, r]ⁿ` for sample `i`; stream `i` of the seed, so a
/// longer run extends a shorter one.
pub fn box_sample(n: usize, radius: f64, seed: u64, i: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    Vector::from_fn(n, |_, _| rng.gen_range(-radius..=radius))
}

/// `sup dist(x, Solv)/p_U(x)` over seeded box samples with `p_U(x) > tol_feas`.
pub fn empirical_tau(p: &Problem, samples: usize, box_radius: f64, seed: u64) -> Result<EmpiricalTau> {
    let oracle = SolvOracle::new(p)?;
    empirical_tau_with(p, &oracle, samples, box_radius, seed)
}

pub fn empirical_tau_with(
    p: &Problem,
    oracle: &SolvOracle<'_>,
    samples: usize,
    box_radius: f64,
    seed: u64,
) -> Result<EmpiricalTau> {
    if !(box_radius > 0.0) {
        return Err(Error::Precondition("box radius must be positive".into()));
    }
    let ratios: Vec<Result<Option<(f64, Vector)>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = box_sample(p.n(), box_radius, seed, i);
            let r = residual(p, &x)?;
            if r.value <= p.tol.tol_feas {
                return Ok(None);
            }
            Ok(Some((oracle.distance(&x)? / r.value, x)))
        })
        .collect();
    let mut evaluated = 0;
    let mut best: Option<(f64, Vector)> = None;
    for r in ratios {
        if let Some((ratio, x)) = r? {
            evaluated += 1;
            if best.as_ref().is_none_or(|b| ratio > b.0) {
                best = Some((ratio, x));
            }
        }
    }
    let Some((sup_ratio, argmax_point)) = best else {
        return Err(Error::NoSamples { drawn: samples });
    };
    Ok(EmpiricalTau {
        sup_ratio,
        argmax_point,
        samples,
        evaluated,
        seed,
        solv_empty_suspected: oracle.empty_suspected(),
        method: oracle.method(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexSet;
    use crate::uncertainty::UncertaintySet;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn mat(r: usize, c: usize, xs: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, xs)
    }

    fn problem(c: ConvexSet, q: ConvexSet, verts: Vec<Matrix>) -> Problem {
        Problem::new(c, q, UncertaintySet::new(verts).unwrap()).unwrap()
    }

    fn shear() -> Problem {
        problem(
            ConvexSet::NonnegOrthant { dim: 2 },
            ConvexSet::NonposOrthant { dim: 2 },
            vec![mat(2, 2, &[1.0, -1.0, 0.0, 1.0]), Matrix::identity(2, 2)],
        )
    }

    fn swap() -> Problem {
        problem(
            ConvexSet::WholeSpace { dim: 2 },
            ConvexSet::NonposOrthant { dim: 2 },
            vec![Matrix::identity(2, 2), mat(2, 2, &[0.0, 1.0, 1.0, 0.0])],
        )
    }

    fn empty() -> Problem {
        problem(
            ConvexSet::Halfspaces { g: mat(1, 1, &[-1.0]), h: v(&[-1.0]) },
            ConvexSet::Halfspaces { g: mat(3, 2, &[-1.0, 0.0, 0.0, 1.0, 0.0, -1.0]), h: v(&[0.0, 0.0, 0.0]) },
            vec![mat(2, 1, &[1.0, 1.0]), mat(2, 1, &[1.0, -1.0])],
        )
    }

    #[test]
    fn exact_distances() {
        assert_abs_diff_eq!(solv_distance(&shear(), &v(&[1.0, 1.0])).unwrap(), 2f64.sqrt(), epsilon = 1e-9);
        assert_eq!(solv_distance(&swap(), &v(&[-1.0, -1.0])).unwrap(), 0.0);
        let p = empty();
        let o = SolvOracle::new(&p).unwrap();
        assert!(o.empty_suspected());
        assert_eq!(o.distance(&v(&[0.3])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn grid_agrees_with_exact() {
        let p = shear();
        let exact = SolvOracle::exact(&p).unwrap();
        let grid = SolvOracle::grid(&p, 2.0, Some(0.01)).unwrap();
        assert_eq!(grid.method(), OracleMethod::Grid);
        for x in [v(&[1.0, 1.0]), v(&[-0.5, 0.3]), v(&[0.2, -1.7])] {
            let a = exact.distance(&x).unwrap();
            let b = grid.distance(&x).unwrap();
            assert!((a - b).abs() <= 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_fallback_for_ball() {
        let p = problem(
            ConvexSet::Ball { center: v(&[0.0, 0.0]), radius: 1.0 },
            ConvexSet::NonposOrthant { dim: 2 },
            vec![Matrix::identity(2, 2)],
        );
        let o = SolvOracle::new(&p).unwrap();
        assert_eq!(o.method(), OracleMethod::Grid);
        // Solv is the quarter disc in ℝ²₋
        let d = o.distance(&v(&[1.0, 1.0])).unwrap();
        assert!((d - 2f64.sqrt()).abs() <= 2.0 * o.grid_step().unwrap());
    }

    #[test]
    fn grid_rejects_high_dimension() {
        let p = problem(
            ConvexSet::Ball { center: Vector::zeros(4), radius: 1.0 },
            ConvexSet::NonposOrthant { dim: 4 },
            vec![Matrix::identity(4, 4)],
        );
        assert!(matches!(SolvOracle::new(&p), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn empirical_tau_examples() {
        let t = empirical_tau(&swap(), 2000, 10.0, 1).unwrap();
        assert!(t.sup_ratio <= 2f64.sqrt() + 1e-6);
        assert!(!t.solv_empty_suspected);
        let t = empirical_tau(&empty(), 100, 10.0, 1).unwrap();
        assert!(t.solv_empty_suspected);
        assert_eq!(t.sup_ratio, f64::INFINITY);
    }

    #[test]
    fn empirical_tau_extends_with_samples() {
        let p = shear();
        let a = empirical_tau(&p, 200, 5.0, 9).unwrap();
        let b = empirical_tau(&p, 400, 5.0, 9).unwrap();
        assert!(b.sup_ratio >= a.sup_ratio);
    }

    #[test]
    fn all_feasible_samples_error() {
        let p = problem(ConvexSet::WholeSpace { dim: 1 }, ConvexSet::WholeSpace { dim: 1 }, vec![Matrix::identity(1, 1)]);
        assert!(matches!(empirical_tau(&p, 20, 1.0, 0), Err(Error::NoSamples { drawn: 20 })));
    }

    #[test]
    fn preimage_distance_of_shear() {
        // preimage of ℝ²₋ under both vertices: x₂ ≤ 0 and x₁ ≤ x₂
        let p = shear();
        assert_abs_diff_eq!(preimage_distance(&p, &v(&[1.0, 0.0])).unwrap(), 1.0, epsilon = 1e-9);
        assert_eq!(preimage_distance(&p, &v(&[-2.0, -1.0])).unwrap(), 0.0);
    }
}
