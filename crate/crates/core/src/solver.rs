//! Subgradient descent on the residual and an exact polishing step for
//! polyhedral instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::active_set::{project_halfspaces, ActiveSetOutcome};
use crate::geometry::dykstra::dykstra;
use crate::geometry::Vector;
use crate::problem::Problem;
use crate::residual::{residual, residual_and_subgradient, RegionTag};

/// Violation above which a non-converged Dykstra run is reported as empty.
pub const LIKELY_EMPTY_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    /// `s = p(x)/‖g‖²`, aiming at the value 0.
    Polyak,
    /// `s = s0/√(t+1)` along `g/‖g‖`.
    Diminishing { s0: f64 },
}

impl std::str::FromStr for StepRule {
    type Err = String;

    /// `polyak` or `dim:<s0>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "polyak" {
            return Ok(StepRule::Polyak);
        }
        if let Some(rest) = s.strip_prefix("dim:") {
            let s0: f64 = rest.parse().map_err(|_| format!("bad step size {rest:?}"))?;
            if !(s0 > 0.0 && s0.is_finite()) {
                return Err(format!("step size must be positive, got {s0}"));
            }
            return Ok(StepRule::Diminishing { s0 });
        }
        Err(format!("unknown step rule {s:?} (expected `polyak` or `dim:<s0>`)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub max_iter: usize,
    pub tol_feas: f64,
    pub step_rule: StepRule,
    pub seed: u64,
    /// Starting point; `None` means the origin (see `nontrivial_start`).
    pub x0: Option<Vector>,
    /// When the origin is feasible and no `x0` is given, start from a seeded
    /// random point of the unit sphere instead.
    pub nontrivial_start: bool,
    /// Record the best value every this many iterations (0 picks a stride
    /// giving about 1000 entries).
    pub trace_stride: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol_feas: 1e-9,
            step_rule: StepRule::Polyak,
            seed: 0,
            x0: None,
            nontrivial_start: false,
            trace_stride: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Verdict {
    Feasible,
    ResidualFloor { p_floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(with = "crate::geometry::serde_vec")]
    pub x_best: Vector,
    pub p_best: f64,
    pub region_best: RegionTag,
    pub iterations: usize,
    /// `(iteration, best value so far)`.
    pub trace: Vec<(usize, f64)>,
    pub verdict: Verdict,
}

impl SolveReport {
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return v / norm;
        }
    }
}

fn starting_point(p: &Problem, cfg: &SolveConfig) -> Result<Vector> {
    if let Some(x0) = &cfg.x0 {
        p.check_point(x0)?;
        return Ok(x0.clone());
    }
    let origin = Vector::zeros(p.n());
    if cfg.nontrivial_start && residual(p, &origin)?.value <= cfg.tol_feas {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        return Ok(random_unit(&mut rng, p.n()));
    }
    Ok(origin)
}

pub fn solve(p: &Problem, cfg: &SolveConfig) -> Result<SolveReport> {
    if cfg.max_iter == 0 {
        return Err(Error::Precondition("max_iter must be at least 1".into()));
    }
    if let StepRule::Diminishing { s0 } = cfg.step_rule {
        if !(s0 > 0.0) {
            return Err(Error::Precondition("s0 must be positive".into()));
        }
    }
    let stride = if cfg.trace_stride == 0 { (cfg.max_iter / 1000).max(1) } else { cfg.trace_stride };

    let mut x = starting_point(p, cfg)?;
    let (mut ev, mut g) = residual_and_subgradient(p, &x)?;
    let mut x_best = x.clone();
    let mut ev_best = ev.clone();
    let mut trace = vec![(0, ev.value)];
    let mut t = 0;
    let mut stalled = false;

    while t < cfg.max_iter && ev_best.value > cfg.tol_feas {
        let gn2 = g.norm_squared();
        if gn2 == 0.0 {
            // 0 ∈ ∂p at x: x minimizes p and the floor is positive
            stalled = true;
            break;
        }
        let step = match cfg.step_rule {
            StepRule::Polyak => ev.value / gn2,
            StepRule::Diminishing { s0 } => s0 / ((t + 1) as f64).sqrt() / gn2.sqrt(),
        };
        x.axpy(-step, &g, 1.0);
        t += 1;
        (ev, g) = residual_and_subgradient(p, &x)?;
        if ev.value < ev_best.value {
            ev_best = ev.clone();
            x_best.copy_from(&x);
        }
        if t % stride == 0 {
            trace.push((t, ev_best.value));
        }
    }
    if trace.last().map(|e| e.0) != Some(t) {
        trace.push((t, ev_best.value));
    }
    let verdict = if ev_best.value <= cfg.tol_feas {
        Verdict::Feasible
    } else {
        let _ = stalled;
        Verdict::ResidualFloor { p_floor: ev_best.value }
    };
    Ok(SolveReport {
        x_best,
        p_best: ev_best.value,
        region_best: ev_best.region,
        iterations: t,
        trace,
        verdict,
    })
}

/// Polyak first; if that ends above the target, continue with the
/// diminishing rule from the best point and keep the better report.
pub fn solve_with_fallback(p: &Problem, cfg: &SolveConfig, s0: f64) -> Result<SolveReport> {
    let first = solve(p, &SolveConfig { step_rule: StepRule::Polyak, ..cfg.clone() })?;
    if first.is_feasible() {
        return Ok(first);
    }
    let second = solve(
        p,
        &SolveConfig {
            step_rule: StepRule::Diminishing { s0 },
            x0: Some(first.x_best.clone()),
            ..cfg.clone()
        },
    )?;
    let iterations = first.iterations + second.iterations;
    let mut best = if second.p_best < first.p_best { second } else { first };
    best.iterations = iterations;
    Ok(best)
}

/// Independent runs from `k` starts, reduced by smallest `p_best` (ties to
/// the lowest start index). Start 0 uses `cfg` as given; start `i > 0` uses a
/// seeded random point in the unit ball scaled by `1 + ‖x0‖`.
pub fn solve_multistart(p: &Problem, cfg: &SolveConfig, k: usize) -> Result<SolveReport> {
    let k = k.max(1);
    let base = starting_point(p, cfg)?;
    let scale = 1.0 + base.norm();
    let reports: Vec<Result<SolveReport>> = (0..k)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return solve(p, &SolveConfig { x0: Some(base.clone()), ..cfg.clone() });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let x0 = random_unit(&mut rng, p.n()) * (scale * rng.gen::<f64>());
            solve(p, &SolveConfig { x0: Some(x0), seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() })
        })
        .collect();
    let mut best: Option<SolveReport> = None;
    for r in reports {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.p_best < b.p_best) {
            best = Some(r);
        }
    }
    Ok(best.expect("k ≥ 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolishOutcome {
    /// Projection onto the solution set and its distance from the input.
    Exact {
        #[serde(with = "crate::geometry::serde_vec")]
        x_exact: Vector,
        distance: f64,
    },
    /// The halfspace system appears to have no common point.
    LikelyEmpty { violation: f64, cycles: usize },
}

/// Project `x` onto the polyhedral solution set `{x ∈ C : Aᵢx ∈ Q ∀i}`.
pub fn polish_polyhedral(p: &Problem, x: &Vector) -> Result<PolishOutcome> {
    p.check_point(x)?;
    let Some((g, h)) = p.solution_system()? else {
        return Ok(PolishOutcome::LikelyEmpty { violation: f64::INFINITY, cycles: 0 });
    };
    Ok(project_system(&g, &h, x, p))
}

fn max_violation(g: &crate::geometry::Matrix, h: &Vector, y: &Vector) -> f64 {
    (0..g.nrows()).map(|j| (g.row(j).transpose().dot(y) - h[j]) / g.row(j).norm()).fold(0.0, f64::max)
}

/// Projection onto `{y : Gy ≤ h}` by the exact active-set method, with
/// Dykstra as the fallback when that stalls.
pub(crate) fn project_system(g: &crate::geometry::Matrix, h: &Vector, x: &Vector, p: &Problem) -> PolishOutcome {
    if g.nrows() == 0 {
        return PolishOutcome::Exact { x_exact: x.clone(), distance: 0.0 };
    }
    match project_halfspaces(g, h, x, p.tol.tol_feas) {
        ActiveSetOutcome::Projected { point, .. } => {
            let distance = (x - &point).norm();
            return PolishOutcome::Exact { x_exact: point, distance };
        }
        ActiveSetOutcome::Infeasible { point, steps, .. } => {
            return PolishOutcome::LikelyEmpty { violation: max_violation(g, h, &point), cycles: steps };
        }
        ActiveSetOutcome::Stalled { .. } => {}
    }
    let out = dykstra(g, h, x, p.tol.tol_proj, p.tol.tol_feas, p.tol.max_iter);
    if !out.converged && out.max_violation > LIKELY_EMPTY_GAP {
        return PolishOutcome::LikelyEmpty { violation: out.max_violation, cycles: out.cycles };
    }
    let distance = (x - &out.point).norm();
    PolishOutcome::Exact { x_exact: out.point, distance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexSet, Matrix};
    use crate::uncertainty::UncertaintySet;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn swap_instance() -> Problem {
        Problem::new(
            ConvexSet::WholeSpace { dim: 2 },
            ConvexSet::NonposOrthant { dim: 2 },
            UncertaintySet::new(vec![Matrix::identity(2, 2), Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])])
                .unwrap(),
        )
        .unwrap()
    }

    fn shear_instance() -> Problem {
        Problem::new(
            ConvexSet::NonnegOrthant { dim: 2 },
            ConvexSet::NonposOrthant { dim: 2 },
            UncertaintySet::new(vec![Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]), Matrix::identity(2, 2)])
                .unwrap(),
        )
        .unwrap()
    }

    fn empty_instance() -> Problem {
        Problem::new(
            ConvexSet::Halfspaces { g: Matrix::from_row_slice(1, 1, &[-1.0]), h: v(&[-1.0]) },
            ConvexSet::Halfspaces {
                g: Matrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 1.0, 0.0, -1.0]),
                h: v(&[0.0, 0.0, 0.0]),
            },
            UncertaintySet::new(vec![
                Matrix::from_row_slice(2, 1, &[1.0, 1.0]),
                Matrix::from_row_slice(2, 1, &[1.0, -1.0]),
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn step_rule_parsing() {
        assert_eq!("polyak".parse::<StepRule>().unwrap(), StepRule::Polyak);
        assert_eq!("dim:0.5".parse::<StepRule>().unwrap(), StepRule::Diminishing { s0: 0.5 });
        assert!("dim:-1".parse::<StepRule>().is_err());
        assert!("newton".parse::<StepRule>().is_err());
    }

    #[test]
    fn reaches_feasibility_from_positive_quadrant() {
        let p = swap_instance();
        let r = solve(&p, &SolveConfig { x0: Some(v(&[1.0, 1.0])), ..Default::default() }).unwrap();
        assert!(r.is_feasible());
        assert!(r.p_best <= 1e-9);
        assert!(r.x_best.iter().all(|&t| t <= 1e-9));
    }

    #[test]
    fn feasible_start_takes_no_iterations() {
        let p = swap_instance();
        let r = solve(&p, &SolveConfig { x0: Some(v(&[-1.0, -2.0])), ..Default::default() }).unwrap();
        assert!(r.is_feasible());
        assert_eq!(r.iterations, 0);
        assert_eq!(r.x_best, v(&[-1.0, -2.0]));
    }

    #[test]
    fn nontrivial_start_leaves_origin() {
        let p = swap_instance();
        let cfg = SolveConfig { nontrivial_start: true, seed: 7, ..Default::default() };
        let r = solve(&p, &cfg).unwrap();
        assert!(r.is_feasible());
        assert!(r.x_best.norm() > 0.0);
        assert_eq!(solve(&p, &cfg).unwrap(), r);
    }

    #[test]
    fn infeasible_instance_reports_floor() {
        let p = empty_instance();
        let r = solve_with_fallback(&p, &SolveConfig { max_iter: 2000, ..Default::default() }, 0.5).unwrap();
        match r.verdict {
            Verdict::ResidualFloor { p_floor } => assert!((0.95..=1.05).contains(&p_floor), "{p_floor}"),
            Verdict::Feasible => panic!("instance has no solution"),
        }
        // a minimizer of p stops immediately
        let r = solve(&p, &SolveConfig { x0: Some(v(&[0.5])), ..Default::default() }).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.verdict, Verdict::ResidualFloor { p_floor: 1.0 });
    }

    #[test]
    fn trace_is_monotone() {
        let p = shear_instance();
        let r = solve(
            &p,
            &SolveConfig {
                x0: Some(v(&[3.0, -2.0])),
                step_rule: StepRule::Diminishing { s0: 0.3 },
                max_iter: 500,
                trace_stride: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(r.p_best, residual(&p, &r.x_best).unwrap().value);
    }

    #[test]
    fn multistart_is_deterministic() {
        let p = shear_instance();
        let cfg = SolveConfig { max_iter: 300, x0: Some(v(&[2.0, 1.0])), ..Default::default() };
        let a = solve_multistart(&p, &cfg, 4).unwrap();
        let b = solve_multistart(&p, &cfg, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.p_best <= solve(&p, &cfg).unwrap().p_best);
    }

    #[test]
    fn polish_examples() {
        let p = shear_instance();
        match polish_polyhedral(&p, &v(&[1.0, 1.0])).unwrap() {
            PolishOutcome::Exact { x_exact, distance } => {
                assert!(x_exact.norm() <= 1e-8);
                assert!((distance - 2f64.sqrt()).abs() <= 1e-8);
            }
            other => panic!("{other:?}"),
        }
        match polish_polyhedral(&p, &v(&[0.0, 0.0])).unwrap() {
            PolishOutcome::Exact { x_exact, distance } => {
                assert_eq!(x_exact, v(&[0.0, 0.0]));
                assert_eq!(distance, 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            polish_polyhedral(&empty_instance(), &v(&[0.3])).unwrap(),
            PolishOutcome::LikelyEmpty { .. }
        ));
        let ball = Problem::new(
            ConvexSet::Ball { center: v(&[0.0]), radius: 1.0 },
            ConvexSet::NonposOrthant { dim: 1 },
            UncertaintySet::new(vec![Matrix::identity(1, 1)]).unwrap(),
        )
        .unwrap();
        assert!(matches!(polish_polyhedral(&ball, &v(&[0.3])), Err(Error::Unsupported { .. })));
    }
}
