//! Built-in instances with known constants and a checking pipeline for each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certify::{check_slater, core_bound_value, core_error_bound, estimate_c_hat_with, CHatConfig, SlaterConfig};
use crate::error::Result;
use crate::geometry::{ConvexSet, Matrix, Vector};
use crate::oracle::{box_sample, empirical_tau, preimage_distance, SolvOracle};
use crate::problem::Problem;
use crate::residual::{residual, RegionTag};
use crate::solver::{polish_polyhedral, solve, solve_with_fallback, PolishOutcome, SolveConfig, Verdict};
use crate::uncertainty::{birkhoff_map, birkhoff_omega_contains, birkhoff_vertices, UncertaintySet};

pub const BUILTIN_NAMES: [&str; 6] = [
    "ex2_1_birkhoff",
    "ex3_1_infeasible",
    "ex3_2_tau1",
    "ex3_3_sqrt2",
    "ex4_1_sur_fail",
    "ex4_2_polyhedral",
];

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// A value stated with the worked example.
    Reference,
    /// A value computed independently (by hand or brute force).
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub basis: Basis,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, expected: &str, basis: Basis, passed: bool) -> Self {
        Self { name: name.into(), value, expected: expected.into(), basis, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub instance: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Reports produced along the way (solver, certificates, oracles).
    pub artifacts: Value,
    pub passed: bool,
}

/// Sample sizes used by the pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub seed: u64,
    pub c_hat_samples: usize,
    pub tau_samples: usize,
    pub box_radius: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { seed: 0, c_hat_samples: 20_000, tau_samples: 10_000, box_radius: 10.0 }
    }
}

fn mat(r: usize, c: usize, xs: &[f64]) -> Matrix {
    Matrix::from_row_slice(r, c, xs)
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

fn build(c: ConvexSet, q: ConvexSet, verts: Vec<Matrix>) -> Problem {
    Problem::new(c, q, UncertaintySet::new(verts).expect("built-in vertices are valid")).expect("built-in data is valid")
}

/// One-line description of a built-in instance.
pub fn summary(name: &str) -> Option<&'static str> {
    Some(match name {
        "ex2_1_birkhoff" => "3×3 doubly stochastic uncertainty, C = ℝ³, Q = ℝ³₋",
        "ex3_1_infeasible" => "n = 1, two vertices whose unit subgradients cancel; no robust solution",
        "ex3_2_tau1" => "n = 1, C = [0, ∞), Q = {y₂ ≤ 0}; error bound with τ = 1",
        "ex3_3_sqrt2" => "identity/swap pair, C = ℝ², Q = ℝ²₋; residual bound with √2",
        "ex4_1_sur_fail" => "identity/swap pair: the midpoint matrix is singular",
        "ex4_2_polyhedral" => "shear/identity pair, C = ℝ²₊, Q = ℝ²₋; solution set {0}",
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Option<Problem> {
    let swap = || vec![Matrix::identity(2, 2), mat(2, 2, &[0.0, 1.0, 1.0, 0.0])];
    Some(match name {
        "ex2_1_birkhoff" => build(
            ConvexSet::WholeSpace { dim: 3 },
            ConvexSet::NonposOrthant { dim: 3 },
            birkhoff_vertices(),
        ),
        "ex3_1_infeasible" => build(
            ConvexSet::Halfspaces { g: mat(1, 1, &[-1.0]), h: v(&[-1.0]) },
            ConvexSet::Halfspaces { g: mat(3, 2, &[-1.0, 0.0, 0.0, 1.0, 0.0, -1.0]), h: v(&[0.0, 0.0, 0.0]) },
            vec![mat(2, 1, &[1.0, 1.0]), mat(2, 1, &[1.0, -1.0])],
        ),
        "ex3_2_tau1" => build(
            ConvexSet::NonnegOrthant { dim: 1 },
            ConvexSet::Halfspaces { g: mat(1, 2, &[0.0, 1.0]), h: v(&[0.0]) },
            vec![mat(2, 1, &[1.0, 0.0]), mat(2, 1, &[1.0, 1.0])],
        ),
        "ex3_3_sqrt2" | "ex4_1_sur_fail" => {
            build(ConvexSet::WholeSpace { dim: 2 }, ConvexSet::NonposOrthant { dim: 2 }, swap())
        }
        "ex4_2_polyhedral" => build(
            ConvexSet::NonnegOrthant { dim: 2 },
            ConvexSet::NonposOrthant { dim: 2 },
            vec![mat(2, 2, &[1.0, -1.0, 0.0, 1.0]), Matrix::identity(2, 2)],
        ),
        _ => return None,
    })
}

/// Uniform sample of the parameter polytope of [`birkhoff_map`] by rejection
/// from `[0, 1]⁴`.
pub fn birkhoff_omega_sample(rng: &mut impl Rng) -> [f64; 4] {
    loop {
        let w: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        if birkhoff_omega_contains(&w, 0.0) {
            return w;
        }
    }
}

/// Largest deviation of row/column sums from 1 and smallest entry.
pub fn doubly_stochastic_defect(a: &Matrix) -> (f64, f64) {
    let mut dev: f64 = 0.0;
    for i in 0..a.nrows() {
        dev = dev.max((a.row(i).sum() - 1.0).abs());
    }
    for j in 0..a.ncols() {
        dev = dev.max((a.column(j).sum() - 1.0).abs());
    }
    (dev, a.min())
}

pub fn run_pipeline(name: &str, opts: &PipelineOptions) -> Result<Option<PipelineReport>> {
    let Some(p) = builtin(name) else {
        return Ok(None);
    };
    let (checks, artifacts) = match name {
        "ex2_1_birkhoff" => birkhoff_pipeline(&p, opts)?,
        "ex3_1_infeasible" => infeasible_pipeline(&p, opts)?,
        "ex3_2_tau1" => tau_one_pipeline(&p, opts)?,
        "ex3_3_sqrt2" => sqrt2_pipeline(&p, opts)?,
        "ex4_1_sur_fail" => sur_fail_pipeline(&p, opts)?,
        "ex4_2_polyhedral" => polyhedral_pipeline(&p, opts)?,
        _ => unreachable!("builtin() returned Some"),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(Some(PipelineReport { instance: name.into(), seed: opts.seed, checks, artifacts, passed }))
}

type Pipeline = (Vec<Check>, Value);

fn to_json<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

fn birkhoff_pipeline(p: &Problem, opts: &PipelineOptions) -> Result<Pipeline> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut dev, mut min_entry) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let (d, m) = doubly_stochastic_defect(&birkhoff_map(&birkhoff_omega_sample(&mut rng)));
        dev = dev.max(d);
        min_entry = min_entry.min(m);
    }
    let sur = p.u.sur_inf_estimate(20, 50, opts.seed);
    let report = solve(p, &SolveConfig { nontrivial_start: true, seed: opts.seed, ..Default::default() })?;
    let checks = vec![
        Check::new("row/column sum deviation over 100 samples", dev, "≤ 1e-12", Basis::Reference, dev <= 1e-12),
        Check::new("smallest entry over 100 samples", min_entry, "≥ -1e-12", Basis::Reference, min_entry >= -1e-12),
        Check::new("sur estimate over U", sur.value, "≤ 1e-3 (barycenter has rank one)", Basis::Derived, sur.value <= 1e-3),
        Check::new(
            "solver from a random unit start",
            report.p_best,
            "feasible",
            Basis::Derived,
            report.is_feasible() && report.x_best.norm() > 0.0,
        ),
    ];
    Ok((checks, json!({ "sur": to_json(&sur), "solve": to_json(&report) })))
}

fn infeasible_pipeline(p: &Problem, opts: &PipelineOptions) -> Result<Pipeline> {
    let report = solve_with_fallback(p, &SolveConfig { max_iter: 5000, seed: opts.seed, ..Default::default() }, 0.5)?;
    let floor = match report.verdict {
        Verdict::ResidualFloor { p_floor } => p_floor,
        Verdict::Feasible => 0.0,
    };
    let cert = estimate_c_hat_with(
        p,
        &CHatConfig { samples: opts.c_hat_samples, box_radius: opts.box_radius, seed: opts.seed, ..Default::default() },
    )?;
    let c_hat = cert.c_hat.unwrap_or(f64::NAN);
    let hits = (0..opts.c_hat_samples)
        .filter(|&i| {
            let x = box_sample(1, opts.box_radius, opts.seed, i)[0];
            x > 0.0 && x < 1.0
        })
        .count();
    let oracle = SolvOracle::new(p)?;
    let slater = check_slater(p, &SlaterConfig { seed: opts.seed, ..Default::default() })?;
    let checks = vec![
        Check::new("residual floor", floor, "residual-floor verdict in [0.95, 1.05]", Basis::Derived, (0.95..=1.05).contains(&floor)),
        Check::new("samples inside (0, 1)", hits as f64, "> 0", Basis::Derived, hits > 0),
        Check::new("c_hat", c_hat, "≤ 1e-9", Basis::Reference, c_hat <= 1e-9),
        Check::new(
            "solution set empty",
            oracle.empty_suspected() as u8 as f64,
            "empty",
            Basis::Reference,
            oracle.empty_suspected(),
        ),
        Check::new(
            "Slater point",
            slater.eta,
            "none (int Q = ∅)",
            Basis::Reference,
            !slater.found && slater.reason.as_deref() == Some("int Q = ∅"),
        ),
    ];
    Ok((checks, json!({ "solve": to_json(&report), "c_hat": to_json(&cert), "slater": to_json(&slater) })))
}

fn tau_one_pipeline(p: &Problem, opts: &PipelineOptions) -> Result<Pipeline> {
    let cert = estimate_c_hat_with(
        p,
        &CHatConfig {
            samples: opts.c_hat_samples,
            box_radius: opts.box_radius,
            seed: opts.seed,
            regions: Some(vec![RegionTag::R2]),
            ..Default::default()
        },
    )?;
    let c_hat = cert.c_hat.unwrap_or(f64::NAN);
    let tau = empirical_tau(p, opts.tau_samples, opts.box_radius, opts.seed)?;
    let checks = vec![
        Check::new("c_hat over R2 samples", c_hat, "≤ 1e-9", Basis::Reference, c_hat <= 1e-9),
        Check::new("empirical tau", tau.sup_ratio, "≤ 1 + 1e-6", Basis::Reference, tau.sup_ratio <= 1.0 + 1e-6),
    ];
    Ok((checks, json!({ "c_hat": to_json(&cert), "empirical_tau": to_json(&tau) })))
}

/// Largest deviation of the residual from its closed form on a 100×100 grid
/// over `[−5, 5]²` (points on the axes excluded).
pub fn swap_closed_form_error(p: &Problem) -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..100 {
        for j in 0..100 {
            let x = v(&[-5.0 + 10.0 * (i as f64 + 0.5) / 100.0, -5.0 + 10.0 * (j as f64 + 0.5) / 100.0]);
            let expected = match (x[0] > 0.0, x[1] > 0.0) {
                (true, true) => x.norm(),
                (false, false) => 0.0,
                _ => x[0].max(x[1]),
            };
            worst = worst.max((residual(p, &x)?.value - expected).abs());
            count += 1;
        }
    }
    Ok((worst, count))
}

fn sqrt2_pipeline(p: &Problem, opts: &PipelineOptions) -> Result<Pipeline> {
    let (closed_form_err, _) = swap_closed_form_error(p)?;
    let cert = estimate_c_hat_with(
        p,
        &CHatConfig {
            samples: opts.c_hat_samples,
            box_radius: opts.box_radius,
            seed: opts.seed,
            regions: Some(vec![RegionTag::R3]),
            ..Default::default()
        },
    )?;
    let c_hat = cert.c_hat.unwrap_or(f64::NAN);
    let tau = empirical_tau(p, opts.tau_samples, opts.box_radius, opts.seed)?;
    let report = solve(p, &SolveConfig { x0: Some(v(&[1.0, 1.0])), seed: opts.seed, ..Default::default() })?;
    let target = 1.0 / 2f64.sqrt() - 1e-6;
    let checks = vec![
        Check::new("residual closed form error", closed_form_err, "≤ 1e-9", Basis::Reference, closed_form_err <= 1e-9),
        Check::new("c_hat over R3 samples", c_hat, "≥ 1/√2 - 1e-6", Basis::Reference, c_hat >= target),
        Check::new("empirical tau", tau.sup_ratio, "≤ √2 + 1e-6", Basis::Reference, tau.sup_ratio <= 2f64.sqrt() + 1e-6),
        Check::new("solver from (1, 1)", report.p_best, "feasible", Basis::Derived, report.is_feasible()),
    ];
    Ok((checks, json!({ "c_hat": to_json(&cert), "empirical_tau": to_json(&tau), "solve": to_json(&report) })))
}

fn sur_fail_pipeline(p: &Problem, opts: &PipelineOptions) -> Result<Pipeline> {
    let est = p.u.sur_inf_estimate(1000, 50, opts.seed);
    let w_err = (est.witness_weights[0] - 0.5).abs();
    let vertex_sur = p.u.vertices().iter().map(crate::geometry::sur).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::new("sur estimate over U", est.value, "≤ 1e-3", Basis::Reference, est.value <= 1e-3),
        Check::new("witness weight distance from 1/2", w_err, "≤ 1e-2", Basis::Reference, w_err <= 1e-2),
        Check::new("smallest vertex sur", vertex_sur, "= 1 (both vertices orthogonal)", Basis::Derived, (vertex_sur - 1.0).abs() <= 1e-9),
    ];
    Ok((checks, json!({ "sur": to_json(&est) })))
}

fn polyhedral_pipeline(p: &Problem, opts: &PipelineOptions) -> Result<Pipeline> {
    let est = p.u.sur_inf_estimate(1000, 0, opts.seed);
    let slater = check_slater(p, &SlaterConfig { seed: opts.seed, ..Default::default() })?;
    let mut checks = vec![
        Check::new("min sur on a 1e-3 grid", est.value, "≥ 0.5", Basis::Reference, est.value >= 0.5),
        Check::new("Slater margin", slater.eta, "> 0", Basis::Derived, slater.found),
    ];
    let mut artifacts = json!({ "sur": to_json(&est), "slater": to_json(&slater) });
    if slater.found {
        let cert = core_error_bound(p, &slater)?;
        let mut worst: f64 = 0.0;
        for i in 0..opts.tau_samples {
            let x = box_sample(p.n(), opts.box_radius, opts.seed, i);
            let lhs = preimage_distance(p, &x)?;
            let rhs = core_bound_value(p, slater.eta, &x)? * (1.0 + 1e-6);
            worst = worst.max(lhs - rhs);
        }
        checks.push(Check::new("core bound worst excess", worst, "≤ 0", Basis::Derived, worst <= 0.0));
        artifacts["core_bound"] = to_json(&cert);
    }
    let tau = empirical_tau(p, opts.tau_samples, opts.box_radius, opts.seed)?;
    checks.push(Check::new("empirical tau", tau.sup_ratio, "≤ √2 + 1e-6", Basis::Reference, tau.sup_ratio <= 2f64.sqrt() + 1e-6));
    let polished = polish_polyhedral(p, &v(&[1.0, 1.0]))?;
    let (x_norm, dist) = match &polished {
        PolishOutcome::Exact { x_exact, distance } => (x_exact.norm(), *distance),
        PolishOutcome::LikelyEmpty { .. } => (f64::INFINITY, f64::INFINITY),
    };
    checks.push(Check::new(
        "distance from (1, 1) to the solution set",
        dist,
        "= √2 (projection at the origin)",
        Basis::Reference,
        x_norm <= 1e-8 && (dist - 2f64.sqrt()).abs() <= 1e-8,
    ));
    artifacts["empirical_tau"] = to_json(&tau);
    artifacts["polish"] = to_json(&polished);
    Ok((checks, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_round_trips() {
        for name in BUILTIN_NAMES {
            let p = builtin(name).unwrap();
            assert!(summary(name).is_some());
            assert_eq!(Problem::from_json(&p.to_json()).unwrap(), p, "{name}");
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn birkhoff_samples_stay_in_polytope() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w = birkhoff_omega_sample(&mut rng);
            assert!(birkhoff_omega_contains(&w, 0.0));
            let (dev, min) = doubly_stochastic_defect(&birkhoff_map(&w));
            assert!(dev <= 1e-12 && min >= -1e-12);
        }
    }

    #[test]
    fn small_pipelines_pass() {
        let opts = PipelineOptions { c_hat_samples: 500, tau_samples: 500, ..Default::default() };
        for name in ["ex2_1_birkhoff", "ex3_1_infeasible", "ex3_3_sqrt2", "ex4_1_sur_fail", "ex4_2_polyhedral"] {
            let r = run_pipeline(name, &opts).unwrap().unwrap();
            assert!(r.passed, "{name}: {:#?}", r.checks);
        }
    }
}
