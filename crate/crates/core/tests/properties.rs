mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_matrix, random_problem, random_set, random_vec, v, SetKind};
use robust_split::certify::{
    check_slater, core_bound_value, estimate_c_hat_with, local_bound, CHatConfig, SlaterConfig,
};
use robust_split::geometry::minnorm::{nnls, MinNormOptions};
use robust_split::instances::builtin;
use robust_split::oracle::{box_sample, preimage_distance, SolvOracle};
use robust_split::solver::{polish_polyhedral, solve, PolishOutcome, SolveConfig, StepRule};
use robust_split::{residual, ConvexSet, Problem, RegionTag, UncertaintySet, Vector};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polyhedral instance in the plane: orthant or halfspace `C` and `Q`
/// containing the origin, so the solution set is nonempty.
fn planar_polyhedral(r: &mut ChaCha8Rng) -> Problem {
    let m = r.gen_range(1..=3);
    let k = r.gen_range(1..=3);
    let c = match r.gen_range(0..3) {
        0 => ConvexSet::NonnegOrthant { dim: 2 },
        1 => ConvexSet::WholeSpace { dim: 2 },
        _ => ConvexSet::Halfspaces { g: random_matrix(r, 1, 2), h: v(&[r.gen_range(0.0..1.0)]) },
    };
    let q = match r.gen_range(0..2) {
        0 => ConvexSet::NonposOrthant { dim: m },
        _ => ConvexSet::Box { lo: Vector::from_element(m, -1.0), hi: Vector::from_element(m, r.gen_range(0.0..1.0)) },
    };
    let vertices = (0..k).map(|_| random_matrix(r, m, 2)).collect();
    Problem::new(c, q, UncertaintySet::new(vertices).unwrap()).unwrap()
}

/// Distance to the planar solution set by enumeration: the nearest point is
/// `x` itself, its projection onto one boundary line, or a vertex.
fn planar_projection_distance(p: &Problem, x: &Vector) -> f64 {
    let (g, h) = p.solution_system().unwrap().unwrap();
    let rows: Vec<Vector> = (0..g.nrows()).map(|j| g.row(j).transpose()).collect();
    let mut candidates = vec![x.clone()];
    for (j, r) in rows.iter().enumerate() {
        candidates.push(x - r * ((r.dot(x) - h[j]) / r.norm_squared()));
        for (k, s) in rows.iter().enumerate().skip(j + 1) {
            let det = r[0] * s[1] - r[1] * s[0];
            if det.abs() > 1e-12 {
                candidates.push(v(&[(h[j] * s[1] - h[k] * r[1]) / det, (r[0] * h[k] - s[0] * h[j]) / det]));
            }
        }
    }
    candidates
        .iter()
        .filter(|y| rows.iter().enumerate().all(|(j, r)| r.dot(y) - h[j] <= 1e-9 * r.norm()))
        .map(|y| (y - x).norm())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn residual_splits_into_parts(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, SetKind::Any, SetKind::Any);
        let x = random_vec(&mut r, p.n(), 5.0);
        let ev = residual(&p, &x).unwrap();
        prop_assert!((ev.value - ev.excess - ev.dist).abs() <= 1e-12 * (1.0 + ev.value));
        prop_assert_eq!(ev.region, RegionTag::classify(ev.excess, ev.dist, p.tol.tol_feas));
        prop_assert!(ev.excess >= 0.0 && ev.dist >= 0.0);
    }

    #[test]
    fn solver_trace_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, SetKind::Any, SetKind::Any);
        let x0 = random_vec(&mut r, p.n(), 5.0);
        let step_rule = if r.gen() { StepRule::Polyak } else { StepRule::Diminishing { s0: 0.5 } };
        let cfg = SolveConfig { max_iter: 500, x0: Some(x0.clone()), step_rule, trace_stride: 1, ..Default::default() };
        let rep = solve(&p, &cfg).unwrap();
        prop_assert!(rep.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        prop_assert!((residual(&p, &rep.x_best).unwrap().value - rep.p_best).abs() <= 1e-12 * (1.0 + rep.p_best));
        prop_assert!(rep.p_best <= residual(&p, &x0).unwrap().value);
    }

    #[test]
    fn polished_points_are_feasible_and_nearest(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = planar_polyhedral(&mut r);
        let x = random_vec(&mut r, 2, 5.0);
        match polish_polyhedral(&p, &x).unwrap() {
            PolishOutcome::Exact { x_exact, distance } => {
                prop_assert!(residual(&p, &x_exact).unwrap().value <= 1e-7);
                prop_assert!(((&x_exact - &x).norm() - distance).abs() <= 1e-9);
                let brute = planar_projection_distance(&p, &x);
                prop_assert!((distance - brute).abs() <= 1e-7, "exact {} brute force {}", distance, brute);
            }
            PolishOutcome::LikelyEmpty { .. } => prop_assert!(false, "origin is feasible"),
        }
    }

    #[test]
    fn solution_distance_vanishes_exactly_on_zero_residual(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = planar_polyhedral(&mut r);
        let oracle = SolvOracle::exact(&p).unwrap();
        let x = random_vec(&mut r, 2, 5.0);
        let ev = residual(&p, &x).unwrap();
        let d = oracle.distance(&x).unwrap();
        if ev.value <= p.tol.tol_feas {
            prop_assert!(d <= 1e-7);
        } else {
            prop_assert!(d > 0.0);
        }
        // The residual is (β+1)-Lipschitz and vanishes on the solution set.
        prop_assert!(ev.value <= (p.u.lipschitz_beta() + 1.0) * d + 1e-7);
    }

    #[test]
    fn nnls_satisfies_optimality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=3);
        let count = r.gen_range(1..=5);
        let gens: Vec<Vector> = (0..count).map(|_| random_vec(&mut r, d, 2.0)).collect();
        let x = random_vec(&mut r, d, 3.0);
        let (res, combo, lambda) = nnls(&gens, &x);
        let resid = &x - &combo;
        prop_assert!(lambda.iter().all(|&t| t >= 0.0));
        prop_assert!((resid.norm() - res).abs() <= 1e-12);
        // KKT: the residual is in the polar of the cone and orthogonal to the projection.
        for g in &gens {
            prop_assert!(g.dot(&resid) <= 1e-9, "{}", g.dot(&resid));
        }
        prop_assert!(resid.dot(&combo).abs() <= 1e-9);
    }

    #[test]
    fn projections_land_in_the_set(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=3);
        let set = random_set(&mut r, d, SetKind::Any);
        let x = random_vec(&mut r, d, 5.0);
        let pr = set.project(&x, &Default::default()).unwrap();
        prop_assert!(set.contains(&pr.point, 1e-8).unwrap());
        prop_assert!(((&x - &pr.point).norm() - pr.distance).abs() <= 1e-12);
    }

    #[test]
    fn problem_files_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, SetKind::Any, SetKind::Any);
        let back = Problem::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn slater_margin_certifies_core_bound() {
    let mut r = rng(5);
    let mut checked = 0;
    for _ in 0..60 {
        let m = r.gen_range(1..=3);
        let n = r.gen_range(1..=3);
        let k = r.gen_range(1..=3);
        let vertices = (0..k).map(|_| random_matrix(&mut r, m, n)).collect();
        let p = Problem::new(
            ConvexSet::WholeSpace { dim: n },
            ConvexSet::NonposOrthant { dim: m },
            UncertaintySet::new(vertices).unwrap(),
        )
        .unwrap();
        let slater = check_slater(&p, &SlaterConfig::default()).unwrap();
        if !slater.found {
            continue;
        }
        for i in 0..1000 {
            let x = box_sample(n, 5.0, 9, i);
            let lhs = preimage_distance(&p, &x).unwrap();
            let rhs = core_bound_value(&p, slater.eta, &x).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-6) + 1e-9, "{lhs} > {rhs} at {x:?}");
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} instances had a Slater point");
}

#[test]
fn c_hat_certifies_sampled_error_bound() {
    for name in ["ex3_3_sqrt2", "ex4_2_polyhedral"] {
        let p = builtin(name).unwrap();
        let cfg = CHatConfig { samples: 4000, ..Default::default() };
        let c_hat = estimate_c_hat_with(&p, &cfg).unwrap().c_hat.unwrap();
        assert!(c_hat > 0.0, "{name}");
        let oracle = SolvOracle::exact(&p).unwrap();
        for i in 0..cfg.samples {
            let x = box_sample(p.n(), cfg.box_radius, cfg.seed, i);
            let value = residual(&p, &x).unwrap().value;
            let d = oracle.distance(&x).unwrap();
            assert!(d <= value / c_hat * (1.0 + 1e-6) + 1e-9, "{name}: {d} > {value}/{c_hat}");
        }
    }
}

#[test]
fn swap_pair_min_norm_is_one_in_the_violating_region() {
    // Off the axes the residual of the identity/swap pair is differentiable
    // with unit gradient. On a positive axis both vertices are active, but
    // their subgradients coincide (swapᵀe₂ = e₁), so the bound stays 1.
    let p = builtin("ex3_3_sqrt2").unwrap();
    let opts = MinNormOptions::default();
    for x in [v(&[1.0, 0.0]), v(&[0.0, 3.0]), v(&[2.0, 1.0]), v(&[1.0, 1.0]), v(&[-1.0, 2.0])] {
        let lb = local_bound(&p, &x, &opts).unwrap().unwrap();
        assert!((lb.lower - 1.0).abs() <= 1e-9, "{x:?}: {}", lb.lower);
    }
}
