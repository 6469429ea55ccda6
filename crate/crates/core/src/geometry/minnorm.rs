//! Projections onto the unit simplex and small min-norm problems over
//! `simplex × orthant`, solved by projected gradient with step `1/L`.

use crate::geometry::linalg::lambda_extremes_sym;
use crate::geometry::{Matrix, Vector};

/// Euclidean projection onto `{λ ≥ 0, Σλ = 1}` (sort-based).
pub fn simplex_project(w: &Vector) -> Vector {
    let n = w.len();
    let mut sorted: Vec<f64> = w.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut out = Vector::zeros(n);
    for i in 0..n {
        out[i] = (w[i] - theta).max(0.0);
    }
    // Renormalize away rounding drift in the sum.
    let s = out.sum();
    if s > 0.0 {
        out /= s;
    }
    out
}

/// Stopping rules for [`MinNormProblem::solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinNormOptions {
    pub max_iter: usize,
    /// Stop when `value - lower_bound` falls below this.
    pub gap_tol: f64,
    /// Stop when the point `Bz + w` moves less than this in one step.
    pub step_tol: f64,
    /// Slack on `⟨n_j, r̂⟩ ≥ 0` when forming the dual bound.
    pub dual_slack: f64,
}

impl Default for MinNormOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            gap_tol: 1e-12,
            step_tol: 0.0,
            dual_slack: 1e-12,
        }
    }
}

/// `min ‖Σ λᵢ vᵢ + Σ μⱼ nⱼ + w‖` over `λ` in the unit simplex and `μ ≥ 0`.
///
/// An empty `hull` drops the simplex block altogether.
#[derive(Debug, Clone)]
pub struct MinNormProblem<'a> {
    pub hull: &'a [Vector],
    pub cone: &'a [Vector],
    pub offset: Vector,
}

#[derive(Debug, Clone)]
pub struct MinNormSolution {
    /// Best primal value found (an upper bound of the true minimum).
    pub value: f64,
    /// Best dual bound found (a lower bound of the true minimum, ≥ 0).
    pub lower_bound: f64,
    /// Unit direction `r̂` at which `lower_bound` was attained, if any.
    pub dual_direction: Option<Vector>,
    pub hull_weights: Vector,
    pub cone_weights: Vector,
    /// `Σ λᵢ vᵢ + Σ μⱼ nⱼ + w` at the best primal iterate.
    pub point: Vector,
    pub iterations: usize,
    /// False when the iteration cap was hit before any stopping rule fired.
    pub converged: bool,
}

impl MinNormSolution {
    pub fn gap(&self) -> f64 {
        (self.value - self.lower_bound).max(0.0)
    }

    /// `Σ λᵢ vᵢ` at the returned weights.
    pub fn hull_part(&self, hull: &[Vector]) -> Vector {
        combine(hull, &self.hull_weights, self.point.len())
    }

    /// `Σ μⱼ nⱼ` at the returned weights.
    pub fn cone_part(&self, cone: &[Vector]) -> Vector {
        combine(cone, &self.cone_weights, self.point.len())
    }
}

fn combine(gens: &[Vector], weights: &Vector, dim: usize) -> Vector {
    let mut out = Vector::zeros(dim);
    for (g, &w) in gens.iter().zip(weights.iter()) {
        out.axpy(w, g, 1.0);
    }
    out
}

impl MinNormProblem<'_> {
    fn dual_bound(&self, r: &Vector, slack: f64) -> Option<f64> {
        let norm = r.norm();
        if norm == 0.0 {
            return Some(0.0);
        }
        let rhat = r / norm;
        for n in self.cone {
            if n.dot(&rhat) < -slack * n.norm().max(1.0) {
                return None;
            }
        }
        let hull_min = self
            .hull
            .iter()
            .map(|v| v.dot(&rhat))
            .fold(f64::INFINITY, f64::min);
        let hull_min = if self.hull.is_empty() { 0.0 } else { hull_min };
        Some(rhat.dot(&self.offset) + hull_min)
    }

    pub fn solve(&self, opts: &MinNormOptions) -> MinNormSolution {
        let d = self.offset.len();
        let p = self.hull.len();
        let q = self.cone.len();

        let mut lam = if p > 0 {
            Vector::from_element(p, 1.0 / p as f64)
        } else {
            Vector::zeros(0)
        };
        let mut mu = Vector::zeros(q);

        // L = λ_max(BBᵀ) with B = [V | N]
        let mut bbt = Matrix::zeros(d, d);
        for g in self.hull.iter().chain(self.cone.iter()) {
            bbt += g * g.transpose();
        }
        let lip = if p + q == 0 {
            0.0
        } else {
            lambda_extremes_sym(&bbt, 1e-12)
                .map(|(_, hi)| hi)
                .unwrap_or_else(|_| bbt.trace())
        };

        let point_of = |lam: &Vector, mu: &Vector| -> Vector {
            let mut r = self.offset.clone();
            for (v, &l) in self.hull.iter().zip(lam.iter()) {
                r.axpy(l, v, 1.0);
            }
            for (n, &m) in self.cone.iter().zip(mu.iter()) {
                r.axpy(m, n, 1.0);
            }
            r
        };

        let mut r = point_of(&lam, &mu);
        let mut best = MinNormSolution {
            value: r.norm(),
            lower_bound: 0.0,
            dual_direction: None,
            hull_weights: lam.clone(),
            cone_weights: mu.clone(),
            point: r.clone(),
            iterations: 0,
            converged: true,
        };
        if let Some(lb) = self.dual_bound(&r, opts.dual_slack) {
            if lb > 0.0 {
                best.lower_bound = lb;
                best.dual_direction = Some(&r / r.norm());
            }
        }
        if lip <= 0.0 {
            best.lower_bound = best.value;
            return best;
        }
        let step = 1.0 / lip;

        // Accelerated projected gradient on ½‖r‖² with function-value restart.
        best.converged = false;
        let (mut y_lam, mut y_mu) = (lam.clone(), mu.clone());
        let mut r_y = r.clone();
        let mut t = 1.0_f64;
        for it in 1..=opts.max_iter {
            if best.value - best.lower_bound <= opts.gap_tol || best.value == 0.0 {
                best.converged = true;
                break;
            }
            let next_lam = if p > 0 {
                let grad = Vector::from_iterator(p, self.hull.iter().map(|v| v.dot(&r_y)));
                simplex_project(&(&y_lam - grad * step))
            } else {
                Vector::zeros(0)
            };
            let next_mu = Vector::from_iterator(
                q,
                self.cone.iter().zip(y_mu.iter()).map(|(n, &m)| (m - step * n.dot(&r_y)).max(0.0)),
            );
            let next = point_of(&next_lam, &next_mu);
            let value = next.norm();
            best.iterations = it;
            if value > r.norm() {
                // momentum overshot: restart from the current iterate
                t = 1.0;
                y_lam.copy_from(&lam);
                y_mu.copy_from(&mu);
                r_y.copy_from(&r);
                continue;
            }
            let moved = (&next - &r).norm();
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y_lam = &next_lam + (&next_lam - &lam) * beta;
            y_mu = &next_mu + (&next_mu - &mu) * beta;
            r_y = &next + (&next - &r) * beta;
            t = t_next;
            lam = next_lam;
            mu = next_mu;
            r = next;
            if value < best.value {
                best.value = value;
                best.hull_weights = lam.clone();
                best.cone_weights = mu.clone();
                best.point = r.clone();
            }
            if let Some(lb) = self.dual_bound(&r, opts.dual_slack) {
                if lb > best.lower_bound {
                    best.lower_bound = lb;
                    best.dual_direction = Some(&r / value);
                }
            }
            if moved <= opts.step_tol {
                best.converged = true;
                break;
            }
        }
        best.lower_bound = best.lower_bound.min(best.value);
        if best.value - best.lower_bound <= opts.gap_tol || best.value == 0.0 {
            best.converged = true;
        }
        best
    }
}

/// Nonnegative least squares `min_{λ≥0} ‖Σ λⱼ gⱼ − v‖` by the Lawson–Hanson
/// active-set method; returns `(residual, Σ λⱼ gⱼ, λ)`.
pub fn nnls(generators: &[Vector], v: &Vector) -> (f64, Vector, Vector) {
    let d = v.len();
    let p = generators.len();
    if p == 0 {
        return (v.norm(), Vector::zeros(d), Vector::zeros(0));
    }
    let g = Matrix::from_columns(generators);
    let scale = generators.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0) * v.norm().max(1.0);
    let tol = 1e-13 * scale;
    let mut lambda = Vector::zeros(p);
    let mut passive = vec![false; p];

    // Least squares on the passive columns, zero elsewhere.
    let solve_passive = |passive: &[bool]| -> Vector {
        let idx: Vec<usize> = (0..p).filter(|&j| passive[j]).collect();
        let mut s = Vector::zeros(p);
        if idx.is_empty() {
            return s;
        }
        let sub = Matrix::from_columns(&idx.iter().map(|&j| g.column(j).into_owned()).collect::<Vec<_>>());
        let sol = sub.svd(true, true).solve(v, 1e-12 * scale).unwrap_or_else(|_| Vector::zeros(idx.len()));
        for (k, &j) in idx.iter().enumerate() {
            s[j] = sol[k];
        }
        s
    };

    for _ in 0..3 * p + 10 {
        let w = g.transpose() * (v - &g * &lambda);
        let Some(j) = (0..p).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b])) else {
            break;
        };
        passive[j] = true;
        let mut inner = 0;
        loop {
            let s = solve_passive(&passive);
            if (0..p).all(|k| !passive[k] || s[k] > 0.0) {
                lambda = s;
                break;
            }
            let alpha = (0..p)
                .filter(|&k| passive[k] && s[k] <= 0.0)
                .map(|k| lambda[k] / (lambda[k] - s[k]))
                .fold(f64::INFINITY, f64::min);
            lambda += (&s - &lambda) * alpha;
            for k in 0..p {
                if passive[k] && lambda[k] <= 1e-15 * scale {
                    passive[k] = false;
                    lambda[k] = 0.0;
                }
            }
            inner += 1;
            if inner > 3 * p + 10 {
                break;
            }
        }
        if passive.iter().all(|&b| !b) {
            break;
        }
    }
    lambda.iter_mut().for_each(|t| *t = t.max(0.0));
    let combo = &g * &lambda;
    ((v - &combo).norm(), combo, lambda)
}

/// Is `v` in the cone generated by `generators` (residual ≤ `tol_dual`)?
pub fn polar_membership(generators: &[Vector], v: &Vector, tol_dual: f64) -> bool {
    if generators.is_empty() {
        return v.norm() <= tol_dual;
    }
    let (res, _, _) = nnls(generators, v);
    res <= tol_dual
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(simplex_project(&v(&[0.5, 0.5])), v(&[0.5, 0.5]));
        assert_eq!(simplex_project(&v(&[2.0, 0.0])), v(&[1.0, 0.0]));
        assert_eq!(simplex_project(&v(&[1.0, 1.0])), v(&[0.5, 0.5]));
    }

    #[test]
    fn simplex_matches_grid_oracle() {
        // brute force over a fine grid of the 2-simplex
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let w = v(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let p = simplex_project(&w);
            let steps = 400;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 / steps as f64;
                    let b = j as f64 / steps as f64;
                    let c = 1.0 - a - b;
                    best = best.min((&w - v(&[a, b, c])).norm());
                }
            }
            let d = (&w - &p).norm();
            assert!(d <= best + 1e-12);
            assert!(d >= best - 2.0 / steps as f64);
            assert!(p.iter().all(|&x| x >= 0.0));
            assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cone_membership_examples() {
        let e1 = v(&[1.0, 0.0]);
        let e2 = v(&[0.0, 1.0]);
        assert!(polar_membership(&[e1.clone(), e2.clone()], &v(&[1.0, 1.0]), 1e-8));
        assert!(!polar_membership(std::slice::from_ref(&e1), &v(&[0.0, 1.0]), 1e-8));
        assert!(polar_membership(&[e1, v(&[1.0, 1.0])], &v(&[2.0, 1.0]), 1e-8));
        assert!(polar_membership(&[], &v(&[0.0, 0.0]), 1e-8));
        assert!(!polar_membership(&[], &v(&[0.0, 1e-3]), 1e-8));
    }

    #[test]
    fn min_norm_of_segment() {
        // conv{(1,-1),(1,1)} has min-norm point (1,0)
        let hull = [v(&[1.0, -1.0]), v(&[1.0, 1.0])];
        let sol = MinNormProblem { hull: &hull, cone: &[], offset: v(&[0.0, 0.0]) }
            .solve(&MinNormOptions::default());
        assert_abs_diff_eq!(sol.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.lower_bound, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn min_norm_bounds_bracket_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let hull: Vec<Vector> = (0..3).map(|_| v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])).collect();
            let cone = vec![v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])];
            let w = v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let sol = MinNormProblem { hull: &hull, cone: &cone, offset: w.clone() }
                .solve(&MinNormOptions::default());
            // brute force: grid over the simplex, fine 1-D line for μ
            let mut best = f64::INFINITY;
            let steps = 60;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let l = [i as f64 / steps as f64, j as f64 / steps as f64];
                    let base = &hull[0] * l[0] + &hull[1] * l[1] + &hull[2] * (1.0 - l[0] - l[1]) + &w;
                    // exact minimization over μ ≥ 0 for a single generator
                    let nn = cone[0].norm_squared();
                    let mu = if nn > 0.0 { (-cone[0].dot(&base) / nn).max(0.0) } else { 0.0 };
                    best = best.min((base + &cone[0] * mu).norm());
                }
            }
            assert!(sol.lower_bound <= best + 1e-9, "lb {} > grid {}", sol.lower_bound, best);
            assert!(sol.value <= best + 1e-6, "value {} > grid {}", sol.value, best);
        }
    }
}
