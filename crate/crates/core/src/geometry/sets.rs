//! Closed convex sets with projection, support and cone data.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::active_set::{project_halfspaces, ActiveSetOutcome};
use crate::geometry::dykstra::dykstra;
use crate::geometry::linalg::lambda_extremes_sym;
use crate::geometry::minnorm::{nnls, polar_membership, MinNormOptions, MinNormProblem};
use crate::geometry::{Matrix, Vector};
use crate::tol::Tolerances;

/// A closed convex set in `ℝᵈ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetRepr", into = "SetRepr")]
pub enum ConvexSet {
    NonnegOrthant { dim: usize },
    NonposOrthant { dim: usize },
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
    /// `{x : Gx ≤ h}`; with `h = 0` this is a polyhedral cone.
    Halfspaces { g: Matrix, h: Vector },
    /// `cone{v₁, …, v_p}`; an empty list is `{0}`.
    FinGenCone { dim: usize, generators: Vec<Vector> },
    Singleton { point: Vector },
    WholeSpace { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vector,
    pub distance: f64,
}

fn unit(dim: usize, i: usize, sign: f64) -> Vector {
    let mut e = Vector::zeros(dim);
    e[i] = sign;
    e
}

fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ConvexSet {
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::NonnegOrthant { dim }
            | ConvexSet::NonposOrthant { dim }
            | ConvexSet::WholeSpace { dim }
            | ConvexSet::FinGenCone { dim, .. } => *dim,
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Halfspaces { g, .. } => g.ncols(),
            ConvexSet::Singleton { point } => point.len(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ConvexSet::NonnegOrthant { .. } => "nonneg_orthant",
            ConvexSet::NonposOrthant { .. } => "nonpos_orthant",
            ConvexSet::Box { .. } => "box",
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Halfspaces { .. } => "halfspaces",
            ConvexSet::FinGenCone { .. } => "fingen_cone",
            ConvexSet::Singleton { .. } => "singleton",
            ConvexSet::WholeSpace { .. } => "whole",
        }
    }

    fn unsupported(&self, op: &'static str, reason: impl Into<String>) -> Error {
        Error::Unsupported {
            op,
            variant: self.variant_name().to_string(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidSet(format!("{} has dimension 0", self.variant_name())));
        }
        match self {
            ConvexSet::Box { lo, hi } => {
                check_dim("box bounds", lo.len(), hi.len())?;
                if !all_finite(lo) || !all_finite(hi) {
                    return Err(Error::InvalidSet("box bounds must be finite".into()));
                }
                if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                    return Err(Error::InvalidSet("box requires lo ≤ hi componentwise".into()));
                }
            }
            ConvexSet::Ball { center, radius } => {
                if !all_finite(center) || !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::InvalidSet("ball needs a finite center and radius ≥ 0".into()));
                }
            }
            ConvexSet::Halfspaces { g, h } => {
                check_dim("halfspaces rows vs h", g.nrows(), h.len())?;
                if g.nrows() == 0 {
                    return Err(Error::InvalidSet("halfspaces needs at least one row".into()));
                }
                if g.iter().any(|x| !x.is_finite()) || !all_finite(h) {
                    return Err(Error::InvalidSet("halfspace data must be finite".into()));
                }
                for j in 0..g.nrows() {
                    if g.row(j).norm() == 0.0 {
                        return Err(Error::InvalidSet(format!("halfspace row {j} is zero")));
                    }
                }
            }
            ConvexSet::FinGenCone { dim, generators } => {
                for v in generators {
                    check_dim("cone generator", *dim, v.len())?;
                    if !all_finite(v) {
                        return Err(Error::InvalidSet("cone generators must be finite".into()));
                    }
                }
            }
            ConvexSet::Singleton { point }
                if !all_finite(point) => {
                    return Err(Error::InvalidSet("singleton point must be finite".into()));
                }
            _ => {}
        }
        Ok(())
    }

    pub fn is_cone(&self) -> bool {
        match self {
            ConvexSet::NonnegOrthant { .. }
            | ConvexSet::NonposOrthant { .. }
            | ConvexSet::FinGenCone { .. }
            | ConvexSet::WholeSpace { .. } => true,
            ConvexSet::Halfspaces { h, .. } => h.iter().all(|&x| x == 0.0),
            ConvexSet::Singleton { point } => point.iter().all(|&x| x == 0.0),
            ConvexSet::Box { lo, hi } => lo.iter().chain(hi.iter()).all(|&x| x == 0.0),
            ConvexSet::Ball { center, radius } => *radius == 0.0 && center.iter().all(|&x| x == 0.0),
        }
    }

    /// Variants with an explicit halfspace description (see [`Self::halfspaces`]).
    pub fn is_polyhedral(&self) -> bool {
        self.halfspaces().is_some()
    }

    /// `(G, h)` with the set equal to `{x : Gx ≤ h}`; `None` for ball and
    /// finitely generated cones. The whole space yields zero rows.
    pub fn halfspaces(&self) -> Option<(Matrix, Vector)> {
        let d = self.dim();
        match self {
            ConvexSet::NonnegOrthant { .. } => Some((-Matrix::identity(d, d), Vector::zeros(d))),
            ConvexSet::NonposOrthant { .. } => Some((Matrix::identity(d, d), Vector::zeros(d))),
            ConvexSet::Box { lo, hi } => {
                let mut g = Matrix::zeros(2 * d, d);
                let mut h = Vector::zeros(2 * d);
                for i in 0..d {
                    g[(2 * i, i)] = 1.0;
                    h[2 * i] = hi[i];
                    g[(2 * i + 1, i)] = -1.0;
                    h[2 * i + 1] = -lo[i];
                }
                Some((g, h))
            }
            ConvexSet::Singleton { point } => {
                let mut g = Matrix::zeros(2 * d, d);
                let mut h = Vector::zeros(2 * d);
                for i in 0..d {
                    g[(2 * i, i)] = 1.0;
                    h[2 * i] = point[i];
                    g[(2 * i + 1, i)] = -1.0;
                    h[2 * i + 1] = -point[i];
                }
                Some((g, h))
            }
            ConvexSet::Halfspaces { g, h } => Some((g.clone(), h.clone())),
            ConvexSet::WholeSpace { .. } => Some((Matrix::zeros(0, d), Vector::zeros(0))),
            ConvexSet::Ball { .. } | ConvexSet::FinGenCone { .. } => None,
        }
    }

    /// Membership with absolute slack `tol` (normalized rows for halfspaces).
    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        check_dim("set membership", self.dim(), x.len())?;
        Ok(match self {
            ConvexSet::NonnegOrthant { .. } => x.iter().all(|&v| v >= -tol),
            ConvexSet::NonposOrthant { .. } => x.iter().all(|&v| v <= tol),
            ConvexSet::Box { lo, hi } => (0..x.len()).all(|i| x[i] >= lo[i] - tol && x[i] <= hi[i] + tol),
            ConvexSet::Ball { center, radius } => (x - center).norm() <= radius + tol,
            ConvexSet::Halfspaces { g, h } => (0..g.nrows()).all(|j| {
                let row = g.row(j);
                (row.transpose().dot(x) - h[j]) / row.norm() <= tol
            }),
            ConvexSet::FinGenCone { generators, .. } => polar_membership(generators, x, tol),
            ConvexSet::Singleton { point } => (x - point).norm() <= tol,
            ConvexSet::WholeSpace { .. } => true,
        })
    }

    /// Euclidean projection and distance.
    pub fn project(&self, x: &Vector, tol: &Tolerances) -> Result<Projection> {
        check_dim("projection", self.dim(), x.len())?;
        let point = match self {
            ConvexSet::NonnegOrthant { .. } => x.map(|v| v.max(0.0)),
            ConvexSet::NonposOrthant { .. } => x.map(|v| v.min(0.0)),
            ConvexSet::Box { lo, hi } => Vector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i])),
            ConvexSet::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + d * (radius / n)
                }
            }
            ConvexSet::Halfspaces { g, h } => match project_halfspaces(g, h, x, tol.tol_feas) {
                ActiveSetOutcome::Projected { point, .. } => point,
                ActiveSetOutcome::Infeasible { .. } => {
                    return Err(Error::InvalidSet("halfspace system has no solution".into()));
                }
                ActiveSetOutcome::Stalled { .. } => {
                    let out = dykstra(g, h, x, tol.tol_proj, tol.tol_feas, tol.max_iter);
                    if !out.converged {
                        return Err(Error::NotConverged {
                            what: "dykstra projection",
                            iterations: out.cycles,
                            gap: out.max_violation.max(out.last_move),
                            last: out.point,
                        });
                    }
                    out.point
                }
            },
            ConvexSet::FinGenCone { generators, .. } => nnls(generators, x).1,
            ConvexSet::Singleton { point } => point.clone(),
            ConvexSet::WholeSpace { .. } => x.clone(),
        };
        let distance = (x - &point).norm();
        Ok(Projection { point, distance })
    }

    pub fn distance(&self, x: &Vector, tol: &Tolerances) -> Result<f64> {
        Ok(self.project(x, tol)?.distance)
    }

    /// Support function `σ(u | S) = sup_{y∈S} ⟨y, u⟩`, possibly `+∞`.
    pub fn support(&self, u: &Vector, tol: &Tolerances) -> Result<f64> {
        check_dim("support function", self.dim(), u.len())?;
        match self {
            ConvexSet::Box { lo, hi } => Ok((0..u.len()).map(|i| (lo[i] * u[i]).max(hi[i] * u[i])).sum()),
            ConvexSet::Ball { center, radius } => Ok(center.dot(u) + radius * u.norm()),
            ConvexSet::Singleton { point } => Ok(point.dot(u)),
            ConvexSet::FinGenCone { generators, .. } => {
                let inside = generators.iter().all(|v| v.dot(u) <= tol.tol_dual * v.norm().max(1.0));
                Ok(if inside { 0.0 } else { f64::INFINITY })
            }
            _ if self.is_cone() => {
                let gens = self.polar_generators()?;
                Ok(if polar_membership(&gens, u, tol.tol_dual) {
                    0.0
                } else {
                    f64::INFINITY
                })
            }
            _ => Err(self.unsupported("support", "only boxes, balls, singletons and cones are supported")),
        }
    }

    /// Generators of the negative dual cone `S° = {v : ⟨v, y⟩ ≤ 0 ∀y ∈ S}`.
    pub fn polar_generators(&self) -> Result<Vec<Vector>> {
        let d = self.dim();
        match self {
            ConvexSet::NonnegOrthant { .. } => Ok((0..d).map(|i| unit(d, i, -1.0)).collect()),
            ConvexSet::NonposOrthant { .. } => Ok((0..d).map(|i| unit(d, i, 1.0)).collect()),
            ConvexSet::WholeSpace { .. } => Ok(Vec::new()),
            ConvexSet::Halfspaces { g, .. } if self.is_cone() => {
                Ok((0..g.nrows()).map(|j| g.row(j).transpose()).collect())
            }
            ConvexSet::Singleton { .. } | ConvexSet::Box { .. } | ConvexSet::Ball { .. } if self.is_cone() => {
                Ok((0..d).flat_map(|i| [unit(d, i, 1.0), unit(d, i, -1.0)]).collect())
            }
            ConvexSet::FinGenCone { generators, .. } => Ok(halfspace_cone_generators(d, generators)),
            _ => Err(self.unsupported("polar_generators", "set is not a cone")),
        }
    }

    /// Whether the cone `S` satisfies `S ∩ (−S) = {0}`.
    pub fn is_pointed_cone(&self) -> Result<bool> {
        if !self.is_cone() {
            return Err(self.unsupported("pointedness check", "set is not a cone"));
        }
        Ok(match self {
            ConvexSet::NonnegOrthant { .. } | ConvexSet::NonposOrthant { .. } => true,
            ConvexSet::WholeSpace { .. } => false,
            ConvexSet::Singleton { .. } | ConvexSet::Box { .. } | ConvexSet::Ball { .. } => true,
            ConvexSet::Halfspaces { g, .. } => {
                // lineality space is ker G
                let gram = g.transpose() * g;
                let (lo, _) = lambda_extremes_sym(&gram, 1e-12)?;
                lo > 1e-10 * gram.amax().max(1.0)
            }
            ConvexSet::FinGenCone { generators, .. } => {
                // pointed iff 0 ∉ conv of the normalized nonzero generators
                let unit_gens: Vec<Vector> = generators
                    .iter()
                    .filter(|v| v.norm() > 0.0)
                    .map(|v| v / v.norm())
                    .collect();
                if unit_gens.is_empty() {
                    true
                } else {
                    let sol = MinNormProblem {
                        hull: &unit_gens,
                        cone: &[],
                        offset: Vector::zeros(self.dim()),
                    }
                    .solve(&MinNormOptions::default());
                    sol.lower_bound > 1e-9
                }
            }
        })
    }

    /// Generators of the normal cone `N(x; S)`; empty at interior points.
    pub fn normal_cone_generators(&self, x: &Vector, tol: &Tolerances) -> Result<Vec<Vector>> {
        check_dim("normal cone", self.dim(), x.len())?;
        if let ConvexSet::FinGenCone { .. } = self {
            return Err(self.unsupported("normal_cone_generators", "finitely generated cones are not supported"));
        }
        let slack = tol.tol_feas.max(tol.tol_active);
        if !self.contains(x, slack)? {
            return Err(Error::Precondition(format!(
                "normal cone requested at a point outside the {} set",
                self.variant_name()
            )));
        }
        let d = self.dim();
        let act = tol.tol_active;
        Ok(match self {
            ConvexSet::NonnegOrthant { .. } => {
                (0..d).filter(|&i| x[i].abs() <= act).map(|i| unit(d, i, -1.0)).collect()
            }
            ConvexSet::NonposOrthant { .. } => {
                (0..d).filter(|&i| x[i].abs() <= act).map(|i| unit(d, i, 1.0)).collect()
            }
            ConvexSet::Box { lo, hi } => {
                let mut out = Vec::new();
                for i in 0..d {
                    if (x[i] - lo[i]).abs() <= act {
                        out.push(unit(d, i, -1.0));
                    }
                    if (x[i] - hi[i]).abs() <= act {
                        out.push(unit(d, i, 1.0));
                    }
                }
                out
            }
            ConvexSet::Halfspaces { g, h } => (0..g.nrows())
                .filter(|&j| {
                    let row = g.row(j);
                    (row.transpose().dot(x) - h[j]).abs() <= act * row.norm()
                })
                .map(|j| g.row(j).transpose())
                .collect(),
            ConvexSet::Singleton { .. } => (0..d).flat_map(|i| [unit(d, i, 1.0), unit(d, i, -1.0)]).collect(),
            ConvexSet::WholeSpace { .. } => Vec::new(),
            ConvexSet::Ball { center, radius } => {
                if *radius == 0.0 {
                    (0..d).flat_map(|i| [unit(d, i, 1.0), unit(d, i, -1.0)]).collect()
                } else {
                    let r = x - center;
                    let n = r.norm();
                    if (n - radius).abs() <= act * radius.max(1.0) {
                        vec![r / n]
                    } else {
                        Vec::new()
                    }
                }
            }
            ConvexSet::FinGenCone { .. } => unreachable!(),
        })
    }
}

/// Generators of `{y : ⟨vₖ, y⟩ ≤ 0 ∀k}` by a plain double-description sweep
/// starting from `±eᵢ`. The output generates the cone but need not be minimal.
fn halfspace_cone_generators(dim: usize, constraints: &[Vector]) -> Vec<Vector> {
    let mut rays: Vec<Vector> = (0..dim).flat_map(|i| [unit(dim, i, 1.0), unit(dim, i, -1.0)]).collect();
    for a in constraints.iter().filter(|a| a.norm() > 0.0) {
        let a = a / a.norm();
        let vals: Vec<f64> = rays.iter().map(|r| a.dot(r)).collect();
        let eps = 1e-12;
        let mut next = Vec::new();
        for (r, &v) in rays.iter().zip(vals.iter()) {
            if v <= eps {
                next.push(r.clone());
            }
        }
        for (p, &vp) in rays.iter().zip(vals.iter()) {
            if vp <= eps {
                continue;
            }
            for (n, &vn) in rays.iter().zip(vals.iter()) {
                if vn >= -eps {
                    continue;
                }
                let combo = n * vp - p * vn;
                let norm = combo.norm();
                if norm > 1e-12 {
                    next.push(combo / norm);
                }
            }
        }
        rays = dedup_rays(next);
    }
    rays
}

fn dedup_rays(rays: Vec<Vector>) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    for r in rays {
        let n = r.norm();
        if n <= 1e-12 {
            continue;
        }
        let r = r / n;
        if !out.iter().any(|o| (o - &r).norm() < 1e-10) {
            out.push(r);
        }
    }
    out
}

/// NNLS-based decomposition of `u` against a generator list: returns the
/// residual and the cone point `Σ λⱼ gⱼ` closest to `u`.
pub fn cone_decompose(generators: &[Vector], u: &Vector) -> (f64, Vector) {
    if generators.is_empty() {
        return (u.norm(), Vector::zeros(u.len()));
    }
    let (res, combo, _) = nnls(generators, u);
    (res, combo)
}

// ---- JSON encoding ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SetRepr {
    NonnegOrthant {
        dim: usize,
    },
    NonposOrthant {
        dim: usize,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Halfspaces {
        #[serde(rename = "G")]
        g: Vec<Vec<f64>>,
        h: Vec<f64>,
    },
    #[serde(rename = "fingen_cone")]
    FinGenCone {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        generators: Vec<Vec<f64>>,
    },
    Singleton {
        point: Vec<f64>,
    },
    #[serde(rename = "whole")]
    WholeSpace {
        dim: usize,
    },
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> std::result::Result<Matrix, String> {
    let m = rows.len();
    if m == 0 {
        return Err(format!("{what}: matrix has no rows"));
    }
    let n = rows[0].len();
    if n == 0 {
        return Err(format!("{what}: matrix has no columns"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(format!("{what}: row {i} has {} entries, expected {n}", r.len()));
    }
    Ok(Matrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

impl TryFrom<SetRepr> for ConvexSet {
    type Error = String;

    fn try_from(r: SetRepr) -> std::result::Result<Self, String> {
        let set = match r {
            SetRepr::NonnegOrthant { dim } => ConvexSet::NonnegOrthant { dim },
            SetRepr::NonposOrthant { dim } => ConvexSet::NonposOrthant { dim },
            SetRepr::Box { lo, hi } => ConvexSet::Box {
                lo: Vector::from_vec(lo),
                hi: Vector::from_vec(hi),
            },
            SetRepr::Ball { center, radius } => ConvexSet::Ball {
                center: Vector::from_vec(center),
                radius,
            },
            SetRepr::Halfspaces { g, h } => ConvexSet::Halfspaces {
                g: matrix_from_rows(&g, "halfspaces.G")?,
                h: Vector::from_vec(h),
            },
            SetRepr::FinGenCone { dim, generators } => {
                let dim = match (dim, generators.first()) {
                    (Some(d), _) => d,
                    (None, Some(g)) => g.len(),
                    (None, None) => return Err("fingen_cone with no generators needs \"dim\"".into()),
                };
                ConvexSet::FinGenCone {
                    dim,
                    generators: generators.into_iter().map(Vector::from_vec).collect(),
                }
            }
            SetRepr::Singleton { point } => ConvexSet::Singleton {
                point: Vector::from_vec(point),
            },
            SetRepr::WholeSpace { dim } => ConvexSet::WholeSpace { dim },
        };
        set.validate().map_err(|e| e.to_string())?;
        Ok(set)
    }
}

impl From<ConvexSet> for SetRepr {
    fn from(s: ConvexSet) -> Self {
        let v = |x: Vector| x.iter().copied().collect::<Vec<f64>>();
        match s {
            ConvexSet::NonnegOrthant { dim } => SetRepr::NonnegOrthant { dim },
            ConvexSet::NonposOrthant { dim } => SetRepr::NonposOrthant { dim },
            ConvexSet::Box { lo, hi } => SetRepr::Box { lo: v(lo), hi: v(hi) },
            ConvexSet::Ball { center, radius } => SetRepr::Ball {
                center: v(center),
                radius,
            },
            ConvexSet::Halfspaces { g, h } => SetRepr::Halfspaces {
                g: matrix_to_rows(&g),
                h: v(h),
            },
            ConvexSet::FinGenCone { dim, generators } => SetRepr::FinGenCone {
                dim: Some(dim),
                generators: generators.into_iter().map(v).collect(),
            },
            ConvexSet::Singleton { point } => SetRepr::Singleton { point: v(point) },
            ConvexSet::WholeSpace { dim } => SetRepr::WholeSpace { dim },
        }
    }
}
