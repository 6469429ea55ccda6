//! The residual `p_U(x) = maxᵢ dist(Aᵢx, Q) + dist(x, C)`, a dual lower
//! bound for it, and subgradient data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::minnorm::{MinNormOptions, MinNormProblem, MinNormSolution};
use crate::geometry::sets::cone_decompose;
use crate::geometry::{ConvexSet, Projection, Vector};
use crate::problem::Problem;
use crate::uncertainty::cleanup_from_distances;

/// Which of the two residual parts are positive (absolute `tol_feas`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    /// Both parts positive.
    R1,
    /// Image inside `Q`, point outside `C`.
    R2,
    /// Point in `C`, image sticks out of `Q`.
    R3,
    #[serde(rename = "FEASIBLE")]
    Feasible,
}

impl RegionTag {
    pub fn classify(excess: f64, dist: f64, tol_feas: f64) -> Self {
        match (excess > tol_feas, dist > tol_feas) {
            (true, true) => RegionTag::R1,
            (false, true) => RegionTag::R2,
            (true, false) => RegionTag::R3,
            (false, false) => RegionTag::Feasible,
        }
    }
}

impl std::fmt::Display for RegionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegionTag::R1 => "R1",
            RegionTag::R2 => "R2",
            RegionTag::R3 => "R3",
            RegionTag::Feasible => "FEASIBLE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEval {
    pub value: f64,
    pub excess: f64,
    pub dist: f64,
    pub region: RegionTag,
}

/// Projections needed by both the residual and its subgradient.
struct Pieces {
    images: Vec<Vector>,
    q_proj: Vec<Projection>,
    c_proj: Projection,
}

impl Pieces {
    fn compute(p: &Problem, x: &Vector) -> Result<Self> {
        p.check_point(x)?;
        let images = p.u.evaluate_vertices(x)?;
        let q_proj = images
            .iter()
            .map(|y| p.q.project(y, &p.tol))
            .collect::<Result<Vec<_>>>()?;
        let c_proj = p.c.project(x, &p.tol)?;
        Ok(Self { images, q_proj, c_proj })
    }

    fn distances(&self) -> Vec<f64> {
        self.q_proj.iter().map(|pr| pr.distance).collect()
    }

    fn eval(&self, tol_feas: f64) -> ResidualEval {
        let excess = self.q_proj.iter().map(|pr| pr.distance).fold(0.0, f64::max);
        let dist = self.c_proj.distance;
        ResidualEval {
            value: excess + dist,
            excess,
            dist,
            region: RegionTag::classify(excess, dist, tol_feas),
        }
    }

    /// `Aᵢᵀ(Aᵢx − Π_Q(Aᵢx)) / dist(Aᵢx, Q)`, or 0 when the distance is 0.
    fn vertex_subgradient(&self, p: &Problem, i: usize) -> Vector {
        let pr = &self.q_proj[i];
        if pr.distance > 0.0 {
            p.u.vertices()[i].tr_mul(&((&self.images[i] - &pr.point) / pr.distance))
        } else {
            Vector::zeros(p.n())
        }
    }

    fn dist_direction(&self, x: &Vector) -> Vector {
        if self.c_proj.distance > 0.0 {
            (x - &self.c_proj.point) / self.c_proj.distance
        } else {
            Vector::zeros(x.len())
        }
    }
}

pub fn residual(p: &Problem, x: &Vector) -> Result<ResidualEval> {
    Ok(Pieces::compute(p, x)?.eval(p.tol.tol_feas))
}

/// `max_u [maxᵢ⟨Aᵢx, u⟩ − σ(u | Q)] + dist(x, C)` over the given directions
/// and `u = 0`. Always a lower bound of the residual.
///
/// For cone `Q` each direction is first pushed into the polar cone
/// (nearest cone combination of polar generators, rescaled to unit length),
/// since `σ(· | Q)` is `+∞` everywhere else.
pub fn residual_dual_lb(p: &Problem, x: &Vector, directions: &[Vector]) -> Result<f64> {
    p.check_point(x)?;
    if directions.is_empty() {
        return Err(Error::Precondition("at least one direction is required".into()));
    }
    let images = p.u.evaluate_vertices(x)?;
    let dist = p.c.distance(x, &p.tol)?;
    let polar = if p.q.is_cone() { Some(PolarMap::new(&p.q)?) } else { None };
    let mut best = 0.0_f64;
    for u in directions {
        crate::error::check_dim("dual direction", p.m(), u.len())?;
        let nu = u.norm();
        if nu > 1.0 + 1e-12 {
            return Err(Error::Precondition(format!("direction norm {nu} exceeds 1")));
        }
        let (u, sigma) = match &polar {
            Some(map) => match map.push(u) {
                Some(v) => (v, 0.0),
                None => continue,
            },
            None => (u.clone(), p.q.support(u, &p.tol)?),
        };
        if !sigma.is_finite() {
            continue;
        }
        let top = images.iter().map(|y| y.dot(&u)).fold(f64::NEG_INFINITY, f64::max);
        best = best.max(top - sigma);
    }
    Ok(best + dist)
}

/// Maps a direction to a unit vector of the polar cone `Q°`.
enum PolarMap {
    /// `Q° = {0}`.
    Trivial,
    Nonneg,
    Nonpos,
    Generators(Vec<Vector>),
}

impl PolarMap {
    fn new(q: &ConvexSet) -> Result<Self> {
        Ok(match q {
            ConvexSet::WholeSpace { .. } => PolarMap::Trivial,
            ConvexSet::NonposOrthant { .. } => PolarMap::Nonneg,
            ConvexSet::NonnegOrthant { .. } => PolarMap::Nonpos,
            _ => PolarMap::Generators(q.polar_generators()?),
        })
    }

    fn push(&self, u: &Vector) -> Option<Vector> {
        let v = match self {
            PolarMap::Trivial => return None,
            PolarMap::Nonneg => u.map(|t| t.max(0.0)),
            PolarMap::Nonpos => u.map(|t| t.min(0.0)),
            PolarMap::Generators(g) => cone_decompose(g, u).1,
        };
        let n = v.norm();
        (n > 1e-14).then(|| v / n)
    }
}

/// One element of `∂p_U(x)`. The excess part uses the smallest index of the
/// clean-up set; a part whose distance is 0 contributes 0.
pub fn subgradient(p: &Problem, x: &Vector) -> Result<Vector> {
    let pieces = Pieces::compute(p, x)?;
    Ok(subgradient_from(p, x, &pieces))
}

fn subgradient_from(p: &Problem, x: &Vector, pieces: &Pieces) -> Vector {
    let d = pieces.distances();
    let mut g = pieces.dist_direction(x);
    if d.iter().any(|&v| v > 0.0) {
        let i = cleanup_from_distances(&d, None)[0];
        g += pieces.vertex_subgradient(p, i);
    }
    g
}

/// Residual value together with one subgradient, sharing the projections.
pub fn residual_and_subgradient(p: &Problem, x: &Vector) -> Result<(ResidualEval, Vector)> {
    let pieces = Pieces::compute(p, x)?;
    Ok((pieces.eval(p.tol.tol_feas), subgradient_from(p, x, &pieces)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistTerm {
    Fixed(#[serde(with = "crate::geometry::serde_vec")] Vector),
    ConeGenerators(#[serde(with = "crate::geometry::serde_vec::list")] Vec<Vector>),
}

/// Finite description of the subdifferential at `x`: the excess part is the
/// convex hull of `vertex_subgradients` (or, when `excess_is_cone`, the cone
/// they generate) and the distance part is `dist_term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdifferentialData {
    pub region: RegionTag,
    #[serde(with = "crate::geometry::serde_vec::list")]
    pub vertex_subgradients: Vec<Vector>,
    pub excess_is_cone: bool,
    pub dist_term: DistTerm,
}

impl SubdifferentialData {
    /// `min ‖Vλ + Nμ + w‖` over the described set with the normal-cone parts
    /// taken as full cones. Both the value and its dual bound are returned.
    pub fn min_norm(&self, opts: &MinNormOptions) -> MinNormSolution {
        let dim = self.dim();
        let (hull, mut cone): (&[Vector], Vec<Vector>) = if self.excess_is_cone {
            (&[], self.vertex_subgradients.clone())
        } else {
            (&self.vertex_subgradients, Vec::new())
        };
        let offset = match &self.dist_term {
            DistTerm::Fixed(w) => w.clone(),
            DistTerm::ConeGenerators(gens) => {
                cone.extend(gens.iter().cloned());
                Vector::zeros(dim)
            }
        };
        MinNormProblem { hull, cone: &cone, offset }.solve(opts)
    }

    fn dim(&self) -> usize {
        match &self.dist_term {
            DistTerm::Fixed(w) => w.len(),
            DistTerm::ConeGenerators(g) => g
                .first()
                .or(self.vertex_subgradients.first())
                .map(|v| v.len())
                .unwrap_or(0),
        }
    }
}

/// Generators of the subdifferential pieces at `x`, per region:
/// R1 keeps clean-up vertex subgradients and the fixed distance direction;
/// R2 uses the images `Aᵢᵀg` of normal-cone generators `g ∈ N(Aᵢx; Q)` over
/// every vertex; R3 pairs clean-up vertex subgradients with `N(x; C)`.
pub fn subdifferential_data(p: &Problem, x: &Vector) -> Result<SubdifferentialData> {
    let pieces = Pieces::compute(p, x)?;
    let ev = pieces.eval(p.tol.tol_feas);
    let n = p.n();
    let cleanup_hull = || {
        cleanup_from_distances(&pieces.distances(), None)
            .into_iter()
            .map(|i| pieces.vertex_subgradient(p, i))
            .collect::<Vec<_>>()
    };
    Ok(match ev.region {
        RegionTag::Feasible => SubdifferentialData {
            region: ev.region,
            vertex_subgradients: Vec::new(),
            excess_is_cone: false,
            dist_term: DistTerm::Fixed(Vector::zeros(n)),
        },
        RegionTag::R1 => SubdifferentialData {
            region: ev.region,
            vertex_subgradients: cleanup_hull(),
            excess_is_cone: false,
            dist_term: DistTerm::Fixed(pieces.dist_direction(x)),
        },
        RegionTag::R2 => {
            let mut gens = Vec::new();
            for (a, y) in p.u.vertices().iter().zip(pieces.images.iter()) {
                for g in p.q.normal_cone_generators(y, &p.tol)? {
                    gens.push(a.tr_mul(&g));
                }
            }
            SubdifferentialData {
                region: ev.region,
                vertex_subgradients: gens,
                excess_is_cone: true,
                dist_term: DistTerm::Fixed(pieces.dist_direction(x)),
            }
        }
        RegionTag::R3 => SubdifferentialData {
            region: ev.region,
            vertex_subgradients: cleanup_hull(),
            excess_is_cone: false,
            dist_term: DistTerm::ConeGenerators(p.c.normal_cone_generators(x, &p.tol)?),
        },
    })
}
