//! Error-bound certificates: the Slater margin and the bound it implies, a
//! sampled estimate of the min-norm subgradient constant, and the cone
//! conditions of the single-matrix case.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::minnorm::{MinNormOptions, MinNormProblem};
use crate::geometry::{lambda_extremes_sym, ConvexSet, Matrix, Vector};
use crate::problem::Problem;
use crate::residual::{subdifferential_data, RegionTag};
use crate::solver::{project_system, PolishOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    SlaterEta,
    CHatEstimate,
    NominalConeCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Proven inequality, valid for every `x`.
    RigorousCore,
    /// Computed over finitely many samples.
    HeuristicSampled,
    /// Decided exactly for the single-matrix case.
    ExactNominal,
    /// The numerical test could not decide.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    /// Raw points drawn from the box.
    pub count: usize,
    /// Evaluated points with positive residual (raw points and their projections).
    pub accepted: usize,
    pub seed: u64,
    pub box_radius: f64,
    /// Largest primal/dual gap among the min-norm subproblems.
    pub max_gap: f64,
    /// Subproblems that hit the iteration cap.
    pub unconverged: usize,
    pub region_counts: RegionCounts,
    /// Sample attaining the reported minimum.
    #[serde(with = "crate::geometry::serde_vec::option")]
    pub argmin: Option<Vector>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
}

impl RegionCounts {
    fn add(&mut self, r: RegionTag) {
        match r {
            RegionTag::R1 => self.r1 += 1,
            RegionTag::R2 => self.r2 += 1,
            RegionTag::R3 => self.r3 += 1,
            RegionTag::Feasible => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub kind: CertificateKind,
    pub tau: Option<f64>,
    pub eta: Option<f64>,
    pub c_hat: Option<f64>,
    pub scope: Scope,
    pub sample_meta: Option<SampleMeta>,
    pub nominal: Option<NominalReport>,
    pub notes: Vec<String>,
}

// ---- Slater margin ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterConfig {
    /// Random starts for the projected subgradient ascent.
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SlaterConfig {
    fn default() -> Self {
        Self { starts: 8, iterations: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterReport {
    pub found: bool,
    /// Point of the unit ball attaining `eta`.
    #[serde(with = "crate::geometry::serde_vec")]
    pub u: Vector,
    /// `minᵢⱼ −⟨ĝⱼ, Aᵢu⟩` over normalized rows `ĝⱼ` of `Q = {y : Gy ≤ 0}`.
    pub eta: f64,
    pub per_vertex_margins: Vec<f64>,
    pub reason: Option<String>,
}

/// Unit rows `ĝⱼ` with `Q = {y : ĝⱼᵀy ≤ 0 ∀j}`.
fn normalized_cone_rows(q: &ConvexSet) -> Result<Vec<Vector>> {
    let unsupported = |reason: &str| Error::Unsupported {
        op: "slater check",
        variant: q.variant_name().into(),
        reason: reason.into(),
    };
    let m = q.dim();
    match q {
        ConvexSet::NonnegOrthant { .. } | ConvexSet::NonposOrthant { .. } => {
            let (g, _) = q.halfspaces().expect("orthants are polyhedral");
            Ok((0..m).map(|j| g.row(j).transpose()).collect())
        }
        ConvexSet::Halfspaces { g, h } => {
            if h.iter().any(|&t| t != 0.0) {
                return Err(unsupported("Q must be a cone (all offsets zero)"));
            }
            Ok((0..g.nrows()).map(|j| g.row(j).transpose() / g.row(j).norm()).collect())
        }
        _ => Err(unsupported("Q must be an orthant or a polyhedral cone")),
    }
}

fn margins(rows: &[Vec<Vector>], u: &Vector) -> Vec<f64> {
    rows.iter()
        .map(|ws| ws.iter().map(|w| w.dot(u)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Searches the unit ball for `u` with every `Aᵢu` deep inside `Q`.
///
/// The best margin is `dist(0, conv{−Aᵢᵀĝⱼ})`, attained at the normalized
/// min-norm point; that candidate and seeded projected-subgradient ascent
/// runs are evaluated and the best margin is kept.
pub fn check_slater(p: &Problem, cfg: &SlaterConfig) -> Result<SlaterReport> {
    let q_rows = normalized_cone_rows(&p.q)?;
    let n = p.n();
    let not_found = |reason: String| SlaterReport {
        found: false,
        u: Vector::zeros(n),
        eta: 0.0,
        per_vertex_margins: vec![0.0; p.u.len()],
        reason: Some(reason),
    };
    if q_rows.is_empty() {
        return Ok(not_found("Q has no constraints".into()));
    }
    // int Q = ∅ exactly when 0 is a convex combination of the unit rows
    let gordan = MinNormProblem { hull: &q_rows, cone: &[], offset: Vector::zeros(p.m()) }
        .solve(&MinNormOptions::default());
    if gordan.value <= 1e-9 {
        return Ok(not_found("int Q = ∅".into()));
    }

    let rows: Vec<Vec<Vector>> = p
        .u
        .vertices()
        .iter()
        .map(|a| q_rows.iter().map(|g| -a.tr_mul(g)).collect())
        .collect();
    let flat: Vec<Vector> = rows.iter().flatten().cloned().collect();
    let phi = |u: &Vector| margins(&rows, u).into_iter().fold(f64::INFINITY, f64::min);

    let mut candidates = Vec::new();
    let sol = MinNormProblem { hull: &flat, cone: &[], offset: Vector::zeros(n) }.solve(&MinNormOptions::default());
    if sol.value > 0.0 {
        candidates.push(&sol.point / sol.value);
    }
    candidates.extend(sol.dual_direction.clone());
    let ascents: Vec<Vector> = (0..cfg.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            let mut u = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let norm = u.norm();
            if norm > 1.0 {
                u /= norm;
            }
            let mut best = (phi(&u), u.clone());
            for t in 0..cfg.iterations {
                // subgradient of the min: the minimizing row
                let w = flat
                    .iter()
                    .min_by(|a, b| a.dot(&u).total_cmp(&b.dot(&u)))
                    .expect("nonempty rows");
                u.axpy(0.5 / ((t + 1) as f64).sqrt(), w, 1.0);
                let norm = u.norm();
                if norm > 1.0 {
                    u /= norm;
                }
                let val = phi(&u);
                if val > best.0 {
                    best = (val, u.clone());
                }
            }
            best.1
        })
        .collect();
    candidates.extend(ascents);

    let mut best_u = Vector::zeros(n);
    let mut best_eta = 0.0;
    for u in candidates {
        let val = phi(&u);
        if val > best_eta {
            best_eta = val;
            best_u = u;
        }
    }
    let found = best_eta > p.tol.tol_feas;
    Ok(SlaterReport {
        found,
        per_vertex_margins: margins(&rows, &best_u),
        u: best_u,
        eta: best_eta,
        reason: (!found).then(|| "no interior direction found".to_string()),
    })
}

/// `dist(x, {y : Aᵢy ∈ Q ∀i}) ≤ e(𝒜_U(x), Q)/η` for every `x`, where `η` is
/// the Slater margin.
pub fn core_error_bound(p: &Problem, slater: &SlaterReport) -> Result<BoundCertificate> {
    if !slater.found || !(slater.eta > 0.0) {
        return Err(Error::Precondition("core bound needs a Slater point with positive margin".into()));
    }
    Ok(BoundCertificate {
        kind: CertificateKind::SlaterEta,
        tau: Some(1.0 / slater.eta),
        eta: Some(slater.eta),
        c_hat: None,
        scope: Scope::RigorousCore,
        sample_meta: None,
        nominal: None,
        notes: vec![
            format!(
                "dist(x, preimage of Q) <= excess(x) / {:.6e} for all x in R^{}",
                slater.eta,
                p.n()
            ),
            "bound on dist(x, Solv) additionally needs the subtransversality constant of C and the preimage, \
             which is not computed"
                .into(),
        ],
    })
}

/// `excess(x)/η`, the right-hand side of the core inequality.
pub fn core_bound_value(p: &Problem, eta: f64, x: &Vector) -> Result<f64> {
    Ok(p.u.excess(x, &p.q, &p.tol)? / eta)
}

// ---- sampled min-norm constant ----

#[derive(Debug, Clone, PartialEq)]
pub struct CHatConfig {
    pub samples: usize,
    pub box_radius: f64,
    pub seed: u64,
    /// Keep only these regions (all when `None`).
    pub regions: Option<Vec<RegionTag>>,
    /// Also evaluate each raw sample's projections onto `C` and onto the
    /// preimage of `Q`, which land in the thin regions R3 and R2.
    pub project_samples: bool,
    pub min_norm: MinNormOptions,
}

impl Default for CHatConfig {
    fn default() -> Self {
        Self {
            samples: 20_000,
            box_radius: 10.0,
            seed: 0,
            regions: None,
            project_samples: true,
            min_norm: MinNormOptions { dual_slack: 1e-10, ..MinNormOptions::default() },
        }
    }
}

/// Per-point lower bound of `dist(0, ∂p_U(x))` as used by [`estimate_c_hat`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBound {
    #[serde(with = "crate::geometry::serde_vec")]
    pub x: Vector,
    pub region: RegionTag,
    pub lower: f64,
    pub value: f64,
    pub converged: bool,
}

pub fn local_bound(p: &Problem, x: &Vector, opts: &MinNormOptions) -> Result<Option<LocalBound>> {
    let data = subdifferential_data(p, x)?;
    if data.region == RegionTag::Feasible {
        return Ok(None);
    }
    let sol = data.min_norm(opts);
    Ok(Some(LocalBound {
        x: x.clone(),
        region: data.region,
        lower: sol.lower_bound,
        value: sol.value,
        converged: sol.converged,
    }))
}

/// Points evaluated for raw sample `i`: the sample, and optionally its
/// projections onto `C` and onto the preimage of `Q`.
pub fn sample_points(p: &Problem, i: usize, cfg: &CHatConfig, preimage: Option<&(Matrix, Vector)>) -> Result<Vec<Vector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    let r = cfg.box_radius;
    let x = Vector::from_fn(p.n(), |_, _| rng.gen_range(-r..=r));
    let mut out = vec![x.clone()];
    if cfg.project_samples {
        if !matches!(p.c, ConvexSet::WholeSpace { .. }) {
            out.push(p.c.project(&x, &p.tol)?.point);
        }
        if let Some((g, h)) = preimage {
            if let PolishOutcome::Exact { x_exact, .. } = project_system(g, h, &x, p) {
                out.push(x_exact);
            }
        }
    }
    Ok(out)
}

/// `c_hat = min ℓ(x)` over seeded samples with positive residual, where
/// `ℓ(x)` is a certified lower bound of `min ‖Vλ + Nμ + w‖` over the
/// subdifferential data at `x`, with normal-cone parts taken as full cones.
pub fn estimate_c_hat(p: &Problem, samples: usize, box_radius: f64, seed: u64) -> Result<BoundCertificate> {
    estimate_c_hat_with(p, &CHatConfig { samples, box_radius, seed, ..CHatConfig::default() })
}

pub fn estimate_c_hat_with(p: &Problem, cfg: &CHatConfig) -> Result<BoundCertificate> {
    if !(cfg.box_radius > 0.0) {
        return Err(Error::Precondition("box radius must be positive".into()));
    }
    let preimage = if cfg.project_samples && p.q.is_polyhedral() { p.preimage_system()? } else { None };
    let per_sample: Vec<Result<Vec<LocalBound>>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for x in sample_points(p, i, cfg, preimage.as_ref())? {
                if let Some(lb) = local_bound(p, &x, &cfg.min_norm)? {
                    if cfg.regions.as_ref().is_none_or(|rs| rs.contains(&lb.region)) {
                        out.push(lb);
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut accepted = 0;
    let mut best: Option<LocalBound> = None;
    let mut max_gap: f64 = 0.0;
    let mut unconverged = 0;
    let mut counts = RegionCounts::default();
    for bounds in per_sample {
        for lb in bounds? {
            accepted += 1;
            counts.add(lb.region);
            max_gap = max_gap.max(lb.value - lb.lower);
            if !lb.converged {
                unconverged += 1;
            }
            if best.as_ref().is_none_or(|b| lb.lower < b.lower) {
                best = Some(lb);
            }
        }
    }
    let Some(best) = best else {
        return Err(Error::NoSamples { drawn: cfg.samples });
    };
    let c_hat = best.lower.max(0.0);
    Ok(BoundCertificate {
        kind: CertificateKind::CHatEstimate,
        tau: (c_hat > 0.0).then(|| 1.0 / c_hat),
        eta: None,
        c_hat: Some(c_hat),
        scope: Scope::HeuristicSampled,
        sample_meta: Some(SampleMeta {
            count: cfg.samples,
            accepted,
            seed: cfg.seed,
            box_radius: cfg.box_radius,
            max_gap,
            unconverged,
            region_counts: counts,
            argmin: Some(best.x),
        }),
        nominal: None,
        notes: vec![
            "minimum over finitely many samples of an infimum over an unbounded region".into(),
            "normal-cone parts are taken as full cones (unit-ball cap dropped), which can only lower the bound".into(),
            "in R2 the normal-cone images of every vertex are used, not only maximizing ones".into(),
        ],
    })
}

// ---- single-matrix cone conditions ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum ConditionVerdict {
    Pass { via: String },
    Fail {
        #[serde(with = "crate::geometry::serde_vec")]
        witness: Vector,
    },
    Indeterminate { reason: String },
}

impl ConditionVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, ConditionVerdict::Pass { .. })
    }
    pub fn is_fail(&self) -> bool {
        matches!(self, ConditionVerdict::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalReport {
    /// `ker Aᵀ ∩ Q° = {0}`.
    pub kernel_condition: ConditionVerdict,
    /// `Aᵀ(Q°) ∩ (−C°) = {0}`.
    pub constraint_condition: ConditionVerdict,
    /// `Some(true)` when both pass, `Some(false)` when either fails.
    pub holds: Option<bool>,
}

fn unit_generators(gens: Vec<Vector>) -> Vec<Vector> {
    gens.into_iter().filter(|g| g.norm() > 0.0).map(|g| &g / g.norm()).collect()
}

/// Decides the two cone conditions that give a global error bound when `U`
/// is a single matrix `A` and `C`, `Q` are cones.
pub fn check_nominal_conditions(p: &Problem) -> Result<BoundCertificate> {
    if p.u.len() != 1 {
        return Err(Error::Precondition(format!(
            "nominal check needs exactly one matrix, got {}",
            p.u.len()
        )));
    }
    for (name, s) in [("C", &p.c), ("Q", &p.q)] {
        if !s.is_cone() {
            return Err(Error::Unsupported {
                op: "nominal check",
                variant: s.variant_name().into(),
                reason: format!("{name} must be a cone"),
            });
        }
    }
    let a = &p.u.vertices()[0];
    let zero_tol = p.tol.tol_dual;
    let opts = MinNormOptions::default();
    let w = unit_generators(p.q.polar_generators()?);
    let atw: Vec<Vector> = w.iter().map(|g| a.tr_mul(g)).collect();
    let lift = |lam: &Vector| -> Vector {
        let mut out = Vector::zeros(p.m());
        for (g, &l) in w.iter().zip(lam.iter()) {
            out.axpy(l, g, 1.0);
        }
        out
    };

    let aat = a * a.transpose();
    let (lmin, _) = lambda_extremes_sym(&aat, p.tol.tol_eig)?;
    let kernel_condition = if lmin > 1e-10 * aat.amax().max(1.0) {
        ConditionVerdict::Pass { via: "A is onto".into() }
    } else if w.is_empty() {
        ConditionVerdict::Pass { via: "Q° = {0}".into() }
    } else {
        let sol = MinNormProblem { hull: &atw, cone: &[], offset: Vector::zeros(p.n()) }.solve(&opts);
        if sol.lower_bound > zero_tol {
            ConditionVerdict::Pass { via: format!("min ‖Aᵀv‖ over unit Q° combinations ≥ {:.3e}", sol.lower_bound) }
        } else if sol.value <= zero_tol {
            let v = lift(&sol.hull_weights);
            if v.norm() > zero_tol {
                ConditionVerdict::Fail { witness: v }
            } else {
                ConditionVerdict::Indeterminate {
                    reason: "zero reached only by a vanishing combination of Q° generators".into(),
                }
            }
        } else {
            ConditionVerdict::Indeterminate {
                reason: format!("min-norm bracket [{:.3e}, {:.3e}] straddles the tolerance", sol.lower_bound, sol.value),
            }
        }
    };

    let constraint_condition = if matches!(p.c, ConvexSet::WholeSpace { .. }) {
        ConditionVerdict::Pass { via: "C is the whole space".into() }
    } else if w.is_empty() {
        ConditionVerdict::Pass { via: "Q° = {0}".into() }
    } else {
        let m_gens = unit_generators(p.c.polar_generators()?);
        let sol = MinNormProblem { hull: &atw, cone: &m_gens, offset: Vector::zeros(p.n()) }.solve(&opts);
        if sol.lower_bound > zero_tol {
            ConditionVerdict::Pass {
                via: format!("min ‖Aᵀv + c‖ over unit Q° combinations and c ∈ C° ≥ {:.3e}", sol.lower_bound),
            }
        } else if sol.value <= zero_tol {
            let image = sol.hull_part(&atw);
            if image.norm() > zero_tol {
                ConditionVerdict::Fail { witness: image }
            } else {
                ConditionVerdict::Indeterminate {
                    reason: "zero reached only with Aᵀv = 0; the intersection may still be trivial".into(),
                }
            }
        } else {
            ConditionVerdict::Indeterminate {
                reason: format!("min-norm bracket [{:.3e}, {:.3e}] straddles the tolerance", sol.lower_bound, sol.value),
            }
        }
    };

    let holds = if kernel_condition.is_fail() || constraint_condition.is_fail() {
        Some(false)
    } else if kernel_condition.is_pass() && constraint_condition.is_pass() {
        Some(true)
    } else {
        None
    };
    let scope = if holds.is_some() { Scope::ExactNominal } else { Scope::Indeterminate };
    let mut notes = Vec::new();
    match holds {
        Some(true) => notes.push("a global error bound holds with some τ > 0 (τ not computed)".into()),
        Some(false) => notes.push("a cone condition fails; no error bound is certified".into()),
        None => notes.push("undecided; not coerced to pass or fail".into()),
    }
    Ok(BoundCertificate {
        kind: CertificateKind::NominalConeCheck,
        tau: None,
        eta: None,
        c_hat: None,
        scope,
        sample_meta: None,
        nominal: Some(NominalReport { kernel_condition, constraint_condition, holds }),
        notes,
    })
}
