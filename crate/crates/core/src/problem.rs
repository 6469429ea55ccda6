//! Problem data and the JSON problem-file schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, Matrix, Vector};
use crate::tol::Tolerances;
use crate::uncertainty::UncertaintySet;

/// Find `x ∈ C` with `Ax ∈ Q` for every `A ∈ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub c: ConvexSet,
    pub q: ConvexSet,
    pub u: UncertaintySet,
    pub tol: Tolerances,
}

impl Problem {
    pub fn new(c: ConvexSet, q: ConvexSet, u: UncertaintySet) -> Result<Self> {
        Self::with_tolerances(c, q, u, Tolerances::default())
    }

    pub fn with_tolerances(c: ConvexSet, q: ConvexSet, u: UncertaintySet, tol: Tolerances) -> Result<Self> {
        c.validate()?;
        q.validate()?;
        if c.dim() != u.cols() {
            return Err(Error::InvalidProblem(format!(
                "C has dimension {} but vertex matrices have {} columns",
                c.dim(),
                u.cols()
            )));
        }
        if q.dim() != u.rows() {
            return Err(Error::InvalidProblem(format!(
                "Q has dimension {} but vertex matrices have {} rows",
                q.dim(),
                u.rows()
            )));
        }
        Ok(Self { c, q, u, tol })
    }

    /// Decision-space dimension.
    pub fn n(&self) -> usize {
        self.u.cols()
    }

    /// Image-space dimension.
    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn check_point(&self, x: &Vector) -> Result<()> {
        crate::error::check_dim("decision vector", self.n(), x.len())
    }

    /// `Q` must be a closed convex pointed cone, `{0} ≠ Q ≠ ℝᵐ`.
    pub fn require_pointed_cone_q(&self) -> Result<()> {
        if !self.q.is_cone() {
            return Err(Error::Precondition("Q must be a cone".into()));
        }
        if !self.q.is_pointed_cone()? {
            return Err(Error::Precondition("Q must be a pointed cone".into()));
        }
        Ok(())
    }

    /// Halfspace description of `{x : Aᵢx ∈ Q ∀i}`, the set of points whose
    /// whole image lies in `Q`. Requires a polyhedral `Q`.
    ///
    /// Rows `gⱼᵀAᵢ` that vanish are dropped when `hⱼ ≥ 0`; a vanishing row
    /// with `hⱼ < 0` makes the system infeasible, signalled by `Ok(None)`.
    pub fn preimage_system(&self) -> Result<Option<(Matrix, Vector)>> {
        let (gq, hq) = self.q.halfspaces().ok_or_else(|| Error::Unsupported {
            op: "preimage system",
            variant: self.q.variant_name().into(),
            reason: "Q must be polyhedral".into(),
        })?;
        let mut rows: Vec<Vector> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for a in self.u.vertices() {
            let ga = &gq * a;
            for j in 0..ga.nrows() {
                let row = ga.row(j).transpose();
                if row.norm() <= 1e-14 * (1.0 + gq.row(j).norm() * a.norm()) {
                    if hq[j] < 0.0 {
                        return Ok(None);
                    }
                    continue;
                }
                rows.push(row);
                rhs.push(hq[j]);
            }
        }
        Ok(Some(stack(self.n(), rows, rhs)))
    }

    /// Halfspace description of the robust solution set: `C`'s rows plus the
    /// preimage rows. Requires polyhedral `C` and `Q`.
    pub fn solution_system(&self) -> Result<Option<(Matrix, Vector)>> {
        let (gc, hc) = self.c.halfspaces().ok_or_else(|| Error::Unsupported {
            op: "solution system",
            variant: self.c.variant_name().into(),
            reason: "C must be polyhedral".into(),
        })?;
        let Some((gp, hp)) = self.preimage_system()? else {
            return Ok(None);
        };
        let mut rows: Vec<Vector> = (0..gc.nrows()).map(|j| gc.row(j).transpose()).collect();
        let mut rhs: Vec<f64> = hc.iter().copied().collect();
        rows.extend((0..gp.nrows()).map(|j| gp.row(j).transpose()));
        rhs.extend(hp.iter().copied());
        Ok(Some(stack(self.n(), rows, rhs)))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        file.into_problem()
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            version: "1".into(),
            n: self.n(),
            m: self.m(),
            c: self.c.clone(),
            q: self.q.clone(),
            u: self.u.clone(),
            tolerances: Some(self.tol),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem serialization cannot fail")
    }
}

fn stack(n: usize, rows: Vec<Vector>, rhs: Vec<f64>) -> (Matrix, Vector) {
    let g = Matrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    (g, Vector::from_vec(rhs))
}

/// Read and validate a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    Problem::load(path)
}

/// On-disk problem description (version "1").
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "C")]
    pub c: ConvexSet,
    #[serde(rename = "Q")]
    pub q: ConvexSet,
    #[serde(rename = "U")]
    pub u: UncertaintySet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<Problem> {
        if self.version != "1" {
            return Err(Error::Schema(format!("field `version`: unsupported version {:?}", self.version)));
        }
        if self.u.cols() != self.n {
            return Err(Error::Schema(format!(
                "field `n`: declared {} but vertex matrices have {} columns",
                self.n,
                self.u.cols()
            )));
        }
        if self.u.rows() != self.m {
            return Err(Error::Schema(format!(
                "field `m`: declared {} but vertex matrices have {} rows",
                self.m,
                self.u.rows()
            )));
        }
        if self.c.dim() != self.n {
            return Err(Error::Schema(format!("field `C`: dimension {} does not match n = {}", self.c.dim(), self.n)));
        }
        if self.q.dim() != self.m {
            return Err(Error::Schema(format!("field `Q`: dimension {} does not match m = {}", self.q.dim(), self.m)));
        }
        Problem::with_tolerances(self.c, self.q, self.u, self.tolerances.unwrap_or_default())
    }
}
