//! Probability map → geometric constraint.
//!
//! Pixels scoring strictly above 0.5 become candidate keypoints, a 2×2 PCA of
//! their positions gives a principal point (centroid) and principal line
//! (major axis through the centroid), and fixed image-space heuristics place
//! the end-effector features:
//!
//! - p2p / p2l: effector point at `(W/2, 4H/5)`.
//! - l2l / par: effector line is the vertical `u = W/2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    ConstraintKind, GeometricConstraint, GeometryError, ImageLine, ImagePoint, LineToLineForm,
};
use crate::probmap::ProbabilityMap;

/// Candidate keypoints need a score strictly above this.
pub const CANDIDATE_THRESHOLD: f32 = 0.5;
/// Fewer candidates than this give a rank-deficient covariance.
pub const MIN_CANDIDATES: usize = 3;
/// Relative eigenvalue gap below which the major axis is undefined.
pub const ISOTROPY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("only {0} candidate pixel(s) above threshold, need at least {MIN_CANDIDATES}")]
    TooFewCandidates(usize),
    #[error("candidate distribution is isotropic (eigenvalues {0:.6} and {1:.6}); no principal direction")]
    IsotropicDistribution(f64, f64),
    #[error("{0} needs a principal line but the candidate distribution has none")]
    IllDefinedLine(ConstraintKind),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub points: Vec<(f64, f64)>,
    /// Scores aligned with `points`, used only by weighted PCA.
    pub scores: Vec<f32>,
}

impl CandidateSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cells with score `> 0.5`, in row-major order. Cell `(x, y)` maps to pixel `(x, y)`.
pub fn threshold_candidates(m: &ProbabilityMap) -> CandidateSet {
    let mut set = CandidateSet::default();
    let w = m.width();
    for (i, &s) in m.scores().iter().enumerate() {
        if s > CANDIDATE_THRESHOLD {
            set.points.push(((i % w) as f64, (i / w) as f64));
            set.scores.push(s);
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PcaOptions {
    /// Weight each candidate by its score instead of counting it once.
    pub score_weighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalDecomposition {
    pub centroid: (f64, f64),
    /// Unit vector, `u > 0` (or `v > 0` when `u = 0`).
    pub major_axis: (f64, f64),
    /// `(λ1, λ2)` with `λ1 ≥ λ2 ≥ 0`, pixels².
    pub eigenvalues: (f64, f64),
    /// Min and max projection of the candidates onto the major axis, relative to the centroid.
    pub extent: (f64, f64),
    pub isotropic: bool,
}

impl PrincipalDecomposition {
    pub fn principal_point(&self) -> ImagePoint {
        ImagePoint::new(self.centroid.0, self.centroid.1)
    }

    pub fn principal_line(&self) -> Result<ImageLine, ComposeError> {
        if self.isotropic {
            return Err(ComposeError::IsotropicDistribution(self.eigenvalues.0, self.eigenvalues.1));
        }
        Ok(ImageLine::through(self.centroid, self.major_axis)?)
    }

    /// Endpoints of the candidate spread along the major axis.
    pub fn axis_endpoints(&self) -> (ImagePoint, ImagePoint) {
        let (cu, cv) = self.centroid;
        let (du, dv) = self.major_axis;
        let (lo, hi) = self.extent;
        (
            ImagePoint::new(cu + lo * du, cv + lo * dv),
            ImagePoint::new(cu + hi * du, cv + hi * dv),
        )
    }
}

/// Eigen-decomposition of the symmetric 2×2 matrix `[[a, b], [b, c]]`.
/// Returns `(λ1, λ2, major unit vector)` with `λ1 ≥ λ2`.
fn symmetric_eigen2(a: f64, b: f64, c: f64) -> (f64, f64, (f64, f64)) {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = half_diff.hypot(b);
    let (l1, l2) = (mean + r, mean - r);
    let v = if b == 0.0 {
        if a >= c { (1.0, 0.0) } else { (0.0, 1.0) }
    } else if a >= c {
        (l1 - c, b)
    } else {
        (b, l1 - a)
    };
    let n = v.0.hypot(v.1);
    (l1, l2, (v.0 / n, v.1 / n))
}

fn canonical_direction((u, v): (f64, f64)) -> (f64, f64) {
    if u < 0.0 || (u == 0.0 && v < 0.0) {
        (-u + 0.0, -v + 0.0)
    } else {
        (u + 0.0, v + 0.0)
    }
}

pub fn pca_analyze(c: &CandidateSet) -> Result<PrincipalDecomposition, ComposeError> {
    pca_analyze_with(c, PcaOptions::default())
}

pub fn pca_analyze_with(c: &CandidateSet, opts: PcaOptions) -> Result<PrincipalDecomposition, ComposeError> {
    let n = c.count();
    if n < MIN_CANDIDATES {
        return Err(ComposeError::TooFewCandidates(n));
    }
    let weight = |i: usize| -> f64 {
        if opts.score_weighted {
            c.scores.get(i).copied().unwrap_or(1.0) as f64
        } else {
            1.0
        }
    };
    let (mut sw, mut su, mut sv) = (0.0, 0.0, 0.0);
    for (i, &(u, v)) in c.points.iter().enumerate() {
        let w = weight(i);
        sw += w;
        su += w * u;
        sv += w * v;
    }
    let (mu, mv) = (su / sw, sv / sw);
    let (mut cuu, mut cuv, mut cvv) = (0.0, 0.0, 0.0);
    for (i, &(u, v)) in c.points.iter().enumerate() {
        let w = weight(i);
        let (du, dv) = (u - mu, v - mv);
        cuu += w * du * du;
        cuv += w * du * dv;
        cvv += w * dv * dv;
    }
    let (cuu, cuv, cvv) = (cuu / sw, cuv / sw, cvv / sw);
    let (l1, l2, axis) = symmetric_eigen2(cuu, cuv, cvv);
    let (l1, l2) = (l1.max(0.0), l2.max(0.0));
    let isotropic = (l1 - l2).abs() / l1.max(1e-9) < ISOTROPY_TOL;
    let axis = canonical_direction(axis);

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(u, v) in &c.points {
        let t = (u - mu) * axis.0 + (v - mv) * axis.1;
        lo = lo.min(t);
        hi = hi.max(t);
    }
    Ok(PrincipalDecomposition {
        centroid: (mu, mv),
        major_axis: axis,
        eigenvalues: (l1, l2),
        extent: (lo, hi),
        isotropic,
    })
}

/// Which two image points the line-to-line task moves onto the target line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineEndpoints {
    /// Ends of the vertical effector line `u = W/2`, clipped to the image.
    #[default]
    EffectorLine,
    /// Extreme candidates projected onto the principal line. These lie on the
    /// target line by construction, so the residual is identically zero.
    ProjectedExtremes,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComposeOptions {
    pub l2l_endpoints: LineEndpoints,
    pub l2l_form: LineToLineForm,
}

/// Effector point `(W/2, 4H/5)`.
pub fn effector_point(width: f64, height: f64) -> ImagePoint {
    ImagePoint::new(width / 2.0, 4.0 * height / 5.0)
}

/// Effector line: the vertical through the image center.
pub fn effector_line(width: f64) -> ImageLine {
    ImageLine::vertical(width / 2.0)
}

pub fn compose_constraint(
    kind: ConstraintKind,
    d: &PrincipalDecomposition,
    width: f64,
    height: f64,
) -> Result<GeometricConstraint, ComposeError> {
    compose_constraint_with(kind, d, width, height, ComposeOptions::default())
}

pub fn compose_constraint_with(
    kind: ConstraintKind,
    d: &PrincipalDecomposition,
    width: f64,
    height: f64,
    opts: ComposeOptions,
) -> Result<GeometricConstraint, ComposeError> {
    let target_line = || d.principal_line().map_err(|_| ComposeError::IllDefinedLine(kind));
    let c = match kind {
        ConstraintKind::PointToPoint => {
            GeometricConstraint::point_to_point(effector_point(width, height), d.principal_point())
        }
        ConstraintKind::PointToLine => {
            GeometricConstraint::point_to_line(effector_point(width, height), target_line()?)
        }
        ConstraintKind::LineToLine => {
            let l34 = target_line()?;
            let (f1, f2) = match opts.l2l_endpoints {
                LineEndpoints::EffectorLine => (
                    ImagePoint::new(width / 2.0, 0.0),
                    ImagePoint::new(width / 2.0, (height - 1.0).max(0.0)),
                ),
                LineEndpoints::ProjectedExtremes => d.axis_endpoints(),
            };
            GeometricConstraint::line_to_line(f1, f2, l34).with_l2l_form(opts.l2l_form)
        }
        ConstraintKind::ParallelLines => {
            GeometricConstraint::parallel_lines(effector_line(width), target_line()?)
        }
    };
    Ok(c)
}

/// Threshold → PCA → compose every kind against one map.
pub fn compose_from_map(
    m: &ProbabilityMap,
    kinds: &[ConstraintKind],
    opts: ComposeOptions,
) -> Result<(PrincipalDecomposition, Vec<GeometricConstraint>), ComposeError> {
    let d = pca_analyze(&threshold_candidates(m))?;
    let (w, h) = (m.width() as f64, m.height() as f64);
    let cs = kinds
        .iter()
        .map(|&k| compose_constraint_with(k, &d, w, h, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((d, cs))
}
