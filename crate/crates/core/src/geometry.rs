//! Homogeneous 2D point/line algebra and the image-space task functions.
//!
//! Points are `(u, v, w)` with `w = 1` for finite pixels. Lines are `(a, b, c)`
//! with `a·u + b·v + c·w = 0`; every line handed out by this module is
//! unit-normalized (`a² + b² = 1`, `a > 0` or `b > 0` when `a = 0`) so that
//! `point · line` is a signed distance in pixels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two points closer than this (pixels) do not define a line.
pub const COINCIDENT_TOL: f64 = 1e-9;
/// Minimum `|w|` for dehomogenization.
pub const HOMOGENEOUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("points coincide (separation {0:e} px)")]
    CoincidentPoints(f64),
    #[error("{kind} expects {points} point(s) and {lines} line(s), got {got_points} and {got_lines}")]
    ArityMismatch {
        kind: ConstraintKind,
        points: usize,
        lines: usize,
        got_points: usize,
        got_lines: usize,
    },
    #[error("line has no finite normal and cannot be normalized")]
    DegenerateLine,
    #[error("point at infinity cannot be dehomogenized")]
    PointAtInfinity,
    #[error("non-finite component")]
    NonFinite,
    #[error("empty constraint list")]
    EmptyConstraintList,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl ImagePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v, w: 1.0 }
    }

    pub const fn homogeneous(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }

    /// Returns the same point scaled to `w = 1`.
    pub fn normalized(&self) -> Result<ImagePoint, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if self.w.abs() <= HOMOGENEOUS_TOL {
            return Err(GeometryError::PointAtInfinity);
        }
        if self.w == 1.0 {
            return Ok(*self);
        }
        Ok(ImagePoint::new(self.u / self.w, self.v / self.w))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }

    /// Homogeneous dot product with a line.
    pub fn dot(&self, l: &ImageLine) -> f64 {
        self.u * l.a + self.v * l.b + self.w * l.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ImageLine {
    /// Builds a unit-normalized line from raw coefficients.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        ImageLine { a, b, c }.unit_normalized()
    }

    /// Raw coefficients, no normalization.
    pub const fn raw(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// The vertical line `u = u0`.
    pub fn vertical(u0: f64) -> Self {
        Self { a: 1.0, b: 0.0, c: -u0 }
    }

    /// The horizontal line `v = v0`.
    pub fn horizontal(v0: f64) -> Self {
        Self { a: 0.0, b: 1.0, c: -v0 }
    }

    /// Line through `point` with direction `(du, dv)`.
    pub fn through(point: (f64, f64), direction: (f64, f64)) -> Result<Self, GeometryError> {
        let (du, dv) = direction;
        ImageLine::new(-dv, du, dv * point.0 - du * point.1)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    pub fn unit_normalized(&self) -> Result<Self, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let n = self.a.hypot(self.b);
        if n <= HOMOGENEOUS_TOL {
            return Err(GeometryError::DegenerateLine);
        }
        let sign = if self.a > 0.0 || (self.a == 0.0 && self.b > 0.0) {
            1.0
        } else {
            -1.0
        };
        let s = sign / n;
        // avoid -0.0 so equal lines compare bit-identical
        Ok(Self {
            a: self.a * s + 0.0,
            b: self.b * s + 0.0,
            c: self.c * s + 0.0,
        })
    }

    /// Unit direction vector along the line.
    pub fn direction(&self) -> (f64, f64) {
        let n = self.a.hypot(self.b);
        (self.b / n, -self.a / n)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

fn cross(p: [f64; 3], q: [f64; 3]) -> [f64; 3] {
    [
        p[1] * q[2] - p[2] * q[1],
        p[2] * q[0] - p[0] * q[2],
        p[0] * q[1] - p[1] * q[0],
    ]
}

/// The unit-normalized line through two points (their homogeneous cross product).
pub fn line_from_points(p: &ImagePoint, q: &ImagePoint) -> Result<ImageLine, GeometryError> {
    let p = p.normalized()?;
    let q = q.normalized()?;
    let sep = (q.u - p.u).hypot(q.v - p.v);
    if sep < COINCIDENT_TOL {
        return Err(GeometryError::CoincidentPoints(sep));
    }
    let [a, b, c] = cross(p.as_array(), q.as_array());
    ImageLine::new(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    #[serde(rename = "p2p")]
    PointToPoint,
    #[serde(rename = "p2l")]
    PointToLine,
    #[serde(rename = "l2l")]
    LineToLine,
    #[serde(rename = "par")]
    ParallelLines,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] = [
        ConstraintKind::PointToPoint,
        ConstraintKind::PointToLine,
        ConstraintKind::LineToLine,
        ConstraintKind::ParallelLines,
    ];

    /// (points, lines) required.
    pub fn arity(self) -> (usize, usize) {
        match self {
            ConstraintKind::PointToPoint => (2, 0),
            ConstraintKind::PointToLine => (1, 1),
            ConstraintKind::LineToLine => (2, 1),
            ConstraintKind::ParallelLines => (0, 2),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ConstraintKind::PointToPoint => "p2p",
            ConstraintKind::PointToLine => "p2l",
            ConstraintKind::LineToLine => "l2l",
            ConstraintKind::ParallelLines => "par",
        }
    }

    /// Whether composing this kind needs a well-defined principal line.
    pub fn needs_line(self) -> bool {
        !matches!(self, ConstraintKind::PointToPoint)
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown constraint kind `{0}` (expected p2p, p2l, l2l or par)")]
pub struct ParseKindError(pub String);

impl FromStr for ConstraintKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p2p" | "point-to-point" => Ok(ConstraintKind::PointToPoint),
            "p2l" | "point-to-line" => Ok(ConstraintKind::PointToLine),
            "l2l" | "line-to-line" => Ok(ConstraintKind::LineToLine),
            "par" | "parallel" => Ok(ConstraintKind::ParallelLines),
            _ => Err(ParseKindError(s.to_string())),
        }
    }
}

/// Parses a comma-separated kind list such as `p2p,par`.
pub fn parse_kind_list(s: &str) -> Result<Vec<ConstraintKind>, ParseKindError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// How the line-to-line task is scalarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineToLineForm {
    /// `f1·l + f2·l`, one residual. Cancels for points on opposite sides.
    #[default]
    Sum,
    /// `(f1·l, f2·l)`, two residuals.
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricConstraint {
    pub kind: ConstraintKind,
    pub points: Vec<ImagePoint>,
    pub lines: Vec<ImageLine>,
    #[serde(default)]
    pub l2l_form: LineToLineForm,
}

impl GeometricConstraint {
    pub fn point_to_point(f1: ImagePoint, f2: ImagePoint) -> Self {
        Self::raw(ConstraintKind::PointToPoint, vec![f1, f2], vec![])
    }

    pub fn point_to_line(f1: ImagePoint, l23: ImageLine) -> Self {
        Self::raw(ConstraintKind::PointToLine, vec![f1], vec![l23])
    }

    pub fn line_to_line(f1: ImagePoint, f2: ImagePoint, l34: ImageLine) -> Self {
        Self::raw(ConstraintKind::LineToLine, vec![f1, f2], vec![l34])
    }

    pub fn parallel_lines(l12: ImageLine, l34: ImageLine) -> Self {
        Self::raw(ConstraintKind::ParallelLines, vec![], vec![l12, l34])
    }

    pub fn raw(kind: ConstraintKind, points: Vec<ImagePoint>, lines: Vec<ImageLine>) -> Self {
        Self {
            kind,
            points,
            lines,
            l2l_form: LineToLineForm::Sum,
        }
    }

    pub fn with_l2l_form(mut self, form: LineToLineForm) -> Self {
        self.l2l_form = form;
        self
    }

    pub fn residual_dim(&self) -> usize {
        match (self.kind, self.l2l_form) {
            (ConstraintKind::PointToPoint, _) => 2,
            (ConstraintKind::LineToLine, LineToLineForm::Stacked) => 2,
            _ => 1,
        }
    }

    fn check_arity(&self) -> Result<(), GeometryError> {
        let (points, lines) = self.kind.arity();
        if self.points.len() != points || self.lines.len() != lines {
            return Err(GeometryError::ArityMismatch {
                kind: self.kind,
                points,
                lines,
                got_points: self.points.len(),
                got_lines: self.lines.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates a task function; zero when the alignment holds.
///
/// Points are dehomogenized and lines unit-normalized before evaluation, so
/// point/line residuals are signed pixel distances. The parallel-line task is
/// the third component of `l12 × l34`, i.e. the sine of the angle between the
/// two lines.
pub fn evaluate_constraint(c: &GeometricConstraint) -> Result<Vec<f64>, GeometryError> {
    c.check_arity()?;
    let points = c
        .points
        .iter()
        .map(ImagePoint::normalized)
        .collect::<Result<Vec<_>, _>>()?;
    let lines = c
        .lines
        .iter()
        .map(ImageLine::unit_normalized)
        .collect::<Result<Vec<_>, _>>()?;

    let r = match c.kind {
        ConstraintKind::PointToPoint => {
            let (f1, f2) = (points[0], points[1]);
            vec![f2.u - f1.u, f2.v - f1.v]
        }
        ConstraintKind::PointToLine => vec![points[0].dot(&lines[0])],
        ConstraintKind::LineToLine => {
            let d1 = points[0].dot(&lines[0]);
            let d2 = points[1].dot(&lines[0]);
            match c.l2l_form {
                LineToLineForm::Sum => vec![d1 + d2],
                LineToLineForm::Stacked => vec![d1, d2],
            }
        }
        ConstraintKind::ParallelLines => {
            let x = cross(lines[0].as_array(), lines[1].as_array());
            vec![x[2]]
        }
    };
    Ok(r)
}

/// Concatenates residuals of all constraints in input order.
pub fn stack_residuals(constraints: &[GeometricConstraint]) -> Result<Vec<f64>, GeometryError> {
    if constraints.is_empty() {
        return Err(GeometryError::EmptyConstraintList);
    }
    let mut e = Vec::with_capacity(constraints.iter().map(|c| c.residual_dim()).sum());
    for c in constraints {
        e.extend(evaluate_constraint(c)?);
    }
    Ok(e)
}
