//! Core geometry types: features, spline segments, lines, the lane model and
//! the odometry delta that moves it between frames.
//!
//! All longitudinal/lateral coordinates live in the vehicle frame: x forward,
//! y to the left, headings counter-clockwise about +x. Lines are cubic
//! polynomials y = f(x) per segment, stored constant-first:
//! f(x) = c0 + c1 x + c2 x^2 + c3 x^3.

use nalgebra::Matrix3;

use crate::attributes::{AttributeMass, LineColor, MarkingType};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Stable identifier a line keeps across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineId(pub u32);

impl std::fmt::Display for LineId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which derivative of the line polynomial to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    Value,
    Slope,
    Curvature,
}

/// Converts a heading angle to the slope dy/dx it induces on y = f(x).
#[inline]
pub fn slope_from_heading<T: Real>(theta: T) -> T {
    theta.tan()
}

/// Converts a slope dy/dx back to a heading angle in (-pi/2, pi/2).
#[inline]
pub fn heading_from_slope<T: Real>(slope: T) -> T {
    slope.atan()
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    let mut a = a % two_pi;
    if a > T::pi() {
        a -= two_pi;
    } else if a <= -T::pi() {
        a += two_pi;
    }
    a
}

/// One lane-marking detection in the vehicle frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature<T> {
    pub x: T,
    pub y: T,
    /// Marking direction at the sample; bounded away from +-pi/2 so the
    /// marking stays representable as a function y = f(x).
    pub theta: T,
    /// Covariance of (x, y, theta).
    pub cov: Matrix3<T>,
    pub attrs: AttributeMass<T>,
}

impl<T: Real> Feature<T> {
    /// Validates the measurement invariants at ingestion.
    pub fn new(x: T, y: T, theta: T, cov: Matrix3<T>, attrs: AttributeMass<T>) -> Result<Self> {
        for v in [x, y, theta] {
            if !v.is_finite() {
                return Err(Error::InvalidFeature("non-finite coordinate".into()));
            }
        }
        if theta.abs() >= T::frac_pi_2() {
            return Err(Error::InvalidFeature(format!(
                "heading {:?} outside (-pi/2, pi/2)",
                theta
            )));
        }
        let mut scale = T::zero();
        for i in 0..3 {
            scale = scale.max(cov[(i, i)].abs());
        }
        for i in 0..3 {
            for j in 0..3 {
                if !cov[(i, j)].is_finite() {
                    return Err(Error::InvalidFeature("non-finite covariance".into()));
                }
                if (cov[(i, j)] - cov[(j, i)]).abs() > real::<T>(1e-9) * scale.max(T::one()) {
                    return Err(Error::InvalidFeature("covariance not symmetric".into()));
                }
            }
        }
        if cov.cholesky().is_none() {
            return Err(Error::InvalidFeature(
                "covariance not positive definite".into(),
            ));
        }
        Ok(Self {
            x,
            y,
            theta,
            cov,
            attrs,
        })
    }

    /// Marginal covariance of (y, theta).
    pub fn lateral_cov(&self) -> nalgebra::Matrix2<T> {
        nalgebra::Matrix2::new(
            self.cov[(1, 1)],
            self.cov[(1, 2)],
            self.cov[(2, 1)],
            self.cov[(2, 2)],
        )
    }
}

/// One cubic piece of a line, valid on [x_start, x_end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub x_start: T,
    pub x_end: T,
    /// Polynomial coefficients, constant first: f(x) = c0 + c1 x + c2 x^2 + c3 x^3.
    pub coeffs: [T; 4],
}

impl<T: Real> Segment<T> {
    pub fn new(x_start: T, x_end: T, coeffs: [T; 4]) -> Self {
        debug_assert!(x_start < x_end, "segment must have positive length");
        Self {
            x_start,
            x_end,
            coeffs,
        }
    }

    /// Evaluates the polynomial (or a derivative) at x; x may lie outside the
    /// segment span, which callers use for extrapolation.
    pub fn eval(&self, x: T, order: Deriv) -> T {
        let [c0, c1, c2, c3] = self.coeffs;
        match order {
            Deriv::Value => ((c3 * x + c2) * x + c1) * x + c0,
            Deriv::Slope => (real::<T>(3.0) * c3 * x + real::<T>(2.0) * c2) * x + c1,
            Deriv::Curvature => real::<T>(6.0) * c3 * x + real::<T>(2.0) * c2,
        }
    }
}

/// Fused attribute state a line carries across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LineAttributes<T> {
    pub mass: AttributeMass<T>,
    /// Set when a frame's evidence was in total conflict with the running
    /// belief (the prior was kept).
    pub conflict: bool,
}

impl<T: Real> LineAttributes<T> {
    pub fn unknown() -> Self {
        Self {
            mass: AttributeMass::vacuous(),
            conflict: false,
        }
    }

    /// Most believed marking type with its mass.
    pub fn marking_type(&self) -> (MarkingType, T) {
        let (i, c) = self.mass.marking.argmax();
        (MarkingType::from_index(i), c)
    }

    /// Most believed color with its mass.
    pub fn color(&self) -> (LineColor, T) {
        let (i, c) = self.mass.color.argmax();
        (LineColor::from_index(i), c)
    }
}

/// One estimated lane line: a piecewise cubic over a shared knot vector.
///
/// `control_points` is the knot vector of the line's parallel group clipped to
/// the line's own range: a line shorter than its group repeats its final knot,
/// so the vector is non-decreasing with strict increase everywhere except a
/// possibly repeated tail. `segments` holds one cubic per distinct knot
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Line<T> {
    pub id: LineId,
    pub segments: Vec<Segment<T>>,
    pub control_points: Vec<T>,
    pub attrs: LineAttributes<T>,
    /// Longitudinal extent (min x, max x) supported by observations.
    pub range: (T, T),
    /// Consecutive frames with zero associated features.
    pub missed_frames: u32,
}

impl<T: Real> Line<T> {
    /// Single-segment line over [start, end].
    pub fn single(id: LineId, start: T, end: T, coeffs: [T; 4]) -> Self {
        Self {
            id,
            segments: vec![Segment::new(start, end, coeffs)],
            control_points: vec![start, end],
            attrs: LineAttributes::unknown(),
            range: (start, end),
            missed_frames: 0,
        }
    }

    /// Distinct knots (repeated tail collapsed); length is `segments.len() + 1`.
    pub fn distinct_knots(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::with_capacity(self.control_points.len());
        for &k in &self.control_points {
            if out.last().map_or(true, |&l| k > l) {
                out.push(k);
            }
        }
        out
    }

    /// Index of the segment whose span contains x; clamps to the first/last
    /// segment outside the knot span (extrapolation).
    pub fn segment_index(&self, x: T) -> usize {
        let mut i = 0;
        while i + 1 < self.segments.len() && x >= self.segments[i].x_end {
            i += 1;
        }
        i
    }

    /// Evaluates the line (or a derivative) at x, extrapolating with the
    /// first/last segment beyond the knot span.
    pub fn eval(&self, x: T, order: Deriv) -> T {
        self.segments[self.segment_index(x)].eval(x, order)
    }

    /// Lateral offset at x = 0, the ordering key for "leftmost first".
    pub fn offset_at_origin(&self) -> T {
        self.eval(T::zero(), Deriv::Value)
    }
}

/// Coefficients of the cubic interpolating value and slope at two abscissae.
/// Inputs are in the global x of the segment (no local re-parameterization).
pub fn hermite_coeffs<T: Real>(x0: T, y0: T, m0: T, x1: T, y1: T, m1: T) -> [T; 4] {
    let two = real::<T>(2.0);
    let three = real::<T>(3.0);
    let v = nalgebra::Matrix4::new(
        T::one(),
        x0,
        x0 * x0,
        x0 * x0 * x0,
        T::zero(),
        T::one(),
        two * x0,
        three * x0 * x0,
        T::one(),
        x1,
        x1 * x1,
        x1 * x1 * x1,
        T::zero(),
        T::one(),
        two * x1,
        three * x1 * x1,
    );
    let rhs = nalgebra::Vector4::new(y0, m0, y1, m1);
    let c = v
        .lu()
        .solve(&rhs)
        .expect("Hermite system is regular for distinct abscissae");
    [c[0], c[1], c[2], c[3]]
}

/// Pose change of the vehicle frame between consecutive frames: the new
/// origin sits at (dx, dy) in the old frame, rotated by dpsi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryDelta<T> {
    pub dx: T,
    pub dy: T,
    pub dpsi: T,
}

impl<T: Real> OdometryDelta<T> {
    pub fn identity() -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            dpsi: T::zero(),
        }
    }

    pub fn new(dx: T, dy: T, dpsi: T) -> Self {
        Self { dx, dy, dpsi }
    }

    /// Maps a point from the previous frame into the current frame:
    /// translate by (-dx, -dy), then rotate by -dpsi.
    pub fn transform_point(&self, x: T, y: T) -> (T, T) {
        let (s, c) = self.dpsi.sin_cos();
        let tx = x - self.dx;
        let ty = y - self.dy;
        (c * tx + s * ty, -s * tx + c * ty)
    }

    /// Maps a pose (point plus heading) into the current frame.
    pub fn transform_pose(&self, x: T, y: T, theta: T) -> (T, T, T) {
        let (xp, yp) = self.transform_point(x, y);
        (xp, yp, normalize_angle(theta - self.dpsi))
    }

    /// Maps a point from the current frame back into the previous frame.
    pub fn inverse_transform_point(&self, x: T, y: T) -> (T, T) {
        let (s, c) = self.dpsi.sin_cos();
        (c * x - s * y + self.dx, s * x + c * y + self.dy)
    }

    /// Motion `self` followed by `later`, as a single delta.
    pub fn compose(&self, later: &Self) -> Self {
        let (s, c) = self.dpsi.sin_cos();
        Self {
            dx: self.dx + c * later.dx - s * later.dy,
            dy: self.dy + s * later.dx + c * later.dy,
            dpsi: normalize_angle(self.dpsi + later.dpsi),
        }
    }
}

/// Validation strictness for [`LaneModel::validate`]. Prediction preserves
/// value/slope continuity but intentionally breaks curvature continuity and
/// cross-line knot alignment, both of which the next fit restores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelStage {
    Predicted,
    Fitted,
}

/// The multi-line road model for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneModel<T> {
    /// Ordered leftmost first (descending y at x = 0), ties by id.
    pub lines: Vec<Line<T>>,
    /// Partition of line ids into groups fitted with parallelism constraints.
    pub parallel_groups: Vec<Vec<LineId>>,
    pub timestamp: T,
}

impl<T: Real> LaneModel<T> {
    pub fn empty(timestamp: T) -> Self {
        Self {
            lines: Vec::new(),
            parallel_groups: Vec::new(),
            timestamp,
        }
    }

    pub fn line_by_id(&self, id: LineId) -> Option<&Line<T>> {
        self.lines.iter().find(|l| l.id == id)
    }

    /// Sorts lines leftmost first (descending y at x = 0, ties by id).
    /// Group membership is by id, so sorting never invalidates groups.
    pub fn sort_lines(&mut self) {
        self.lines.sort_by(|a, b| {
            b.offset_at_origin()
                .partial_cmp(&a.offset_at_origin())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.id.cmp(&b.id))
        });
    }

    /// Checks the structural invariants, returning the first violation.
    pub fn validate(&self, stage: ModelStage) -> Result<()> {
        let tol = real::<T>(1e-9);
        for line in &self.lines {
            if line.segments.is_empty() {
                return Err(Error::InvalidFeature(format!(
                    "line {} has no segments",
                    line.id
                )));
            }
            for seg in &line.segments {
                if !(seg.x_start < seg.x_end) {
                    return Err(Error::InvalidFeature(format!(
                        "line {} has a non-positive-length segment",
                        line.id
                    )));
                }
            }
            let knots = line.distinct_knots();
            if knots.len() != line.segments.len() + 1 {
                return Err(Error::InvalidFeature(format!(
                    "line {} knots do not match segments",
                    line.id
                )));
            }
            for (i, seg) in line.segments.iter().enumerate() {
                if (seg.x_start - knots[i]).abs() > tol || (seg.x_end - knots[i + 1]).abs() > tol {
                    return Err(Error::InvalidFeature(format!(
                        "line {} segment {} spans do not match knots",
                        line.id, i
                    )));
                }
            }
            // Continuity at interior joints.
            for w in line.segments.windows(2) {
                let x = w[0].x_end;
                let dv = (w[0].eval(x, Deriv::Value) - w[1].eval(x, Deriv::Value)).abs();
                let ds = (w[0].eval(x, Deriv::Slope) - w[1].eval(x, Deriv::Slope)).abs();
                if dv > tol || ds > tol {
                    return Err(Error::InvalidFeature(format!(
                        "line {} discontinuous at joint x = {:?}",
                        line.id, x
                    )));
                }
                if stage == ModelStage::Fitted {
                    let dc = (w[0].eval(x, Deriv::Curvature) - w[1].eval(x, Deriv::Curvature)).abs();
                    if dc > tol {
                        return Err(Error::InvalidFeature(format!(
                            "line {} curvature jump at joint x = {:?}",
                            line.id, x
                        )));
                    }
                }
            }
        }
        // Leftmost-first ordering.
        for w in self.lines.windows(2) {
            if w[0].offset_at_origin() < w[1].offset_at_origin() - tol {
                return Err(Error::InvalidFeature("lines not ordered leftmost first".into()));
            }
        }
        // Groups partition the ids.
        let mut seen = std::collections::BTreeSet::new();
        for group in &self.parallel_groups {
            for id in group {
                if !seen.insert(*id) {
                    return Err(Error::InvalidFeature(format!(
                        "line {} appears in two groups",
                        id
                    )));
                }
                if self.line_by_id(*id).is_none() {
                    return Err(Error::InvalidFeature(format!(
                        "group references unknown line {}",
                        id
                    )));
                }
            }
        }
        if seen.len() != self.lines.len() {
            return Err(Error::InvalidFeature(
                "groups do not cover every line".into(),
            ));
        }
        // Fitted models share knot vectors within each group: every member's
        // control points equal the group's longest vector clipped to the
        // member's own coverage (trailing repeats).
        if stage == ModelStage::Fitted {
            for group in &self.parallel_groups {
                let members: Vec<&Line<T>> =
                    group.iter().filter_map(|id| self.line_by_id(*id)).collect();
                let Some(longest) = members
                    .iter()
                    .max_by(|a, b| {
                        let ea = *a.distinct_knots().last().unwrap();
                        let eb = *b.distinct_knots().last().unwrap();
                        ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .map(|l| l.control_points.clone())
                else {
                    continue;
                };
                for m in &members {
                    if m.control_points.len() != longest.len() {
                        return Err(Error::InvalidFeature(format!(
                            "line {} knot count differs from its group",
                            m.id
                        )));
                    }
                    let end = *m.distinct_knots().last().unwrap();
                    for (a, b) in m.control_points.iter().zip(longest.iter()) {
                        let expect = if *b < end { *b } else { end };
                        if (*a - expect).abs() > tol {
                            return Err(Error::InvalidFeature(format!(
                                "line {} knots diverge from its group",
                                m.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Output of the association step for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondences {
    /// (feature index, line id, segment index); each feature at most once.
    pub pairs: Vec<(usize, LineId, usize)>,
    /// Feature indices that passed no gate.
    pub unassociated: Vec<usize>,
}

impl Correspondences {
    pub fn feature_count(&self, id: LineId) -> usize {
        self.pairs.iter().filter(|(_, l, _)| *l == id).count()
    }
}
