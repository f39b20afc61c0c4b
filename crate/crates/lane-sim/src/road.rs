//! Road geometry: clothoid centerline integration and ground-truth boundary
//! polylines.
//!
//! Curvature is piecewise linear in arc length, so the heading has a closed
//! form (quadratic in arc length within each segment). Positions are
//! integrated with a fixed-step 4th-order Runge-Kutta scheme on
//! (x', y') = (cos theta(s), sin theta(s)).

use crate::error::{Error, Result};
use crate::scenario::{ScenarioSpec, SegmentSpec};

/// Integration and state-grid step, meters of arc length.
const STEP: f64 = 0.1;
/// Arc-length spacing of ground-truth polyline samples, meters.
pub const TRUTH_SPACING: f64 = 0.5;

/// Pose of the centerline at one arc-length position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
}

/// One ground-truth boundary line: dense world-frame samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthLine {
    pub id: u32,
    /// (x, y, heading) at nominally TRUTH_SPACING arc-length steps.
    pub points: Vec<(f64, f64, f64)>,
}

/// Integrated road: centerline states on a fixed grid plus per-segment
/// heading offsets for the closed-form heading.
#[derive(Debug, Clone)]
pub struct Road {
    spec: ScenarioSpec,
    states: Vec<PathState>,
    /// (start_s, start_psi, segment) per road segment.
    segment_table: Vec<(f64, f64, SegmentSpec)>,
}

/// Heading change accumulated over the first `u` meters of a segment:
/// integral of the linear curvature, a quadratic in u.
fn segment_heading_change(seg: &SegmentSpec, u: f64) -> f64 {
    seg.kappa_start * u + (seg.kappa_end - seg.kappa_start) * u * u / (2.0 * seg.length)
}

fn segment_kappa(seg: &SegmentSpec, u: f64) -> f64 {
    seg.kappa_start + (seg.kappa_end - seg.kappa_start) * u / seg.length
}

impl Road {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let mut segment_table = Vec::with_capacity(spec.segments.len());
        let mut s0 = 0.0;
        let mut psi0 = 0.0;
        for seg in &spec.segments {
            segment_table.push((s0, psi0, *seg));
            psi0 += segment_heading_change(seg, seg.length);
            s0 += seg.length;
        }
        let total = s0;

        // RK4 on the position with the exact heading as the right-hand side.
        let heading_at = |s: f64| -> f64 {
            let (start_s, start_psi, seg) = lookup(&segment_table, total, s);
            start_psi + segment_heading_change(&seg, s - start_s)
        };
        let n_steps = (total / STEP).ceil() as usize;
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut x = 0.0;
        let mut y = 0.0;
        for i in 0..=n_steps {
            let s = (i as f64 * STEP).min(total);
            states.push(PathState {
                s,
                x,
                y,
                psi: heading_at(s),
                kappa: {
                    let (start_s, _, seg) = lookup(&segment_table, total, s);
                    segment_kappa(&seg, s - start_s)
                },
            });
            if i < n_steps {
                let h = ((i + 1) as f64 * STEP).min(total) - s;
                let (dx, dy) = rk4_advance(&heading_at, s, h);
                x += dx;
                y += dy;
            }
        }
        Ok(Self {
            spec,
            states,
            segment_table,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn total_length(&self) -> f64 {
        self.spec.total_length()
    }

    /// Exact closed-form heading at arc length s.
    pub fn heading_at(&self, s: f64) -> f64 {
        let (start_s, start_psi, seg) = lookup(&self.segment_table, self.total_length(), s);
        start_psi + segment_heading_change(&seg, s - start_s)
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        let (start_s, _, seg) = lookup(&self.segment_table, self.total_length(), s);
        segment_kappa(&seg, s - start_s)
    }

    /// Centerline pose at arc length s: grid state plus one sub-step.
    pub fn pose_at(&self, s: f64) -> Result<PathState> {
        let total = self.total_length();
        if !(0.0..=total + 1e-9).contains(&s) {
            return Err(Error::Scenario(format!(
                "arc length {s} outside the {total} m road"
            )));
        }
        let s = s.min(total);
        let idx = ((s / STEP).floor() as usize).min(self.states.len() - 1);
        let base = self.states[idx];
        let h = s - base.s;
        let heading = |t: f64| self.heading_at(t);
        let (dx, dy) = if h > 0.0 {
            rk4_advance(&heading, base.s, h)
        } else {
            (0.0, 0.0)
        };
        Ok(PathState {
            s,
            x: base.x + dx,
            y: base.y + dy,
            psi: self.heading_at(s),
            kappa: self.curvature_at(s),
        })
    }

    /// Ground-truth polyline for every boundary line, offset from the
    /// centerline along the left normal.
    pub fn truth_lines(&self) -> Vec<TruthLine> {
        let n = self.spec.line_count();
        let mut lines = Vec::with_capacity(n);
        for j in 0..n {
            let d = self.spec.boundary_offset(j);
            let mut points = Vec::new();
            let mut s = 0.0;
            let total = self.total_length();
            while s <= total + 1e-9 {
                let p = self.pose_at(s.min(total)).expect("s within road");
                let (nx, ny) = (-p.psi.sin(), p.psi.cos());
                points.push((p.x + d * nx, p.y + d * ny, p.psi));
                s += TRUTH_SPACING;
            }
            lines.push(TruthLine {
                id: j as u32,
                points,
            });
        }
        lines
    }
}

fn lookup(table: &[(f64, f64, SegmentSpec)], total: f64, s: f64) -> (f64, f64, SegmentSpec) {
    let s = s.clamp(0.0, total);
    let mut chosen = table[0];
    for &entry in table {
        if s >= entry.0 - 1e-12 {
            chosen = entry;
        } else {
            break;
        }
    }
    chosen
}

/// One RK4 step of (x', y') = (cos theta(s), sin theta(s)) from s over h.
fn rk4_advance(heading: &dyn Fn(f64) -> f64, s: f64, h: f64) -> (f64, f64) {
    let f = |t: f64| -> (f64, f64) {
        let th = heading(t);
        (th.cos(), th.sin())
    };
    let k1 = f(s);
    let k2 = f(s + h / 2.0);
    let k3 = k2;
    let k4 = f(s + h);
    (
        h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}
