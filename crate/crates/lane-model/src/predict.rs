//! Moves the previous frame's model into the current vehicle frame.
//!
//! Each segment's limiting control points are transformed as poses and the
//! segment is re-interpolated as the Hermite cubic through them. Value and
//! slope continuity at shared knots survive by construction; curvature
//! continuity does not and is restored by the next fit.

use crate::config::Config;
use crate::scalar::{real, Real};
use crate::types::{
    hermite_coeffs, heading_from_slope, slope_from_heading, Deriv, LaneModel, Line, OdometryDelta,
    Segment,
};

/// A transformed segment shorter than this is treated as passed-over and
/// dropped, guarding the refit against degenerate spans.
const MIN_SPAN: f64 = 0.1;

fn transform_knot_pose<T: Real>(line: &Line<T>, x: T, delta: &OdometryDelta<T>) -> (T, T, T) {
    let y = line.eval(x, Deriv::Value);
    let theta = heading_from_slope(line.eval(x, Deriv::Slope));
    delta.transform_pose(x, y, theta)
}

fn predict_line<T: Real>(
    line: &Line<T>,
    delta: &OdometryDelta<T>,
    cfg: &Config<T>,
) -> Option<Line<T>> {
    let knots = line.distinct_knots();
    let poses: Vec<(T, T, T)> = knots
        .iter()
        .map(|&k| transform_knot_pose(line, k, delta))
        .collect();

    // Keep the contiguous run of forward-ordered intervals ending at the last
    // knot; leading intervals the vehicle has passed (collapsed or entirely
    // behind the cull line) are dropped.
    let min_span = real::<T>(MIN_SPAN);
    let mut first = poses.len().saturating_sub(1);
    while first > 0 {
        let (x0, ..) = poses[first - 1];
        let (x1, ..) = poses[first];
        if x1 - x0 >= min_span && x1 > cfg.predict.cull_behind {
            first -= 1;
        } else {
            break;
        }
    }
    if first + 1 >= poses.len() {
        return None;
    }

    let mut segments = Vec::with_capacity(poses.len() - first - 1);
    let mut control_points = Vec::with_capacity(poses.len() - first);
    control_points.push(poses[first].0);
    for w in poses[first..].windows(2) {
        let (x0, y0, t0) = w[0];
        let (x1, y1, t1) = w[1];
        segments.push(Segment::new(
            x0,
            x1,
            hermite_coeffs(
                x0,
                y0,
                slope_from_heading(t0),
                x1,
                y1,
                slope_from_heading(t1),
            ),
        ));
        control_points.push(x1);
    }

    // Transform the observed range the same way the geometry moved.
    let (r0, _, _) = transform_knot_pose(line, line.range.0, delta);
    let (r1, _, _) = transform_knot_pose(line, line.range.1, delta);
    let range = if r0 <= r1 { (r0, r1) } else { (r1, r0) };

    Some(Line {
        id: line.id,
        segments,
        control_points,
        attrs: line.attrs.clone(),
        range,
        missed_frames: line.missed_frames,
    })
}

/// Transforms every line into the current frame; lines whose segments all
/// degenerate or fall behind the cull line are dropped, and the parallel
/// groups are filtered accordingly.
pub fn predict_model<T: Real>(
    model: &LaneModel<T>,
    delta: &OdometryDelta<T>,
    cfg: &Config<T>,
) -> LaneModel<T> {
    let lines: Vec<Line<T>> = model
        .lines
        .iter()
        .filter_map(|l| predict_line(l, delta, cfg))
        .collect();
    let surviving: std::collections::BTreeSet<_> = lines.iter().map(|l| l.id).collect();
    let parallel_groups: Vec<Vec<_>> = model
        .parallel_groups
        .iter()
        .map(|g| {
            g.iter()
                .copied()
                .filter(|id| surviving.contains(id))
                .collect::<Vec<_>>()
        })
        .filter(|g: &Vec<_>| !g.is_empty())
        .collect();
    let mut out = LaneModel {
        lines,
        parallel_groups,
        timestamp: model.timestamp,
    };
    out.sort_lines();
    out
}
