//! Expectation step: feature-to-line association plus the model bookkeeping
//! that follows it — spawning lines from leftover features, updating observed
//! ranges, fusing marking attributes, inferring parallel groups and laying
//! out the shared knot vectors.

use std::collections::BTreeMap;

use crate::attributes::MarkingType;
use crate::config::{AssocConfig, Config, ModelConfig};
use crate::init::{cluster_lateral, seed_lines};
use crate::scalar::{real, Real};
use crate::types::{
    hermite_coeffs, Correspondences, Deriv, Feature, LaneModel, Line, LineId, Segment,
};

/// Two candidate distances closer than this are a tie, resolved by line id.
const TIE_EPS: f64 = 1e-9;

/// Squared Mahalanobis distance of the (lateral, heading) residual under the
/// feature's marginal covariance.
fn mahalanobis2<T: Real>(r: (T, T), cov: &nalgebra::Matrix2<T>) -> T {
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = a * c - b * b;
    (r.0 * r.0 * c - real::<T>(2.0) * r.0 * r.1 * b + r.1 * r.1 * a) / det
}

/// Assigns each feature to the statistically nearest line that passes both
/// gates (chi-square on the Mahalanobis distance, hard cap on the lateral
/// residual). Lines are evaluated extrapolated beyond their knot span; ties
/// go to the smaller line id.
pub fn associate<T: Real>(
    features: &[Feature<T>],
    model: &LaneModel<T>,
    cfg: &AssocConfig<T>,
) -> Correspondences {
    let tie = real::<T>(TIE_EPS);
    let mut pairs = Vec::new();
    let mut unassociated = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let mut best: Option<(T, LineId, usize)> = None;
        for line in &model.lines {
            let dy = line.eval(f.x, Deriv::Value) - f.y;
            if dy.abs() > cfg.euclid_gate {
                continue;
            }
            let dtheta = line.eval(f.x, Deriv::Slope).atan() - f.theta;
            let d2 = mahalanobis2((dy, dtheta), &f.lateral_cov());
            if d2 > cfg.gate_chi2 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd2, bid, _)) => {
                    d2 < bd2 - tie || ((d2 - bd2).abs() <= tie && line.id < bid)
                }
            };
            if better {
                best = Some((d2, line.id, line.segment_index(f.x)));
            }
        }
        match best {
            Some((_, id, seg)) => pairs.push((i, id, seg)),
            None => unassociated.push(i),
        }
    }
    Correspondences {
        pairs,
        unassociated,
    }
}

/// Clusters the unassociated near-range features and seeds a new line per
/// cluster that keeps a minimum lateral clearance from every existing line
/// at x = 0. Returns the spawned ids (leftmost first).
pub fn try_spawn_lines<T: Real>(
    model: &mut LaneModel<T>,
    features: &[Feature<T>],
    unassociated: &[usize],
    cfg: &Config<T>,
    next_id: &mut u32,
) -> Vec<LineId> {
    if unassociated.is_empty() {
        return Vec::new();
    }
    let leftovers: Vec<Feature<T>> = unassociated.iter().map(|&i| features[i].clone()).collect();
    let clusters = cluster_lateral(&leftovers, &cfg.init);
    let mut spawned = Vec::new();
    for cluster in &clusters {
        let clear = model.lines.iter().all(|line| {
            (line.offset_at_origin() - cluster.mean_y).abs() >= cfg.assoc.spawn_min_separation
        });
        if !clear {
            continue;
        }
        let line = seed_lines(std::slice::from_ref(cluster), *next_id, &cfg.init)
            .pop()
            .expect("one cluster seeds one line");
        *next_id += 1;
        spawned.push(line.id);
        model.parallel_groups.push(vec![line.id]);
        model.lines.push(line);
    }
    if !spawned.is_empty() {
        model.sort_lines();
    }
    spawned
}

/// Updates each line's observed range from this frame's associated features,
/// blended against the predicted range: extension is instant, shrinking is
/// capped at `range_decay` per side per frame. Lines without features keep
/// the base range.
pub fn update_ranges<T: Real>(
    model: &mut LaneModel<T>,
    corr: &Correspondences,
    features: &[Feature<T>],
    base: &BTreeMap<LineId, (T, T)>,
    cfg: &AssocConfig<T>,
) {
    let mut extents: BTreeMap<LineId, (T, T)> = BTreeMap::new();
    for &(fi, id, _) in &corr.pairs {
        let x = features[fi].x;
        extents
            .entry(id)
            .and_modify(|e| {
                e.0 = e.0.min(x);
                e.1 = e.1.max(x);
            })
            .or_insert((x, x));
    }
    for line in &mut model.lines {
        let b = base.get(&line.id).copied().unwrap_or(line.range);
        let Some(&(fmin, fmax)) = extents.get(&line.id) else {
            line.range = b;
            continue;
        };
        let new_min = if fmin < b.0 {
            fmin
        } else {
            fmin.min(b.0 + cfg.range_decay)
        };
        let mut new_max = if fmax > b.1 {
            fmax
        } else {
            fmax.max(b.1 - cfg.range_decay)
        };
        // Degenerate support (all features at one x) still needs a workable span.
        if new_max < new_min + T::one() {
            new_max = new_min + T::one();
        }
        line.range = (new_min, new_max);
    }
}

/// Folds this frame's attribute evidence into a line's running masses after
/// the per-frame forgetting step. Total conflict keeps the prior and flags
/// the line.
pub fn fuse_attributes<T: Real>(
    line: &mut Line<T>,
    features: &[Feature<T>],
    associated: &[usize],
    forget_factor: T,
) {
    line.attrs.mass.marking = line.attrs.mass.marking.discount(forget_factor);
    line.attrs.mass.color = line.attrs.mass.color.discount(forget_factor);
    line.attrs.conflict = false;
    for &fi in associated {
        let f = &features[fi];
        match line.attrs.mass.marking.combine(&f.attrs.marking) {
            Some(m) => line.attrs.mass.marking = m,
            None => line.attrs.conflict = true,
        }
        match line.attrs.mass.color.combine(&f.attrs.color) {
            Some(m) => line.attrs.mass.color = m,
            None => line.attrs.conflict = true,
        }
    }
}

/// Partitions the laterally ordered lines into parallel groups. A dashed line
/// is parallel to both neighbors, so it joins the pair across it; a solid or
/// block line can be pulled into a group on one side but nothing grows past
/// it (it closes the group's far side).
pub fn infer_parallel_groups<T: Real>(model: &mut LaneModel<T>) {
    let mut groups: Vec<Vec<LineId>> = Vec::new();
    let mut current: Vec<LineId> = Vec::new();
    let mut closed = false;
    let dashed =
        |line: &Line<T>| matches!(line.attrs.marking_type().0, MarkingType::Dashed);
    let boundary = |line: &Line<T>| {
        matches!(
            line.attrs.marking_type().0,
            MarkingType::Solid | MarkingType::Block
        )
    };
    for k in 0..model.lines.len() {
        if current.is_empty() {
            current.push(model.lines[k].id);
            closed = false;
            continue;
        }
        let prev = &model.lines[k - 1];
        let this = &model.lines[k];
        if !closed && (dashed(prev) || dashed(this)) {
            current.push(this.id);
            closed = boundary(this);
        } else {
            groups.push(std::mem::take(&mut current));
            current.push(this.id);
            closed = false;
        }
    }
    if !current.is_empty() {
        groups.push(current);
    }
    model.parallel_groups = groups;
}

/// Builds a group's shared knot vector from the member ranges: candidates are
/// the group start and every member end; candidates closer than the minimum
/// segment length merge into the earlier knot; stretches longer than the
/// maximum segment length are subdivided evenly.
pub fn group_knots<T: Real>(starts: &[T], ends: &[T], cfg: &ModelConfig<T>) -> Vec<T> {
    let mut start = starts[0];
    for &s in starts {
        start = start.min(s);
    }
    let mut candidates: Vec<T> = ends.to_vec();
    candidates.push(start);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    candidates.retain(|&c| c > start || (c - start).abs() == T::zero());
    let end_max = *candidates.last().unwrap();

    // Merge: later candidates within min_segment_len collapse into the
    // earlier knot.
    let mut knots = vec![start];
    for &c in &candidates {
        if cfg.single_segment {
            break;
        }
        if c - *knots.last().unwrap() >= cfg.min_segment_len {
            knots.push(c);
        }
    }
    // The group must keep its full extent even when the merge swallowed the
    // final end (a short group still gets one segment).
    if *knots.last().unwrap() < end_max {
        if knots.len() == 1 {
            knots.push(end_max);
        } else {
            *knots.last_mut().unwrap() = end_max;
        }
    }

    if cfg.single_segment {
        return knots;
    }

    // Subdivide: no segment longer than max_segment_len, split evenly.
    let mut out = vec![knots[0]];
    for w in knots.windows(2) {
        let gap = w[1] - w[0];
        let pieces = (gap / cfg.max_segment_len).ceil();
        let n = pieces.to_f64().map(|p| p as usize).unwrap_or(1).max(1);
        for j in 1..=n {
            out.push(w[0] + gap * real::<T>(j as f64) / real::<T>(n as f64));
        }
    }
    out
}

/// Lays out shared knots per parallel group and re-materializes each member's
/// segments on its clipped knot vector. A line shorter than its group repeats
/// its final knot; the repeated tail carries no segments. Segment polynomials
/// are re-interpolated from the line's previous shape (value and slope at the
/// new knots), which is exact whenever the knots did not move.
pub fn place_control_points<T: Real>(model: &mut LaneModel<T>, cfg: &ModelConfig<T>) {
    let groups = model.parallel_groups.clone();
    for group in &groups {
        let mut starts = Vec::with_capacity(group.len());
        let mut ends = Vec::with_capacity(group.len());
        for id in group {
            let line = model.line_by_id(*id).expect("group ids are live");
            starts.push(line.range.0);
            ends.push(line.range.1);
        }
        let knots = group_knots(&starts, &ends, cfg);
        for id in group {
            let line = model
                .lines
                .iter_mut()
                .find(|l| l.id == *id)
                .expect("group ids are live");
            reknot_line(line, &knots);
        }
    }
}

fn reknot_line<T: Real>(line: &mut Line<T>, group_knots: &[T]) {
    // Clip: knots beyond the line's coverage collapse onto its last usable
    // knot, keeping at least one real segment.
    let mut last_idx = 1;
    for (i, &k) in group_knots.iter().enumerate().skip(1) {
        if k <= line.range.1 {
            last_idx = i;
        }
    }
    let old = line.clone();
    let mut control_points = Vec::with_capacity(group_knots.len());
    let mut segments = Vec::with_capacity(last_idx);
    for (i, &k) in group_knots.iter().enumerate() {
        control_points.push(if i <= last_idx { k } else { group_knots[last_idx] });
    }
    for i in 0..last_idx {
        let (x0, x1) = (group_knots[i], group_knots[i + 1]);
        let coeffs = hermite_coeffs(
            x0,
            old.eval(x0, Deriv::Value),
            old.eval(x0, Deriv::Slope),
            x1,
            old.eval(x1, Deriv::Value),
            old.eval(x1, Deriv::Slope),
        );
        segments.push(Segment::new(x0, x1, coeffs));
    }
    line.control_points = control_points;
    line.segments = segments;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{AttributeMass, LineColor, Mass};
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    fn feat(x: f64, y: f64, theta: f64, sigma_y: f64) -> Feature<f64> {
        Feature::new(
            x,
            y,
            theta,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(1e-4, sigma_y * sigma_y, 2.5e-5)),
            AttributeMass::vacuous(),
        )
        .unwrap()
    }

    fn model_with_lines(offsets: &[f64]) -> LaneModel<f64> {
        let mut model = LaneModel::empty(0.0);
        for (i, &y) in offsets.iter().enumerate() {
            model
                .lines
                .push(Line::single(LineId(i as u32), 0.0, 100.0, [y, 0.0, 0.0, 0.0]));
        }
        model.sort_lines();
        model.parallel_groups = model.lines.iter().map(|l| vec![l.id]).collect();
        model
    }

    #[test]
    fn on_line_feature_associates_with_zero_distance() {
        let model = model_with_lines(&[0.0]);
        let cfg = Config::<f64>::default();
        let features = vec![feat(12.0, 0.0, 0.0, 0.05)];
        let corr = associate(&features, &model, &cfg.assoc);
        assert_eq!(corr.pairs, vec![(0, LineId(0), 0)]);
        assert!(corr.unassociated.is_empty());
    }

    #[test]
    fn euclidean_cap_rejects_despite_loose_covariance() {
        // sigma_y = 1.0 would let 2.5 m pass the chi-square gate (d2 = 6.25),
        // but the 2 m hard cap rejects it.
        let model = model_with_lines(&[0.0]);
        let cfg = Config::<f64>::default();
        let features = vec![feat(12.0, 2.5, 0.0, 1.0)];
        let corr = associate(&features, &model, &cfg.assoc);
        assert_eq!(corr.unassociated, vec![0]);
    }

    #[test]
    fn chi_square_gate_rejects_unlikely_residuals() {
        // 0.2 m at sigma_y = 0.05 gives d2 = 16 > 9.21 while staying inside
        // the Euclidean cap.
        let model = model_with_lines(&[0.0]);
        let cfg = Config::<f64>::default();
        let features = vec![feat(12.0, 0.2, 0.0, 0.05)];
        let corr = associate(&features, &model, &cfg.assoc);
        assert_eq!(corr.unassociated, vec![0]);
    }

    #[test]
    fn exact_tie_goes_to_smaller_id() {
        let model = model_with_lines(&[1.0, -1.0]);
        let cfg = Config::<f64>::default();
        let features = vec![feat(10.0, 0.0, 0.0, 1.0)];
        let corr = associate(&features, &model, &cfg.assoc);
        assert_eq!(corr.pairs.len(), 1);
        assert_eq!(corr.pairs[0].1, LineId(0));
    }

    #[test]
    fn features_beyond_the_range_use_the_extrapolated_last_segment() {
        let mut model = model_with_lines(&[0.0]);
        model.lines[0].segments = vec![
            Segment::new(0.0, 50.0, [0.0, 0.0, 0.0, 0.0]),
            Segment::new(50.0, 100.0, [0.0, 0.0, 0.0, 0.0]),
        ];
        model.lines[0].control_points = vec![0.0, 50.0, 100.0];
        let cfg = Config::<f64>::default();
        let features = vec![feat(130.0, 0.02, 0.0, 0.05)];
        let corr = associate(&features, &model, &cfg.assoc);
        assert_eq!(corr.pairs, vec![(0, LineId(0), 1)]);
    }

    #[test]
    fn spawn_seeds_distant_cluster_and_vetoes_near_one() {
        let mut model = model_with_lines(&[0.0]);
        let cfg = Config::<f64>::default();
        let mut features = Vec::new();
        for i in 0..8 {
            features.push(feat(2.0 * i as f64, 3.6, 0.0, 0.05)); // new marking
            features.push(feat(2.0 * i as f64, 0.5, 0.0, 0.05)); // too close to line 0
        }
        let unassoc: Vec<usize> = (0..features.len()).collect();
        let mut next_id = 1;
        let spawned = try_spawn_lines(&mut model, &features, &unassoc, &cfg, &mut next_id);
        assert_eq!(spawned, vec![LineId(1)]);
        assert_eq!(model.lines.len(), 2);
        let new_line = model.line_by_id(LineId(1)).unwrap();
        assert_relative_eq!(new_line.offset_at_origin(), 3.6, epsilon = 1e-12);
        // All associated => nothing to spawn.
        let none = try_spawn_lines(&mut model, &features, &[], &cfg, &mut next_id);
        assert!(none.is_empty());
    }

    #[test]
    fn ranges_extend_instantly_and_shrink_by_at_most_the_decay() {
        let mut model = model_with_lines(&[0.0]);
        let cfg = Config::<f64>::default();
        let features: Vec<_> = (0..30).map(|i| feat(2.0 * i as f64, 0.0, 0.0, 0.05)).collect();
        let corr = associate(&features, &model, &cfg.assoc);
        let base: BTreeMap<_, _> = [(LineId(0), (0.0, 100.0))].into();
        update_ranges(&mut model, &corr, &features, &base, &cfg.assoc);
        // Features reach x = 58; the far side shrinks to 100 - 10 = 90.
        assert_relative_eq!(model.lines[0].range.0, 0.0);
        assert_relative_eq!(model.lines[0].range.1, 90.0);

        // Features past the base extend instantly.
        let far = vec![feat(4.0, 0.0, 0.0, 0.05), feat(96.0, 0.0, 0.0, 0.05)];
        let corr = associate(&far, &model, &cfg.assoc);
        let base: BTreeMap<_, _> = [(LineId(0), (10.0, 60.0))].into();
        update_ranges(&mut model, &corr, &far, &base, &cfg.assoc);
        assert_relative_eq!(model.lines[0].range.0, 4.0);
        assert_relative_eq!(model.lines[0].range.1, 96.0);
    }

    #[test]
    fn fusion_accumulates_dashed_evidence_and_flags_conflict() {
        let mut line = Line::<f64>::single(LineId(0), 0.0, 20.0, [0.0; 4]);
        let mut f = feat(1.0, 0.0, 0.0, 0.05);
        f.attrs.marking = Mass::new([0.0, 0.6, 0.0, 0.4]).unwrap();
        f.attrs.color = Mass::with_confidence(LineColor::White.index(), 0.6).unwrap();
        let features = vec![f];
        fuse_attributes(&mut line, &features, &[0], 0.95);
        let (kind, conf) = line.attrs.marking_type();
        assert_eq!(kind, MarkingType::Dashed);
        assert!(conf > 0.5);
        assert!(!line.attrs.conflict);
        assert_eq!(line.attrs.color().0, LineColor::White);

        // Certain contradictory evidence against a certain belief: total
        // conflict keeps the prior and flags the line.
        line.attrs.mass.marking = Mass::certain(MarkingType::Solid.index());
        let mut g = feat(1.0, 0.0, 0.0, 0.05);
        g.attrs.marking = Mass::certain(MarkingType::Dashed.index());
        let features = vec![g];
        fuse_attributes(&mut line, &features, &[0], 1.0);
        assert!(line.attrs.conflict);
        assert_eq!(line.attrs.marking_type().0, MarkingType::Solid);
    }

    fn model_with_types(types: &[MarkingType]) -> LaneModel<f64> {
        let offsets: Vec<f64> = (0..types.len()).map(|i| 10.0 - 3.5 * i as f64).collect();
        let mut model = model_with_lines(&offsets);
        for (line, &t) in model.lines.iter_mut().zip(types.iter()) {
            line.attrs.mass.marking = Mass::certain(t.index());
        }
        model
    }

    #[test]
    fn dashed_joins_neighbors_and_boundaries_close_groups() {
        // solid, dashed, block, solid: the upper three are parallel, the last
        // solid stands alone.
        let mut model = model_with_types(&[
            MarkingType::Solid,
            MarkingType::Dashed,
            MarkingType::Block,
            MarkingType::Solid,
        ]);
        infer_parallel_groups(&mut model);
        assert_eq!(
            model.parallel_groups,
            vec![vec![LineId(0), LineId(1), LineId(2)], vec![LineId(3)]]
        );
    }

    #[test]
    fn all_dashed_forms_one_group() {
        let mut model = model_with_types(&[MarkingType::Dashed; 4]);
        infer_parallel_groups(&mut model);
        assert_eq!(model.parallel_groups.len(), 1);
        assert_eq!(model.parallel_groups[0].len(), 4);
    }

    #[test]
    fn two_solids_stay_separate() {
        let mut model = model_with_types(&[MarkingType::Solid, MarkingType::Solid]);
        infer_parallel_groups(&mut model);
        assert_eq!(
            model.parallel_groups,
            vec![vec![LineId(0)], vec![LineId(1)]]
        );
    }

    #[test]
    fn nothing_grows_past_a_pulled_in_solid() {
        let mut model = model_with_types(&[
            MarkingType::Dashed,
            MarkingType::Solid,
            MarkingType::Dashed,
        ]);
        infer_parallel_groups(&mut model);
        assert_eq!(
            model.parallel_groups,
            vec![vec![LineId(0), LineId(1)], vec![LineId(2)]]
        );
    }

    #[test]
    fn knots_subdivide_long_ranges_evenly() {
        let cfg = Config::<f64>::default().model;
        let knots = group_knots(&[0.0], &[120.0], &cfg);
        assert_eq!(knots.len(), 4);
        for (k, expect) in knots.iter().zip([0.0, 40.0, 80.0, 120.0]) {
            assert_relative_eq!(*k, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_ranges_keep_one_segment_despite_the_merge() {
        let cfg = Config::<f64>::default().model;
        let knots = group_knots(&[0.0], &[8.0], &cfg);
        assert_eq!(knots, vec![0.0, 8.0]);
    }

    #[test]
    fn single_segment_mode_never_subdivides() {
        let mut cfg = Config::<f64>::default().model;
        cfg.single_segment = true;
        let knots = group_knots(&[0.0], &[120.0], &cfg);
        assert_eq!(knots, vec![0.0, 120.0]);
    }

    #[test]
    fn member_ends_become_shared_knots_and_short_lines_repeat_theirs() {
        let cfg = Config::<f64>::default().model;
        let mut model = model_with_types(&[
            MarkingType::Solid,
            MarkingType::Dashed,
            MarkingType::Block,
        ]);
        model.lines[0].range = (0.0, 120.0);
        model.lines[1].range = (0.0, 120.0);
        model.lines[2].range = (0.0, 60.0); // the block line ends early
        infer_parallel_groups(&mut model);
        assert_eq!(model.parallel_groups.len(), 1);
        place_control_points(&mut model, &cfg);
        // Candidates {0, 60, 120}; 60 splits into 30s, 120-60 into 30s.
        let expect = [0.0, 30.0, 60.0, 90.0, 120.0];
        for line in &model.lines[..2] {
            assert_eq!(line.control_points.len(), expect.len());
            for (k, e) in line.control_points.iter().zip(expect) {
                assert_relative_eq!(*k, e, epsilon = 1e-12);
            }
        }
        let short = &model.lines[2];
        let expect_short = [0.0, 30.0, 60.0, 60.0, 60.0];
        for (k, e) in short.control_points.iter().zip(expect_short) {
            assert_relative_eq!(*k, e, epsilon = 1e-12);
        }
        assert_eq!(short.segments.len(), 2);
        model.validate(crate::types::ModelStage::Fitted).unwrap();
    }

    #[test]
    fn reknotting_on_unchanged_knots_preserves_the_polynomials() {
        let cfg = Config::<f64>::default().model;
        let mut model = model_with_lines(&[1.0]);
        model.lines[0].range = (0.0, 40.0);
        place_control_points(&mut model, &cfg);
        let before = model.lines[0].segments.clone();
        place_control_points(&mut model, &cfg);
        for (a, b) in model.lines[0].segments.iter().zip(before.iter()) {
            for (ca, cb) in a.coeffs.iter().zip(b.coeffs.iter()) {
                assert_relative_eq!(ca, cb, epsilon = 1e-12);
            }
        }
    }
}
