//! Model initialization from scratch: near features are projected onto the
//! y-axis, clustered by lateral gaps, and each surviving cluster seeds one
//! straight line.

use crate::config::InitConfig;
use crate::scalar::{real, Real};
use crate::types::{slope_from_heading, Feature, Line, LineId};

/// One lateral cluster of near-range features.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralCluster<T> {
    pub mean_y: T,
    /// Circular mean of member headings.
    pub mean_theta: T,
    /// Indices into the feature slice handed to [`cluster_lateral`].
    pub members: Vec<usize>,
}

fn cluster_stats<T: Real>(features: &[Feature<T>], members: &[usize]) -> (T, T) {
    let n = real::<T>(members.len() as f64);
    let mut sum_y = T::zero();
    let mut sum_sin = T::zero();
    let mut sum_cos = T::zero();
    for &i in members {
        sum_y += features[i].y;
        sum_sin += features[i].theta.sin();
        sum_cos += features[i].theta.cos();
    }
    (sum_y / n, sum_sin.atan2(sum_cos))
}

/// Splits `members` (sorted by y) at its largest internal gap.
fn split_at_largest_gap<T: Real>(
    features: &[Feature<T>],
    members: Vec<usize>,
) -> (Vec<usize>, Vec<usize>) {
    let mut split = 1;
    let mut largest = T::zero();
    for w in 1..members.len() {
        let gap = features[members[w]].y - features[members[w - 1]].y;
        if gap > largest {
            largest = gap;
            split = w;
        }
    }
    let right = members[split..].to_vec();
    let mut left = members;
    left.truncate(split);
    (left, right)
}

/// Groups features with x within [0, max_x] by lateral position. Consecutive
/// sorted y-values closer than the gap threshold stay together; clusters are
/// then split further until every member lies within `cluster_half_width` of
/// the cluster mean, and finally filtered by population.
///
/// Returned clusters are ordered leftmost first (descending mean y).
pub fn cluster_lateral<T: Real>(
    features: &[Feature<T>],
    cfg: &InitConfig<T>,
) -> Vec<LateralCluster<T>> {
    let mut near: Vec<usize> = (0..features.len())
        .filter(|&i| features[i].x >= T::zero() && features[i].x <= cfg.max_x)
        .collect();
    near.sort_by(|&a, &b| {
        features[a]
            .y
            .partial_cmp(&features[b].y)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    // Pass 1: split at gaps.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in near {
        match groups.last_mut() {
            Some(group)
                if features[idx].y - features[*group.last().unwrap()].y < cfg.gap_threshold =>
            {
                group.push(idx);
            }
            _ => groups.push(vec![idx]),
        }
    }

    // Pass 2: enforce the half-width invariant by splitting wide groups.
    let mut bounded: Vec<Vec<usize>> = Vec::new();
    let mut pending = groups;
    while let Some(group) = pending.pop() {
        let (mean_y, _) = cluster_stats(features, &group);
        let too_wide = group
            .iter()
            .any(|&i| (features[i].y - mean_y).abs() > cfg.cluster_half_width);
        if too_wide && group.len() > 1 {
            let (left, right) = split_at_largest_gap(features, group);
            pending.push(left);
            pending.push(right);
        } else {
            bounded.push(group);
        }
    }

    let mut clusters: Vec<LateralCluster<T>> = bounded
        .into_iter()
        .filter(|g| g.len() >= cfg.min_cluster_size)
        .map(|members| {
            let (mean_y, mean_theta) = cluster_stats(features, &members);
            LateralCluster {
                mean_y,
                mean_theta,
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.mean_y
            .partial_cmp(&a.mean_y)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    clusters
}

/// Seeds one straight single-segment line per cluster over [0, max_x].
/// Ids are assigned leftmost first, starting at `first_id`.
pub fn seed_lines<T: Real>(
    clusters: &[LateralCluster<T>],
    first_id: u32,
    cfg: &InitConfig<T>,
) -> Vec<Line<T>> {
    clusters
        .iter()
        .enumerate()
        .map(|(k, cluster)| {
            Line::single(
                LineId(first_id + k as u32),
                T::zero(),
                cfg.max_x,
                [
                    cluster.mean_y,
                    slope_from_heading(cluster.mean_theta),
                    T::zero(),
                    T::zero(),
                ],
            )
        })
        .collect()
}
