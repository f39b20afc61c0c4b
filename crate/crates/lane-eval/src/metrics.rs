//! Deviation samples, per-frame metrics, and distance-binned RMSE tables.

use std::collections::BTreeMap;

/// Longitudinal bin width for the RMSE tables, meters.
pub const BIN_WIDTH: f64 = 10.0;

/// Lane classification of a boundary line by its lateral offset at x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LaneLabel {
    /// A boundary of the vehicle's own lane.
    Ego,
    /// A boundary of a directly neighboring lane.
    Adjacent,
    /// Anything further out.
    Outer,
}

impl LaneLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ego => "ego",
            Self::Adjacent => "adjacent",
            Self::Outer => "outer",
        }
    }

    /// Classifies by |lateral offset| against the lane grid: own-lane
    /// boundaries sit near width/2, neighbor-lane outer boundaries near
    /// 3·width/2.
    pub fn classify(offset: f64, lane_width: f64) -> Self {
        let a = offset.abs();
        if a <= 0.75 * lane_width {
            Self::Ego
        } else if a <= 1.75 * lane_width {
            Self::Adjacent
        } else {
            Self::Outer
        }
    }
}

/// One lateral deviation between an estimated line and ground truth,
/// measured vertically (same x) in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDeviation {
    pub frame: u32,
    pub label: LaneLabel,
    /// Longitudinal distance of the truth sample in the vehicle frame.
    pub x: f64,
    pub deviation: f64,
}

/// Aggregate error statistics for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetric {
    pub frame: u32,
    /// Estimated lines present in the model this frame.
    pub line_count: usize,
    /// Lines that matched a ground-truth line at x = 0.
    pub matched_lines: usize,
    pub sample_count: usize,
    /// NaN when no samples were collected (empty model).
    pub rmse: f64,
    pub max_deviation: f64,
}

/// One row of the binned RMSE table.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMetric {
    pub bin_start: f64,
    pub bin_end: f64,
    pub label: LaneLabel,
    pub rmse: f64,
    pub sample_count: usize,
}

/// Folds per-sample deviations into 10 m longitudinal bins per lane label,
/// ordered by bin start then label.
pub fn bins_from_samples(samples: &[SampleDeviation]) -> Vec<BinMetric> {
    let mut acc: BTreeMap<(i64, LaneLabel), (f64, usize)> = BTreeMap::new();
    for s in samples {
        // Samples sit in [0, window]; roundoff can leave x a hair below zero.
        let bin = (s.x.max(0.0) / BIN_WIDTH).floor() as i64;
        let entry = acc.entry((bin, s.label)).or_insert((0.0, 0));
        entry.0 += s.deviation * s.deviation;
        entry.1 += 1;
    }
    acc.into_iter()
        .map(|((bin, label), (sum_sq, n))| BinMetric {
            bin_start: bin as f64 * BIN_WIDTH,
            bin_end: (bin + 1) as f64 * BIN_WIDTH,
            label,
            rmse: (sum_sq / n as f64).sqrt(),
            sample_count: n,
        })
        .collect()
}

/// Root mean square of a deviation slice; NaN when empty.
pub fn rmse_of(deviations: impl Iterator<Item = f64>) -> f64 {
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for d in deviations {
        sum_sq += d * d;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        (sum_sq / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_follows_the_lane_grid() {
        let w = 3.5;
        assert_eq!(LaneLabel::classify(1.75, w), LaneLabel::Ego);
        assert_eq!(LaneLabel::classify(-1.75, w), LaneLabel::Ego);
        assert_eq!(LaneLabel::classify(5.25, w), LaneLabel::Adjacent);
        assert_eq!(LaneLabel::classify(-5.25, w), LaneLabel::Adjacent);
        assert_eq!(LaneLabel::classify(8.75, w), LaneLabel::Outer);
    }

    #[test]
    fn constant_deviation_yields_that_rmse_in_every_bin() {
        let samples: Vec<SampleDeviation> = (0..100)
            .map(|i| SampleDeviation {
                frame: 0,
                label: LaneLabel::Ego,
                x: i as f64,
                deviation: 0.2,
            })
            .collect();
        let bins = bins_from_samples(&samples);
        assert_eq!(bins.len(), 10);
        for bin in bins {
            assert!((bin.rmse - 0.2).abs() < 1e-12, "bin rmse {}", bin.rmse);
            assert_eq!(bin.sample_count, 10);
        }
    }

    #[test]
    fn bins_separate_lane_labels() {
        let samples = vec![
            SampleDeviation {
                frame: 0,
                label: LaneLabel::Ego,
                x: 5.0,
                deviation: 0.1,
            },
            SampleDeviation {
                frame: 0,
                label: LaneLabel::Adjacent,
                x: 5.0,
                deviation: 0.3,
            },
        ];
        let bins = bins_from_samples(&samples);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].label, LaneLabel::Ego);
        assert_eq!(bins[1].label, LaneLabel::Adjacent);
        assert!((bins[0].rmse - 0.1).abs() < 1e-15);
        assert!((bins[1].rmse - 0.3).abs() < 1e-15);
    }
}
