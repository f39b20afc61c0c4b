//! Evaluation harness: runs feature streams through the lane tracker,
//! measures lateral deviation against ground truth, and writes plot-ready
//! CSV tables.

pub mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lane_model::{Config, Deriv, Feature, LaneModel, LaneTracker64, OdometryDelta};
use lane_sim::{PoseRecord, ScenarioSpec, Simulation, TruthLine};

use metrics::{bins_from_samples, rmse_of, BinMetric, FrameMetric, LaneLabel, SampleDeviation};

/// Maximum |estimate − truth| offset at x = 0 for a line match, meters.
pub const MATCH_TOLERANCE: f64 = 1.2;
/// Lane width assumed for ego/adjacent classification when evaluating
/// recorded files that carry no scenario metadata, meters.
pub const DEFAULT_LANE_WIDTH: f64 = 3.5;

/// Which line function the tracker fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Piecewise cubic with automatic knot placement.
    Spline,
    /// Single cubic per line (third-order clothoid approximation).
    Clothoid,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spline" => Some(Self::Spline),
            "clothoid" => Some(Self::Clothoid),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spline => "spline",
            Self::Clothoid => "clothoid",
        }
    }

    /// Applies the mode to a tracker configuration.
    pub fn apply(self, mut config: Config<f64>) -> Config<f64> {
        config.model.single_segment = matches!(self, Self::Clothoid);
        config
    }
}

/// One frame of estimator input.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub frame: u32,
    pub features: Vec<Feature<f64>>,
    pub odometry: OdometryDelta<f64>,
}

/// Full evaluation result for one tracker run.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub frames: Vec<FrameMetric>,
    pub bins: Vec<BinMetric>,
    pub samples: Vec<SampleDeviation>,
    pub total_frames: usize,
    /// Frames where the tracker produced no lines at all.
    pub empty_model_frames: usize,
    /// Root mean square over every deviation sample in the run.
    pub overall_rmse: f64,
}

/// Loads estimator inputs from feature and odometry CSV files. The odometry
/// file defines the frame sequence; frames without features get an empty set.
pub fn load_frame_inputs(features_path: &Path, odometry_path: &Path) -> Result<Vec<FrameInput>> {
    let mut features = lane_sim::io::read_features(features_path)
        .with_context(|| format!("reading features from {}", features_path.display()))?;
    let odometry = lane_sim::io::read_odometry(odometry_path)
        .with_context(|| format!("reading odometry from {}", odometry_path.display()))?;
    if odometry.is_empty() {
        bail!("odometry file {} has no frames", odometry_path.display());
    }
    Ok(odometry
        .into_iter()
        .map(|(frame, delta)| FrameInput {
            frame,
            features: features.remove(&frame).unwrap_or_default(),
            odometry: delta,
        })
        .collect())
}

/// Builds estimator inputs directly from an in-memory simulation.
pub fn frame_inputs_from_simulation(sim: &Simulation) -> Vec<FrameInput> {
    sim.frames
        .iter()
        .map(|f| FrameInput {
            frame: f.frame,
            features: f.features.clone(),
            odometry: f.odometry,
        })
        .collect()
}

/// Runs the tracker over a frame sequence and scores every frame's model
/// against ground truth.
pub fn run_eval(
    inputs: &[FrameInput],
    poses: &[PoseRecord],
    truth: &[TruthLine],
    config: Config<f64>,
    lane_width: f64,
) -> Result<EvalOutput> {
    let pose_by_frame: BTreeMap<u32, PoseRecord> = poses.iter().map(|p| (p.frame, *p)).collect();
    let mut tracker = LaneTracker64::new(config);
    let mut frames = Vec::with_capacity(inputs.len());
    let mut samples = Vec::new();
    let mut empty_model_frames = 0usize;

    for input in inputs {
        let pose = pose_by_frame.get(&input.frame).with_context(|| {
            format!("ground truth has no vehicle pose for frame {}", input.frame)
        })?;
        tracker.step(&input.features, &input.odometry, input.frame as f64);
        let model = tracker.model();
        if model.lines.is_empty() {
            empty_model_frames += 1;
        }
        // The frame's features define the range the model is asked to cover.
        let window = input
            .features
            .iter()
            .map(|f| f.x)
            .fold(0.0f64, f64::max);
        let (metric, frame_samples) =
            score_frame(input.frame, model, pose, truth, lane_width, window);
        frames.push(metric);
        samples.extend(frame_samples);
    }

    let overall_rmse = rmse_of(samples.iter().map(|s| s.deviation));
    Ok(EvalOutput {
        bins: bins_from_samples(&samples),
        total_frames: frames.len(),
        empty_model_frames,
        overall_rmse,
        frames,
        samples,
    })
}

/// Scores one frame: matches estimated lines to truth lines by lateral
/// offset at x = 0, then measures |f(x) − y_truth| at every truth sample
/// within the visible window [0, window]. Lines are evaluated with
/// extrapolation where their own knot span ends early, so a model that
/// under-covers the window pays for it.
fn score_frame(
    frame: u32,
    model: &LaneModel<f64>,
    pose: &PoseRecord,
    truth: &[TruthLine],
    lane_width: f64,
    window: f64,
) -> (FrameMetric, Vec<SampleDeviation>) {
    // Ground-truth polylines in the vehicle frame.
    let locals: Vec<Vec<(f64, f64)>> = truth
        .iter()
        .map(|line| {
            line.points
                .iter()
                .map(|&(wx, wy, _)| to_local(pose, wx, wy))
                .collect()
        })
        .collect();
    let truth_y0: Vec<Option<f64>> = locals.iter().map(|pts| y_at(pts, 0.0)).collect();

    // Greedy one-to-one matching by offset gap at x = 0.
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (ei, line) in model.lines.iter().enumerate() {
        let e0 = line.eval(0.0, Deriv::Value);
        for (ti, y0) in truth_y0.iter().enumerate() {
            if let Some(y0) = y0 {
                let gap = (e0 - y0).abs();
                if gap <= MATCH_TOLERANCE {
                    pairs.push((ei, ti, gap));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    let mut est_used = vec![false; model.lines.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    for (ei, ti, _) in pairs {
        if !est_used[ei] && !truth_used[ti] {
            est_used[ei] = true;
            truth_used[ti] = true;
            matched.push((ei, ti));
        }
    }
    matched.sort_unstable();

    let mut samples = Vec::new();
    let mut max_deviation = 0.0f64;
    for &(ei, ti) in &matched {
        let line = &model.lines[ei];
        let label = LaneLabel::classify(truth_y0[ti].expect("matched line has offset"), lane_width);
        for &(x, y) in &locals[ti] {
            if x < -1e-9 || x > window + 1e-9 {
                continue;
            }
            let deviation = (line.eval(x, Deriv::Value) - y).abs();
            max_deviation = max_deviation.max(deviation);
            samples.push(SampleDeviation {
                frame,
                label,
                x,
                deviation,
            });
        }
    }

    let metric = FrameMetric {
        frame,
        line_count: model.lines.len(),
        matched_lines: matched.len(),
        sample_count: samples.len(),
        rmse: rmse_of(samples.iter().map(|s| s.deviation)),
        max_deviation,
    };
    (metric, samples)
}

/// World point into the vehicle frame of `pose`.
fn to_local(pose: &PoseRecord, wx: f64, wy: f64) -> (f64, f64) {
    let (sn, cs) = pose.psi.sin_cos();
    let dx = wx - pose.x;
    let dy = wy - pose.y;
    (cs * dx + sn * dy, -sn * dx + cs * dy)
}

/// Linear interpolation of a local-frame polyline at longitudinal position x;
/// None when x is outside the polyline.
fn y_at(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut best_span = f64::INFINITY;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if (x0 - x) * (x1 - x) <= 0.0 && (x1 - x0).abs() > 1e-12 {
            let t = (x - x0) / (x1 - x0);
            // Prefer the locally shortest bracketing span (robust when a
            // winding road crosses the same x more than once far away).
            let span = (x1 - x0).abs();
            if span < best_span {
                best_span = span;
                best = Some(y0 + t * (y1 - y0));
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------------

pub const BINS_HEADER: &str = "bin_start,bin_end,lane_label,rmse,sample_count";
pub const FRAMES_HEADER: &str =
    "frame_id,line_count,matched_lines,sample_count,rmse,max_deviation";
pub const SAMPLES_HEADER: &str = "frame_id,lane_label,x,deviation";
pub const COMPARISON_HEADER: &str = "frame_id,spline_rmse,clothoid_rmse";

pub fn render_bins(bins: &[BinMetric]) -> String {
    let mut out = String::from(BINS_HEADER);
    out.push('\n');
    for b in bins {
        writeln!(
            out,
            "{},{},{},{},{}",
            b.bin_start,
            b.bin_end,
            b.label.as_str(),
            b.rmse,
            b.sample_count
        )
        .expect("string write");
    }
    out
}

pub fn render_frames(frames: &[FrameMetric]) -> String {
    let mut out = String::from(FRAMES_HEADER);
    out.push('\n');
    for f in frames {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f.frame, f.line_count, f.matched_lines, f.sample_count, f.rmse, f.max_deviation
        )
        .expect("string write");
    }
    out
}

pub fn render_samples(samples: &[SampleDeviation]) -> String {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        writeln!(out, "{},{},{},{}", s.frame, s.label.as_str(), s.x, s.deviation)
            .expect("string write");
    }
    out
}

pub fn render_summary(output: &EvalOutput, model: ModelKind) -> String {
    let max_frame_rmse = output
        .frames
        .iter()
        .map(|f| f.rmse)
        .filter(|r| !r.is_nan())
        .fold(f64::NAN, f64::max);
    let mut out = String::from("key,value\n");
    writeln!(out, "model,{}", model.as_str()).expect("string write");
    writeln!(out, "total_frames,{}", output.total_frames).expect("string write");
    writeln!(out, "empty_model_frames,{}", output.empty_model_frames).expect("string write");
    writeln!(out, "overall_rmse,{}", output.overall_rmse).expect("string write");
    writeln!(out, "max_frame_rmse,{max_frame_rmse}").expect("string write");
    out
}

/// Writes the standard evaluation file set into `out_dir`.
pub fn write_eval_outputs(out_dir: &Path, output: &EvalOutput, model: ModelKind) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    std::fs::write(out_dir.join("bins.csv"), render_bins(&output.bins))?;
    std::fs::write(out_dir.join("frames.csv"), render_frames(&output.frames))?;
    std::fs::write(out_dir.join("samples.csv"), render_samples(&output.samples))?;
    std::fs::write(out_dir.join("summary.csv"), render_summary(output, model))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Scenario-level commands
// ---------------------------------------------------------------------------

/// Result of running both line functions on the same simulated frames.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub spline: EvalOutput,
    pub clothoid: EvalOutput,
    pub max_spline_rmse: f64,
    pub max_clothoid_rmse: f64,
    /// max per-frame clothoid RMSE over max per-frame spline RMSE.
    pub max_rmse_ratio: f64,
    /// Aggregate RMSE of each mode over frames whose whole forward window
    /// lies on the leading straight section; NaN when there are none.
    pub straight_spline_rmse: f64,
    pub straight_clothoid_rmse: f64,
    pub straight_frame_count: usize,
}

/// Runs spline and clothoid modes on identical frames from one simulation.
pub fn compare_models(
    spec: &ScenarioSpec,
    sim: &Simulation,
    config: Config<f64>,
) -> Result<Comparison> {
    let inputs = frame_inputs_from_simulation(sim);
    let spline = run_eval(
        &inputs,
        &sim.poses,
        &sim.truth,
        ModelKind::Spline.apply(config.clone()),
        spec.lane_width,
    )?;
    let clothoid = run_eval(
        &inputs,
        &sim.poses,
        &sim.truth,
        ModelKind::Clothoid.apply(config),
        spec.lane_width,
    )?;

    let max_of = |o: &EvalOutput| {
        o.frames
            .iter()
            .map(|f| f.rmse)
            .filter(|r| !r.is_nan())
            .fold(f64::NAN, f64::max)
    };
    let max_spline_rmse = max_of(&spline);
    let max_clothoid_rmse = max_of(&clothoid);

    // Frames whose entire forward window lies on the leading straight
    // section see no curvature at all.
    let straight = spec.straight_prefix();
    let straight_frame: Vec<bool> = (0..sim.frames.len())
        .map(|i| i as f64 * spec.frame_step + spec.feature_horizon <= straight + 1e-9)
        .collect();
    let straight_rmse = |o: &EvalOutput| {
        rmse_of(
            o.samples
                .iter()
                .filter(|s| (s.frame as usize) < straight_frame.len() && straight_frame[s.frame as usize])
                .map(|s| s.deviation),
        )
    };

    Ok(Comparison {
        max_spline_rmse,
        max_clothoid_rmse,
        max_rmse_ratio: max_clothoid_rmse / max_spline_rmse,
        straight_spline_rmse: straight_rmse(&spline),
        straight_clothoid_rmse: straight_rmse(&clothoid),
        straight_frame_count: straight_frame.iter().filter(|&&b| b).count(),
        spline,
        clothoid,
    })
}

pub fn render_comparison(cmp: &Comparison) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for (s, c) in cmp.spline.frames.iter().zip(&cmp.clothoid.frames) {
        writeln!(out, "{},{},{}", s.frame, s.rmse, c.rmse).expect("string write");
    }
    out
}

pub fn render_comparison_summary(cmp: &Comparison) -> String {
    let mut out = String::from("key,value\n");
    writeln!(out, "max_spline_rmse,{}", cmp.max_spline_rmse).expect("string write");
    writeln!(out, "max_clothoid_rmse,{}", cmp.max_clothoid_rmse).expect("string write");
    writeln!(out, "max_rmse_ratio,{}", cmp.max_rmse_ratio).expect("string write");
    writeln!(out, "straight_spline_rmse,{}", cmp.straight_spline_rmse).expect("string write");
    writeln!(out, "straight_clothoid_rmse,{}", cmp.straight_clothoid_rmse)
        .expect("string write");
    writeln!(out, "straight_frame_count,{}", cmp.straight_frame_count).expect("string write");
    out
}

/// Writes the comparison file set into `out_dir`.
pub fn write_comparison_outputs(out_dir: &Path, cmp: &Comparison) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    std::fs::write(out_dir.join("comparison.csv"), render_comparison(cmp))?;
    std::fs::write(
        out_dir.join("comparison_summary.csv"),
        render_comparison_summary(cmp),
    )?;
    write_eval_outputs(&out_dir.join("spline"), &cmp.spline, ModelKind::Spline)?;
    write_eval_outputs(&out_dir.join("clothoid"), &cmp.clothoid, ModelKind::Clothoid)?;
    Ok(())
}

/// Loads a tracker configuration: defaults, optionally overridden by a
/// key=value file.
pub fn load_config(path: Option<&Path>) -> Result<Config<f64>> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Config::from_kv_text(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Loads a scenario specification from its key=value file.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    ScenarioSpec::from_kv_text(&text)
        .with_context(|| format!("parsing scenario {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lane_model::LineId;

    fn pose() -> PoseRecord {
        PoseRecord {
            frame: 0,
            x: 0.0,
            y: 0.0,
            psi: 0.0,
        }
    }

    fn straight_truth(offset: f64) -> TruthLine {
        TruthLine {
            id: 0,
            points: (0..200)
                .map(|i| (i as f64 * 0.5, offset, 0.0))
                .collect(),
        }
    }

    #[test]
    fn perfect_model_scores_zero_in_every_bin() {
        let truth = vec![straight_truth(1.75), {
            let mut t = straight_truth(-1.75);
            t.id = 1;
            t
        }];
        let mut model = LaneModel::empty(0.0);
        model.lines.push(lane_model::Line::single(
            LineId(0),
            0.0,
            80.0,
            [1.75, 0.0, 0.0, 0.0],
        ));
        model.lines.push(lane_model::Line::single(
            LineId(1),
            0.0,
            80.0,
            [-1.75, 0.0, 0.0, 0.0],
        ));
        let (metric, samples) = score_frame(0, &model, &pose(), &truth, 3.5, 80.0);
        assert_eq!(metric.matched_lines, 2);
        assert!(metric.sample_count > 300);
        assert!(metric.rmse < 1e-12, "rmse {}", metric.rmse);
        let bins = bins_from_samples(&samples);
        // Samples at 0, 0.5, ..., 80.0: the final sample sits exactly on the
        // 80 m bin edge, opening a ninth bin.
        assert_eq!(bins.len(), 9);
        assert!(bins.iter().all(|b| b.rmse < 1e-12));
        assert!(bins.iter().all(|b| b.label == LaneLabel::Ego));
    }

    #[test]
    fn constant_offset_model_scores_that_offset_everywhere() {
        let truth = vec![straight_truth(1.75)];
        let mut model = LaneModel::empty(0.0);
        model.lines.push(lane_model::Line::single(
            LineId(0),
            0.0,
            60.0,
            [1.95, 0.0, 0.0, 0.0],
        ));
        let (metric, samples) = score_frame(0, &model, &pose(), &truth, 3.5, 60.0);
        assert_eq!(metric.matched_lines, 1);
        assert!((metric.rmse - 0.2).abs() < 1e-12);
        for bin in bins_from_samples(&samples) {
            assert!((bin.rmse - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn unmatched_lines_produce_no_samples() {
        // Truth far from the only estimated line: nothing matches.
        let truth = vec![straight_truth(6.0)];
        let mut model = LaneModel::empty(0.0);
        model.lines.push(lane_model::Line::single(
            LineId(0),
            0.0,
            60.0,
            [0.0, 0.0, 0.0, 0.0],
        ));
        let (metric, samples) = score_frame(0, &model, &pose(), &truth, 3.5, 60.0);
        assert_eq!(metric.matched_lines, 0);
        assert!(samples.is_empty());
        assert!(metric.rmse.is_nan());
    }

    #[test]
    fn deviation_samples_cover_the_window_even_past_the_knot_span() {
        // The line's own knots stop at 40 m, but the visible window runs to
        // 50 m: the tail is scored by extrapolation, and nothing beyond the
        // window is sampled.
        let truth = vec![straight_truth(1.75)];
        let mut model = LaneModel::empty(0.0);
        model.lines.push(lane_model::Line::single(
            LineId(0),
            10.0,
            40.0,
            [1.75, 0.0, 0.0, 0.0],
        ));
        let (_, samples) = score_frame(0, &model, &pose(), &truth, 3.5, 50.0);
        assert!(!samples.is_empty());
        assert!(samples.iter().all(|s| s.x >= -1e-9 && s.x <= 50.0 + 1e-9));
        assert!(samples.iter().any(|s| s.x > 45.0));
        assert!(samples.iter().any(|s| s.x < 5.0));
        assert!(samples.iter().all(|s| s.deviation < 1e-12));
    }

    #[test]
    fn local_interpolation_matches_an_exact_diagonal() {
        let points: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 * 0.5, i as f64 * 0.25)).collect();
        let y = y_at(&points, 10.2).unwrap();
        assert!((y - 5.1).abs() < 1e-12);
        assert!(y_at(&points, -0.1).is_none());
        assert!(y_at(&points, 49.6).is_none());
    }
}
