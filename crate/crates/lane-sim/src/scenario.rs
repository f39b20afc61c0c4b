//! Scenario description: road segment list, lane layout, feature emission
//! parameters, and drive plan, parsed from a key=value text file.

use lane_model::config::parse_kv_text;
use lane_model::{LineColor, MarkingType};

use crate::error::{Error, Result};

/// One stretch of road. Curvature varies linearly in arc length from
/// `kappa_start` to `kappa_end` (a clothoid); equal values give a circular
/// arc and zero gives a straight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub length: f64,
    pub kappa_start: f64,
    pub kappa_end: f64,
}

/// Full description of a simulated drive.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Road geometry, traversed in order.
    pub segments: Vec<SegmentSpec>,
    pub lane_count: usize,
    pub lane_width: f64,
    /// Lane the vehicle drives in, 0 = leftmost.
    pub vehicle_lane: usize,
    /// Marking type per boundary line, leftmost first (lane_count + 1).
    pub markings: Vec<MarkingType>,
    /// Color per boundary line, leftmost first.
    pub colors: Vec<LineColor>,
    /// Longitudinal distance between emitted features, meters.
    pub feature_spacing: f64,
    /// Features are emitted for 0 <= x <= horizon in the vehicle frame.
    pub feature_horizon: f64,
    pub sigma_y: f64,
    pub sigma_theta: f64,
    /// Meters of travel between frames.
    pub frame_step: f64,
    pub frames: usize,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            segments: Vec::new(),
            lane_count: 1,
            lane_width: 3.5,
            vehicle_lane: 0,
            markings: Vec::new(),
            colors: Vec::new(),
            feature_spacing: 1.0,
            feature_horizon: 100.0,
            sigma_y: 0.05,
            sigma_theta: 0.005,
            frame_step: 2.0,
            frames: 100,
            seed: 1,
        }
    }
}

impl ScenarioSpec {
    /// Total road length.
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Number of boundary lines.
    pub fn line_count(&self) -> usize {
        self.lane_count + 1
    }

    /// Lateral offset of boundary line `j` (leftmost first) from the vehicle
    /// path, which runs along the middle of the vehicle lane.
    pub fn boundary_offset(&self, j: usize) -> f64 {
        (self.vehicle_lane as f64 + 0.5 - j as f64) * self.lane_width
    }

    /// Longest prefix of the road with exactly zero curvature; frames whose
    /// whole feature window lies within it see only straight road.
    pub fn straight_prefix(&self) -> f64 {
        let mut len = 0.0;
        for s in &self.segments {
            if s.kappa_start == 0.0 && s.kappa_end == 0.0 {
                len += s.length;
            } else {
                break;
            }
        }
        len
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Scenario("scenario has no road segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.length > 0.0) || !s.length.is_finite() {
                return Err(Error::Scenario(format!(
                    "segment {i}: length must be positive"
                )));
            }
        }
        if self.lane_count == 0 {
            return Err(Error::Scenario("lane_count must be at least 1".into()));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::Scenario("lane_width must be positive".into()));
        }
        if self.vehicle_lane >= self.lane_count {
            return Err(Error::Scenario(format!(
                "vehicle_lane {} outside 0..{}",
                self.vehicle_lane, self.lane_count
            )));
        }
        if !(self.feature_spacing > 0.0) {
            return Err(Error::Scenario("feature spacing must be positive".into()));
        }
        if !(self.feature_horizon > 0.0) {
            return Err(Error::Scenario("feature horizon must be positive".into()));
        }
        if self.sigma_y < 0.0 || self.sigma_theta < 0.0 {
            return Err(Error::Scenario("noise sigmas must be non-negative".into()));
        }
        if !(self.frame_step > 0.0) {
            return Err(Error::Scenario("frame_step must be positive".into()));
        }
        if self.markings.len() != self.line_count() {
            return Err(Error::Scenario(format!(
                "expected {} marking types, got {}",
                self.line_count(),
                self.markings.len()
            )));
        }
        if self.colors.len() != self.line_count() {
            return Err(Error::Scenario(format!(
                "expected {} colors, got {}",
                self.line_count(),
                self.colors.len()
            )));
        }
        let travel = self.frame_step * self.frames.saturating_sub(1) as f64;
        if travel > self.total_length() {
            return Err(Error::Scenario(format!(
                "drive of {travel} m exceeds the {} m road",
                self.total_length()
            )));
        }
        Ok(())
    }

    /// Parses the scenario file format: `[section]` headers with `key=value`
    /// lines. Unknown keys are rejected. `road.segment` may repeat, one per
    /// road segment, as `straight,<len>` or `clothoid,<len>,<k0>,<k1>`.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let pairs =
            parse_kv_text(text).map_err(|e| Error::Scenario(format!("scenario parse: {e}")))?;
        let mut spec = ScenarioSpec::default();
        let mut markings: Option<Vec<MarkingType>> = None;
        let mut colors: Option<Vec<LineColor>> = None;
        for (key, value) in &pairs {
            let parse_f64 = |v: &str| -> Result<f64> {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Scenario(format!("{key}: not a number: {v}")))
            };
            match key.as_str() {
                "road.segment" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let seg = match parts.as_slice() {
                        ["straight", len] => SegmentSpec {
                            length: parse_f64(len)?,
                            kappa_start: 0.0,
                            kappa_end: 0.0,
                        },
                        ["clothoid", len, k0, k1] => SegmentSpec {
                            length: parse_f64(len)?,
                            kappa_start: parse_f64(k0)?,
                            kappa_end: parse_f64(k1)?,
                        },
                        _ => {
                            return Err(Error::Scenario(format!(
                                "road.segment: expected 'straight,<len>' or \
                                 'clothoid,<len>,<k0>,<k1>', got '{value}'"
                            )))
                        }
                    };
                    spec.segments.push(seg);
                }
                "road.lane_count" => {
                    spec.lane_count = parse_f64(value)? as usize;
                }
                "road.lane_width" => spec.lane_width = parse_f64(value)?,
                "road.vehicle_lane" => {
                    spec.vehicle_lane = parse_f64(value)? as usize;
                }
                "road.markings" => {
                    let mut v = Vec::new();
                    for part in value.split(',') {
                        let m = MarkingType::parse(part.trim()).ok_or_else(|| {
                            Error::Scenario(format!("unknown marking type '{part}'"))
                        })?;
                        v.push(m);
                    }
                    markings = Some(v);
                }
                "road.colors" => {
                    let mut v = Vec::new();
                    for part in value.split(',') {
                        let c = LineColor::parse(part.trim()).ok_or_else(|| {
                            Error::Scenario(format!("unknown color '{part}'"))
                        })?;
                        v.push(c);
                    }
                    colors = Some(v);
                }
                "features.spacing" => spec.feature_spacing = parse_f64(value)?,
                "features.horizon" => spec.feature_horizon = parse_f64(value)?,
                "features.sigma_y" => spec.sigma_y = parse_f64(value)?,
                "features.sigma_theta" => spec.sigma_theta = parse_f64(value)?,
                "drive.frame_step" => spec.frame_step = parse_f64(value)?,
                "drive.frames" => spec.frames = parse_f64(value)? as usize,
                "drive.seed" => {
                    spec.seed = value.trim().parse::<u64>().map_err(|_| {
                        Error::Scenario(format!("drive.seed: not an integer: {value}"))
                    })?;
                }
                other => {
                    return Err(Error::Scenario(format!("unknown scenario key '{other}'")));
                }
            }
        }
        spec.markings = markings.unwrap_or_else(|| default_markings(spec.line_count()));
        spec.colors = colors.unwrap_or_else(|| vec![LineColor::White; spec.line_count()]);
        spec.validate()?;
        Ok(spec)
    }
}

/// Solid outer boundaries, dashed interior ones.
fn default_markings(line_count: usize) -> Vec<MarkingType> {
    (0..line_count)
        .map(|j| {
            if j == 0 || j + 1 == line_count {
                MarkingType::Solid
            } else {
                MarkingType::Dashed
            }
        })
        .collect()
}
