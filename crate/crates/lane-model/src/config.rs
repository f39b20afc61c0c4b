//! Estimator configuration and the key=value text format it is read from.
//!
//! Files are plain text: one `key = value` per line, `#` comments, optional
//! `[section]` headers that prefix the keys that follow (`[fit]` + `step_tol`
//! is the same as a bare `fit.step_tol`). Repeated keys keep their order,
//! which the scenario format relies on for road segments.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Parses key=value text into ordered (key, value) pairs.
pub fn parse_kv_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got {:?}",
                lineno + 1,
                raw
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", lineno + 1)));
        }
        let full = if section.is_empty() || key.contains('.') {
            key.to_string()
        } else {
            format!("{}.{}", section, key)
        };
        pairs.push((full, value.to_string()));
    }
    Ok(pairs)
}

fn parse_scalar<T: Real>(key: &str, value: &str) -> Result<T> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: {value:?} is not a number")))?;
    Ok(real(v))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: {value:?} is not an integer")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: {value:?} is not a boolean"
        ))),
    }
}

/// Initialization from scratch (lateral clustering of near features).
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig<T> {
    /// Only features with x within [0, max_x] seed new lines [m].
    pub max_x: T,
    /// Lateral gap that splits clusters [m].
    pub gap_threshold: T,
    /// Clusters below this population are discarded.
    pub min_cluster_size: usize,
    /// Half-width each cluster member must stay within around the mean [m].
    pub cluster_half_width: T,
}

/// Model prediction between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig<T> {
    /// Segments entirely behind this x are discarded after the transform [m].
    pub cull_behind: T,
}

/// Feature-to-line association and line lifecycle.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocConfig<T> {
    /// Mahalanobis gate on (y, theta) residuals; chi-square, 2 dof, 99%.
    pub gate_chi2: T,
    /// Hard cap on the absolute lateral residual [m].
    pub euclid_gate: T,
    /// Minimum lateral clearance for spawning a line next to existing ones [m].
    pub spawn_min_separation: T,
    /// Maximum per-frame shrink of a line's range per side [m].
    pub range_decay: T,
    /// Consecutive featureless frames before a line is removed.
    pub spawn_grace: u32,
    /// Per-frame leak of attribute belief back to ignorance.
    pub forget_factor: T,
}

/// Knot layout of the spline model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    /// Longest allowed segment before extra knots are inserted [m].
    pub max_segment_len: T,
    /// Knots closer than this are merged to the earlier knot [m].
    pub min_segment_len: T,
    /// Clothoid-comparison mode: one cubic per line, no interior knots.
    pub single_segment: bool,
}

/// Constrained Gauss-Newton fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    /// Convergence threshold on the max-norm of the update step.
    pub step_tol: T,
    pub max_iters: usize,
    /// Initial Levenberg damping when the KKT system is ill-conditioned.
    pub damping_init: T,
    /// Damping growth is abandoned beyond this value.
    pub damping_max: T,
    /// Odometry noise floor added to predicted control-point positions [m].
    pub odo_sigma_y: T,
    /// Odometry noise floor added to predicted control-point slopes.
    pub odo_sigma_theta: T,
}

/// Outer expectation-maximization loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config<T> {
    pub init: InitConfig<T>,
    pub predict: PredictConfig<T>,
    pub assoc: AssocConfig<T>,
    pub model: ModelConfig<T>,
    pub fit: FitConfig<T>,
    pub em: EmConfig,
}

impl<T: Real> Default for Config<T> {
    fn default() -> Self {
        Self {
            init: InitConfig {
                max_x: real(20.0),
                gap_threshold: real(1.0),
                min_cluster_size: 5,
                cluster_half_width: real(1.0),
            },
            predict: PredictConfig {
                cull_behind: real(-5.0),
            },
            assoc: AssocConfig {
                gate_chi2: real(9.21),
                euclid_gate: real(2.0),
                spawn_min_separation: real(1.5),
                range_decay: real(10.0),
                spawn_grace: 5,
                forget_factor: real(0.95),
            },
            model: ModelConfig {
                max_segment_len: real(50.0),
                min_segment_len: real(10.0),
                single_segment: false,
            },
            fit: FitConfig {
                step_tol: real(1e-6),
                max_iters: 20,
                damping_init: real(1e-6),
                damping_max: real(1e2),
                odo_sigma_y: real(0.02),
                odo_sigma_theta: real(0.002),
            },
            em: EmConfig { max_iters: 10 },
        }
    }
}

impl<T: Real> Config<T> {
    /// Applies one dotted key; unknown keys are rejected so typos surface.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "init.max_x" => self.init.max_x = parse_scalar(key, value)?,
            "init.gap_threshold" => self.init.gap_threshold = parse_scalar(key, value)?,
            "init.min_cluster_size" => self.init.min_cluster_size = parse_usize(key, value)?,
            "init.cluster_half_width" => self.init.cluster_half_width = parse_scalar(key, value)?,
            "predict.cull_behind" => self.predict.cull_behind = parse_scalar(key, value)?,
            "assoc.gate_chi2" => self.assoc.gate_chi2 = parse_scalar(key, value)?,
            "assoc.euclid_gate" => self.assoc.euclid_gate = parse_scalar(key, value)?,
            "assoc.spawn_min_separation" => {
                self.assoc.spawn_min_separation = parse_scalar(key, value)?
            }
            "assoc.range_decay" => self.assoc.range_decay = parse_scalar(key, value)?,
            "assoc.spawn_grace" => self.assoc.spawn_grace = parse_usize(key, value)? as u32,
            "assoc.forget_factor" => self.assoc.forget_factor = parse_scalar(key, value)?,
            "model.max_segment_len" => self.model.max_segment_len = parse_scalar(key, value)?,
            "model.min_segment_len" => self.model.min_segment_len = parse_scalar(key, value)?,
            "model.single_segment" => self.model.single_segment = parse_bool(key, value)?,
            "fit.step_tol" => self.fit.step_tol = parse_scalar(key, value)?,
            "fit.max_iters" => self.fit.max_iters = parse_usize(key, value)?,
            "fit.damping_init" => self.fit.damping_init = parse_scalar(key, value)?,
            "fit.damping_max" => self.fit.damping_max = parse_scalar(key, value)?,
            "fit.odo_sigma_y" => self.fit.odo_sigma_y = parse_scalar(key, value)?,
            "fit.odo_sigma_theta" => self.fit.odo_sigma_theta = parse_scalar(key, value)?,
            "em.max_iters" => self.em.max_iters = parse_usize(key, value)?,
            _ => {
                return Err(Error::InvalidConfig(format!("unknown key {key:?}")));
            }
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_kv_text(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }
}
