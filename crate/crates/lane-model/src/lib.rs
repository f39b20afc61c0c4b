//! Multi-lane road-model estimation from lane-marking detections.
//!
//! The estimator keeps one piecewise-cubic line per tracked lane marking and
//! updates the set every frame with an expectation-maximization loop:
//! features are associated to the statistically nearest line, line support
//! and knot vectors are refreshed, and all lines of a parallel group are
//! refitted jointly under slope-equality constraints with a temporal prior
//! carried over from the previous frame through the vehicle odometry.
//!
//! The crate is generic over the scalar type (any [`Real`], i.e. `f32` or
//! `f64`); the `*64`/`*32` aliases at the root pick a width. Entry point:
//! [`LaneTracker::step`] with one frame of [`Feature`]s and the
//! [`OdometryDelta`] since the previous frame.

pub mod assoc;
pub mod attributes;
pub mod config;
pub mod error;
pub mod fit;
pub mod init;
pub mod pipeline;
pub mod predict;
pub mod scalar;
pub mod types;

pub use attributes::{AttributeMass, LineColor, MarkingType, Mass};
pub use config::Config;
pub use error::{Error, Result};
pub use fit::{FitPrior, FitReport, LineBasis, PriorBlock};
pub use pipeline::{FrameReport, LaneTracker};
pub use scalar::Real;
pub use types::{
    heading_from_slope, normalize_angle, slope_from_heading, Correspondences, Deriv, Feature,
    LaneModel, Line, LineAttributes, LineId, ModelStage, OdometryDelta, Segment,
};

/// Double-precision aliases (the default choice).
pub type Feature64 = Feature<f64>;
pub type Line64 = Line<f64>;
pub type LaneModel64 = LaneModel<f64>;
pub type Config64 = Config<f64>;
pub type OdometryDelta64 = OdometryDelta<f64>;
pub type LaneTracker64 = LaneTracker<f64>;

/// Single-precision aliases.
pub type Feature32 = Feature<f32>;
pub type Line32 = Line<f32>;
pub type LaneModel32 = LaneModel<f32>;
pub type Config32 = Config<f32>;
pub type OdometryDelta32 = OdometryDelta<f32>;
pub type LaneTracker32 = LaneTracker<f32>;
