//! Scenario simulator for the lane estimation pipeline.
//!
//! Builds clothoid roads from a small text scenario format, integrates the
//! centerline geometry, emits noisy per-frame lane features with exact
//! odometry, and serializes everything as CSV for the evaluation tools.

pub mod error;
pub mod frames;
pub mod io;
pub mod road;
pub mod scenario;

pub use error::{Error, Result};
pub use frames::{simulate, PoseRecord, SimFrame, Simulation};
pub use road::{PathState, Road, TruthLine, TRUTH_SPACING};
pub use scenario::{ScenarioSpec, SegmentSpec};
