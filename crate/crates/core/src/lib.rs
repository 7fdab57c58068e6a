//! Cross-view geolocalization fusion toolkit.
//!
//! A UAV camera pose is estimated by matching its image against nearby
//! georeferenced satellite tiles. Each of the `k` candidate pairs yields a
//! feature distance and a global pose estimate; these are fused by inverse
//! distance weighting and fed, together with their spread as covariance, to
//! a Kalman filter whose prediction step integrates visual odometry.
//!
//! The neural matchers are replaced by pluggable backends (see [`matcher`]),
//! so the whole pipeline, and its comparison against odometry-only and
//! scene-only baselines, runs deterministically from a seed.

pub mod estimator;
pub mod fusion;
pub mod geometry;
pub mod lossmath;
pub mod matcher;
pub mod seeds;
pub mod sim;
pub mod tiledb;

pub use estimator::{FilterState, ProcessNoise, VoIncrement};
pub use fusion::{FusedMeasurement, FusionConfig};
pub use geometry::{CellIndex, Pose6D, RotationMatrix};
pub use matcher::{MatchBackend, MatchResult, MatcherNoiseModel, UavObservation};
pub use tiledb::{TileRecord, TileSet};
