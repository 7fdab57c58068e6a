//! Matcher backends: given a UAV observation and a candidate satellite tile,
//! produce a feature distance and a global camera pose estimate.
//!
//! The backends stand in for the scene and camera localization networks.
//! [`SyntheticBackend`] perturbs the ground truth with a calibrated noise
//! model, [`SceneBackend`] reports the tile centre itself, and
//! [`ReplayBackend`] serves results recorded by a [`Recorder`].

mod replay;
mod synthetic;

pub use replay::{Recorder, ReplayBackend, MATCH_FILE_HEADER};
pub use synthetic::{
    distance_model, scene_match, synthetic_match, SceneBackend, ScenePriors, SyntheticBackend,
};

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{GeometryError, Pose6D};
use crate::tiledb::TileRecord;

/// Smallest feature distance any backend reports.
pub const D_MIN: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("no recorded result for frame {frame}, tile {tile}")]
    ReplayMiss { frame: u64, tile: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MatchError>;

/// The query image of one frame.
///
/// The true pose travels with the observation so that oracle backends can
/// simulate a network; fusion and filtering only ever see [`MatchResult`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavObservation {
    frame: u64,
    truth: Pose6D,
}

impl UavObservation {
    pub fn new(frame: u64, truth: Pose6D) -> Self {
        Self { frame, truth }
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    /// Ground truth, for simulation backends only.
    pub fn truth(&self) -> &Pose6D {
        &self.truth
    }
}

/// Output of one (UAV image, satellite tile) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub tile_id: u32,
    /// Feature distance, at least [`D_MIN`].
    pub d: f64,
    pub p_hat: Vector3<f64>,
    pub psi_hat: f64,
    pub theta_hat: f64,
}

/// Error model of a synthetic camera localization network plus the
/// distance model of the scene localization network.
///
/// Pose noise of every pair is `sqrt(rho) * common + sqrt(1 - rho) * own`,
/// where `common` is shared by all candidates of a frame (they are computed
/// from the same UAV image) and `rho = frame_correlation`. The marginal error
/// of a single pair therefore has standard deviation `sigma_*` whatever the
/// correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatcherNoiseModel {
    /// Per-axis horizontal position noise, m.
    pub sigma_xy: f64,
    pub sigma_z: f64,
    /// Heading noise, deg.
    pub sigma_psi: f64,
    /// Tilt noise, deg (estimate clamped to [0, 45]).
    pub sigma_theta: f64,
    /// Distance of a perfectly matching pair.
    pub d0: f64,
    /// Distance growth per metre between tile centre and true scene centre.
    pub d_slope: f64,
    /// Scale of the half-normal distance jitter.
    pub d_jitter: f64,
    pub outlier_prob: f64,
    /// Pose noise multiplier for outlier pairs.
    pub outlier_factor: f64,
    pub frame_correlation: f64,
}

/// Table-1 style error figures of a camera localization network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorFigures {
    /// RMS horizontal (2D) error, m.
    pub horizontal: f64,
    pub vertical: f64,
    pub heading: f64,
    pub tilt: f64,
}

/// Camera-hybrid network, unseen-city test split.
pub const HYBRID_TEST_ERRORS: ErrorFigures = ErrorFigures {
    horizontal: 33.86,
    vertical: 16.05,
    heading: 31.68,
    tilt: 6.28,
};

/// Camera-regression network, unseen-city test split.
pub const REGRESSION_TEST_ERRORS: ErrorFigures = ErrorFigures {
    horizontal: 68.06,
    vertical: 17.32,
    heading: 70.64,
    tilt: 7.94,
};

impl MatcherNoiseModel {
    pub const DEFAULT_D0: f64 = 5.0;
    pub const DEFAULT_D_SLOPE: f64 = 0.5;
    pub const DEFAULT_D_JITTER: f64 = 5.0;
    pub const DEFAULT_FRAME_CORRELATION: f64 = 0.9;

    /// Noise calibrated so that RMS errors of single pairs reproduce `e`.
    /// The horizontal figure is split evenly over the two axes.
    pub fn calibrated(e: ErrorFigures) -> Self {
        Self {
            sigma_xy: e.horizontal / std::f64::consts::SQRT_2,
            sigma_z: e.vertical,
            sigma_psi: e.heading,
            sigma_theta: e.tilt,
            d0: Self::DEFAULT_D0,
            d_slope: Self::DEFAULT_D_SLOPE,
            d_jitter: Self::DEFAULT_D_JITTER,
            outlier_prob: 0.0,
            outlier_factor: 3.0,
            frame_correlation: Self::DEFAULT_FRAME_CORRELATION,
        }
    }

    pub fn hybrid_grade() -> Self {
        Self::calibrated(HYBRID_TEST_ERRORS)
    }

    pub fn regression_grade() -> Self {
        Self::calibrated(REGRESSION_TEST_ERRORS)
    }

    /// Exact poses; only the distance model remains (without jitter).
    pub fn noiseless() -> Self {
        Self {
            sigma_xy: 0.0,
            sigma_z: 0.0,
            sigma_psi: 0.0,
            sigma_theta: 0.0,
            d_jitter: 0.0,
            ..Self::hybrid_grade()
        }
    }

    /// Same model with every pose sigma multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_xy: self.sigma_xy * factor,
            sigma_z: self.sigma_z * factor,
            sigma_psi: self.sigma_psi * factor,
            sigma_theta: self.sigma_theta * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("sigma_xy", self.sigma_xy),
            ("sigma_z", self.sigma_z),
            ("sigma_psi", self.sigma_psi),
            ("sigma_theta", self.sigma_theta),
            ("d0", self.d0),
            ("d_slope", self.d_slope),
            ("d_jitter", self.d_jitter),
            ("outlier_factor", self.outlier_factor),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(MatchError::InvalidNoise(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("outlier_prob", self.outlier_prob),
            ("frame_correlation", self.frame_correlation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MatchError::InvalidNoise(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Contract of a matcher backend: one result per (observation, tile) pair,
/// deterministic for a given backend configuration.
pub trait MatchBackend: Send + Sync {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult>;

    /// Results for several candidate tiles of the same observation.
    fn match_candidates(
        &self,
        obs: &UavObservation,
        tiles: &[TileRecord],
    ) -> Result<Vec<MatchResult>> {
        tiles.iter().map(|t| self.match_pair(obs, t)).collect()
    }
}

impl<B: MatchBackend + ?Sized> MatchBackend for &B {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult> {
        (**self).match_pair(obs, tile)
    }
}

impl<B: MatchBackend + ?Sized> MatchBackend for Box<B> {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult> {
        (**self).match_pair(obs, tile)
    }
}
