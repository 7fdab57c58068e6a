//! Experiment configuration and its `key = value` file format.
//!
//! Lines are `key = value`; `#` starts a comment. Keys that are not listed in
//! [`ExperimentConfig::entries`] are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::trajectory::TrajectoryConfig;
use super::vo::VoDriftModel;
use super::{Result, SimError};
use crate::fusion::{FusionConfig, COVARIANCE_EPSILON};
use crate::matcher::{MatcherNoiseModel, ScenePriors};
use crate::tiledb::DEFAULT_K;

/// Where a pipeline's match results come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Truth perturbed by the configured noise.
    Synthetic,
    /// Tile centres with prior orientation.
    Scene,
    /// Results read from a match record file.
    Replay,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Synthetic => "synthetic",
            BackendKind::Scene => "scene",
            BackendKind::Replay => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub replay_file: Option<PathBuf>,
}

impl BackendConfig {
    fn of(kind: BackendKind) -> Self {
        Self {
            kind,
            replay_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Process noise per prediction step for x, y, z (m^2).
    pub q_position: f64,
    /// Process noise per prediction step for psi, theta, phi (deg^2).
    pub q_angle: f64,
    pub p0_position: f64,
    pub p0_angle: f64,
    /// Frames between two corrections.
    pub correction_interval: usize,
    /// Candidate tiles per correction.
    pub candidates: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            q_position: 0.01,
            q_angle: 0.01,
            p0_position: 1.0,
            p0_angle: 1.0,
            correction_interval: 20,
            candidates: DEFAULT_K,
        }
    }
}

/// Parameters of the feature-distance model shared by every backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceParams {
    pub d0: f64,
    pub d_slope: f64,
    pub d_jitter: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        Self {
            d0: MatcherNoiseModel::DEFAULT_D0,
            d_slope: MatcherNoiseModel::DEFAULT_D_SLOPE,
            d_jitter: MatcherNoiseModel::DEFAULT_D_JITTER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trajectory: TrajectoryConfig,
    pub drift: VoDriftModel,
    pub distance: DistanceParams,
    pub regression: MatcherNoiseModel,
    pub hybrid: MatcherNoiseModel,
    pub scene: ScenePriors,
    pub scene_backend: BackendConfig,
    pub regression_backend: BackendConfig,
    pub hybrid_backend: BackendConfig,
    pub fusion_epsilon: f64,
    pub filter: FilterConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trajectory: TrajectoryConfig::default(),
            drift: VoDriftModel::default(),
            distance: DistanceParams::default(),
            regression: MatcherNoiseModel::regression_grade(),
            hybrid: MatcherNoiseModel::hybrid_grade(),
            scene: ScenePriors::default(),
            scene_backend: BackendConfig::of(BackendKind::Scene),
            regression_backend: BackendConfig::of(BackendKind::Synthetic),
            hybrid_backend: BackendConfig::of(BackendKind::Synthetic),
            fusion_epsilon: COVARIANCE_EPSILON,
            filter: FilterConfig::default(),
        }
    }
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn show(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{s}` is not a finite number"))
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for usize {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse::<usize>()
            .map_err(|_| format!("`{s}` is not a non-negative integer"))
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for BackendKind {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synthetic" => Ok(BackendKind::Synthetic),
            "scene" => Ok(BackendKind::Scene),
            "replay" => Ok(BackendKind::Replay),
            _ => Err(format!("unknown backend `{s}` (synthetic, scene, replay)")),
        }
    }
    fn show(&self) -> String {
        self.name().to_string()
    }
}

impl ConfigValue for Option<PathBuf> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Ok((!s.is_empty()).then(|| PathBuf::from(s)))
    }
    fn show(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+ , $doc:literal;)*) => {
        impl ExperimentConfig {
            fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
                match key {
                    $($key => self.$($field).+ = ConfigValue::parse_value(value)?,)*
                    _ => return Err(format!("unknown key `{key}`")),
                }
                Ok(())
            }

            /// `(key, current value, description)` for every key.
            pub fn entries(&self) -> Vec<(&'static str, String, &'static str)> {
                vec![$(($key, ConfigValue::show(&self.$($field).+), $doc)),*]
            }
        }
    };
}

config_keys! {
    "traj_length_m" => trajectory.length_m, "nominal path length";
    "traj_duration_s" => trajectory.duration_s, "flight duration";
    "traj_rate_hz" => trajectory.rate_hz, "frame rate";
    "traj_speed_mps" => trajectory.speed_mps, "3D ground speed";
    "traj_altitude_min" => trajectory.altitude_min, "lowest altitude, m";
    "traj_altitude_max" => trajectory.altitude_max, "highest altitude, m";
    "traj_tilt_min" => trajectory.tilt_min, "smallest camera tilt from nadir, deg";
    "traj_tilt_max" => trajectory.tilt_max, "largest camera tilt from nadir, deg";
    "traj_tilt_target_max" => trajectory.tilt_target_max, "upper bound of tilt schedule targets, deg";
    "traj_initial_straight_m" => trajectory.initial_straight_m, "pure translation at the start";
    "traj_turn_radius_m" => trajectory.turn_radius_m, "racetrack turn radius";
    "traj_max_climb_rate" => trajectory.max_climb_rate, "m/s";
    "traj_max_tilt_rate" => trajectory.max_tilt_rate, "deg/s";
    "vo_scale_error" => drift.scale_error, "odometry scale error";
    "vo_pos_noise" => drift.pos_noise, "translation noise per step and axis, m";
    "vo_rot_noise" => drift.rot_noise, "rotation noise per step and axis, deg";
    "vo_bias_offset" => drift.bias_offset, "initial horizontal translation bias per step, m";
    "vo_bias_walk" => drift.bias_walk, "translation bias random walk per step, m";
    "vo_yaw_bias" => drift.yaw_bias, "constant yaw drift per step, deg";
    "match_d0" => distance.d0, "feature distance of a perfect match";
    "match_d_slope" => distance.d_slope, "distance growth per metre of tile offset";
    "match_d_jitter" => distance.d_jitter, "half-normal distance jitter scale";
    "scene_backend" => scene_backend.kind, "scene pipeline backend (scene, replay)";
    "scene_replay_file" => scene_backend.replay_file, "match record for a replayed scene backend";
    "scene_altitude" => scene.altitude, "altitude reported by scene matches, m";
    "scene_psi" => scene.psi, "heading reported by scene matches, deg";
    "scene_theta" => scene.theta, "tilt reported by scene matches, deg";
    "regression_backend" => regression_backend.kind, "regression-grade backend (synthetic, replay)";
    "regression_replay_file" => regression_backend.replay_file, "match record for a replayed regression backend";
    "regression_sigma_xy" => regression.sigma_xy, "per-axis horizontal noise, m";
    "regression_sigma_z" => regression.sigma_z, "vertical noise, m";
    "regression_sigma_psi" => regression.sigma_psi, "heading noise, deg";
    "regression_sigma_theta" => regression.sigma_theta, "tilt noise, deg";
    "regression_outlier_prob" => regression.outlier_prob, "probability of an inflated pair";
    "regression_outlier_factor" => regression.outlier_factor, "noise multiplier of inflated pairs";
    "regression_frame_correlation" => regression.frame_correlation, "share of noise variance common to a frame";
    "hybrid_backend" => hybrid_backend.kind, "hybrid-grade backend (synthetic, replay)";
    "hybrid_replay_file" => hybrid_backend.replay_file, "match record for a replayed hybrid backend";
    "hybrid_sigma_xy" => hybrid.sigma_xy, "per-axis horizontal noise, m";
    "hybrid_sigma_z" => hybrid.sigma_z, "vertical noise, m";
    "hybrid_sigma_psi" => hybrid.sigma_psi, "heading noise, deg";
    "hybrid_sigma_theta" => hybrid.sigma_theta, "tilt noise, deg";
    "hybrid_outlier_prob" => hybrid.outlier_prob, "probability of an inflated pair";
    "hybrid_outlier_factor" => hybrid.outlier_factor, "noise multiplier of inflated pairs";
    "hybrid_frame_correlation" => hybrid.frame_correlation, "share of noise variance common to a frame";
    "fusion_epsilon" => fusion_epsilon, "diagonal added to fused covariances";
    "kf_q_position" => filter.q_position, "process noise per step, m^2";
    "kf_q_angle" => filter.q_angle, "process noise per step, deg^2";
    "kf_p0_position" => filter.p0_position, "initial position variance, m^2";
    "kf_p0_angle" => filter.p0_angle, "initial angle variance, deg^2";
    "kf_correction_interval" => filter.correction_interval, "frames between corrections";
    "kf_candidates" => filter.candidates, "candidate tiles per correction";
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative replay paths are taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_text(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for b in [
            &mut cfg.scene_backend,
            &mut cfg.regression_backend,
            &mut cfg.hybrid_backend,
        ] {
            if let Some(f) = b.replay_file.as_mut() {
                if f.is_relative() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    /// Every key with its current value, one per line, commented.
    pub fn to_text(&self) -> String {
        let entries = self.entries();
        let width = entries.iter().map(|(k, ..)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (key, value, doc) in entries {
            let _ = writeln!(out, "{key:<width$} = {value}  # {doc}");
        }
        out
    }

    /// Noise model of a pose backend with the shared distance parameters.
    pub fn noise_model(&self, base: &MatcherNoiseModel) -> MatcherNoiseModel {
        MatcherNoiseModel {
            d0: self.distance.d0,
            d_slope: self.distance.d_slope,
            d_jitter: self.distance.d_jitter,
            ..*base
        }
    }

    pub fn fusion_for(&self, noise: &MatcherNoiseModel) -> FusionConfig {
        let (xy, z) = (noise.sigma_xy.powi(2), noise.sigma_z.powi(2));
        FusionConfig {
            epsilon: self.fusion_epsilon,
            prior_variances: [xy, xy, z, noise.sigma_psi.powi(2), noise.sigma_theta.powi(2)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trajectory.validate()?;
        self.drift.validate()?;
        self.noise_model(&self.regression).validate()?;
        self.noise_model(&self.hybrid).validate()?;
        self.fusion_for(&self.hybrid).validate()?;
        let f = &self.filter;
        for (name, v) in [
            ("kf_q_position", f.q_position),
            ("kf_q_angle", f.q_angle),
            ("kf_p0_position", f.p0_position),
            ("kf_p0_angle", f.p0_angle),
        ] {
            if !(v >= 0.0) {
                return Err(SimError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if f.correction_interval == 0 {
            return Err(SimError::Config("kf_correction_interval must be >= 1".into()));
        }
        if f.candidates == 0 {
            return Err(SimError::Config("kf_candidates must be >= 1".into()));
        }
        let checks = [
            ("scene", &self.scene_backend, [BackendKind::Scene, BackendKind::Replay]),
            ("regression", &self.regression_backend, [BackendKind::Synthetic, BackendKind::Replay]),
            ("hybrid", &self.hybrid_backend, [BackendKind::Synthetic, BackendKind::Replay]),
        ];
        for (name, b, allowed) in checks {
            if !allowed.contains(&b.kind) {
                return Err(SimError::Config(format!(
                    "{name} pipeline cannot use the {} backend",
                    b.kind.name()
                )));
            }
            match (b.kind, &b.replay_file) {
                (BackendKind::Replay, None) => {
                    return Err(SimError::Config(format!(
                        "{name}_backend = replay needs {name}_replay_file"
                    )))
                }
                (k, Some(_)) if k != BackendKind::Replay => {
                    return Err(SimError::Config(format!(
                        "{name}_replay_file is set but {name}_backend is {}",
                        k.name()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
