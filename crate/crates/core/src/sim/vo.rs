//! Parametric visual-odometry surrogate.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::trajectory::TrajectoryFrame;
use super::{Result, SimError};
use crate::estimator::VoIncrement;
use crate::geometry::{compose_increment, Pose6D, RotationMatrix};
use crate::seeds::{self, TAG_VO};

/// Odometry error model.
///
/// Each translation increment is `(1 + scale_error) * dp + b + n` where `n`
/// is white noise of `pos_noise` per axis and `b` is a bias that starts as a
/// horizontal vector of length `bias_offset` (direction drawn per seed) and
/// performs a random walk of `bias_walk` per step. Rotation increments are
/// left-multiplied by a small random rotation of `rot_noise` per axis and a
/// constant yaw drift of `yaw_bias` (sign drawn per seed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoDriftModel {
    pub scale_error: f64,
    /// m per step.
    pub pos_noise: f64,
    /// deg per step.
    pub rot_noise: f64,
    /// m per step.
    pub bias_offset: f64,
    /// m per step, per step.
    pub bias_walk: f64,
    /// deg per step.
    pub yaw_bias: f64,
}

impl VoDriftModel {
    pub fn zero() -> Self {
        Self {
            scale_error: 0.0,
            pos_noise: 0.0,
            rot_noise: 0.0,
            bias_offset: 0.0,
            bias_walk: 0.0,
            yaw_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("scale_error", self.scale_error),
            ("pos_noise", self.pos_noise),
            ("rot_noise", self.rot_noise),
            ("bias_offset", self.bias_offset),
            ("bias_walk", self.bias_walk),
            ("yaw_bias", self.yaw_bias),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Config(format!(
                    "vo drift {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for VoDriftModel {
    fn default() -> Self {
        Self {
            scale_error: 0.02,
            pos_noise: 0.02,
            rot_noise: 0.01,
            bias_offset: 0.06,
            bias_walk: 1e-5,
            yaw_bias: 0.0014,
        }
    }
}

fn normal3<R: Rng>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Odometry increments for every frame; the first is the identity.
pub fn simulate_vo(
    frames: &[TrajectoryFrame],
    drift: &VoDriftModel,
    seed: u64,
) -> Result<Vec<VoIncrement>> {
    drift.validate()?;
    let mut rng = seeds::rng(seed, &[TAG_VO]);
    let yaw_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let yaw = RotationMatrix::from_axis_angle(&Vector3::z(), -yaw_sign * drift.yaw_bias);
    let dir = rng.random_range(0.0..std::f64::consts::TAU);
    let mut bias = drift.bias_offset * Vector3::new(dir.cos(), dir.sin(), 0.0);
    let mut out = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        if i == 0 {
            out.push(VoIncrement::identity());
            continue;
        }
        let truth = f.vo_increment;
        bias += drift.bias_walk * normal3(&mut rng);
        let dp = (1.0 + drift.scale_error) * truth.dp + bias + drift.pos_noise * normal3(&mut rng);
        let noise = RotationMatrix::from_rotation_vector_deg(&(drift.rot_noise * normal3(&mut rng)));
        let dr = noise.compose(&yaw).compose(&truth.dr);
        out.push(VoIncrement { dp, dr });
    }
    Ok(out)
}

/// Integrates increments from `start`.
pub fn dead_reckon(start: Pose6D, increments: &[VoIncrement]) -> Result<Vec<Pose6D>> {
    let mut pose = start;
    let mut out = Vec::with_capacity(increments.len());
    for (i, inc) in increments.iter().enumerate() {
        if i > 0 {
            pose = compose_increment(&pose, &inc.dp, &inc.dr)?;
        }
        out.push(pose);
    }
    Ok(out)
}
