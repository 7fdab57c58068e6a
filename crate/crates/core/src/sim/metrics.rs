use super::trajectory::path_length;
use super::{Result, SimError};
use crate::geometry::{angle_diff, Pose6D};

/// Trajectory error summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseSummary {
    pub pos_rmse_m: f64,
    /// Position RMSE as a percentage of the true path length.
    pub pos_pct: f64,
    pub psi_rmse_deg: f64,
    pub theta_rmse_deg: f64,
}

pub fn rmse(est: &[Pose6D], truth: &[Pose6D]) -> Result<RmseSummary> {
    if est.len() != truth.len() {
        return Err(SimError::LengthMismatch {
            est: est.len(),
            truth: truth.len(),
        });
    }
    if est.is_empty() {
        return Err(SimError::LengthMismatch { est: 0, truth: 0 });
    }
    let n = est.len() as f64;
    let (mut pos, mut psi, mut theta) = (0.0, 0.0, 0.0);
    for (e, t) in est.iter().zip(truth) {
        pos += (e.position() - t.position()).norm_squared();
        psi += angle_diff(e.psi, t.psi).powi(2);
        theta += angle_diff(e.theta, t.theta).powi(2);
    }
    let pos_rmse_m = (pos / n).sqrt();
    let length = path_length(truth.iter().copied());
    Ok(RmseSummary {
        pos_rmse_m,
        pos_pct: if length > 0.0 { 100.0 * pos_rmse_m / length } else { 0.0 },
        psi_rmse_deg: (psi / n).sqrt(),
        theta_rmse_deg: (theta / n).sqrt(),
    })
}
