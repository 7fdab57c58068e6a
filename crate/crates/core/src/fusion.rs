//! Fusion of the k candidate matches into one global pose measurement.
//!
//! The pose is the inverse-distance weighted mean of the candidate poses and
//! the measurement covariance is the block-diagonal spread of the candidates.

use nalgebra::{Matrix3, Matrix5, Vector3};
use thiserror::Error;

use crate::geometry::wrap_angle;
use crate::matcher::{MatchResult, D_MIN};

/// Diagonal regulariser added to every fused covariance.
pub const COVARIANCE_EPSILON: f64 = 1e-6;
/// Variance used for measurement components that carry no information.
pub const UNINFORMATIVE_VARIANCE: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("no candidate matches to fuse")]
    Empty,
    #[error("candidate {tile_id} has distance {d} below the floor {D_MIN}")]
    DistanceBelowFloor { tile_id: u32, d: f64 },
    #[error("non-finite candidate {tile_id}")]
    NonFinite { tile_id: u32 },
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, FusionError>;

/// Measurement components, in the order of the state they observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X = 0,
    Y = 1,
    Z = 2,
    Psi = 3,
    Theta = 4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub epsilon: f64,
    /// Variances `[x, y, z, psi, theta]` used when fewer than two
    /// candidates are available.
    pub prior_variances: [f64; 5],
}

impl Default for FusionConfig {
    fn default() -> Self {
        let n = crate::matcher::MatcherNoiseModel::hybrid_grade();
        Self {
            epsilon: COVARIANCE_EPSILON,
            prior_variances: [
                n.sigma_xy * n.sigma_xy,
                n.sigma_xy * n.sigma_xy,
                n.sigma_z * n.sigma_z,
                n.sigma_psi * n.sigma_psi,
                n.sigma_theta * n.sigma_theta,
            ],
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(FusionError::InvalidConfig(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self
            .prior_variances
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(FusionError::InvalidConfig(
                "prior variances must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPose {
    pub p_bar: Vector3<f64>,
    pub psi_bar: f64,
    pub theta_bar: f64,
}

/// Fused pose measurement `z = [p, psi, theta]` with covariance `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedMeasurement {
    pub p_bar: Vector3<f64>,
    pub psi_bar: f64,
    pub theta_bar: f64,
    pub m: Matrix5<f64>,
}

impl FusedMeasurement {
    pub fn to_vector(&self) -> nalgebra::Vector5<f64> {
        nalgebra::Vector5::new(
            self.p_bar.x,
            self.p_bar.y,
            self.p_bar.z,
            self.psi_bar,
            self.theta_bar,
        )
    }

    /// Replaces the variance of `c` with [`UNINFORMATIVE_VARIANCE`], so a
    /// filter correction leaves that state component essentially untouched.
    pub fn mark_uninformative(&mut self, c: Component) {
        let i = c as usize;
        for j in 0..5 {
            self.m[(i, j)] = 0.0;
            self.m[(j, i)] = 0.0;
        }
        self.m[(i, i)] = UNINFORMATIVE_VARIANCE;
    }
}

fn validate_results(results: &[MatchResult]) -> Result<()> {
    if results.is_empty() {
        return Err(FusionError::Empty);
    }
    for r in results {
        let values = [r.d, r.p_hat.x, r.p_hat.y, r.p_hat.z, r.psi_hat, r.theta_hat];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::NonFinite { tile_id: r.tile_id });
        }
        if r.d < D_MIN {
            return Err(FusionError::DistanceBelowFloor {
                tile_id: r.tile_id,
                d: r.d,
            });
        }
    }
    Ok(())
}

/// Heading of the best (smallest distance) candidate. Ties go to the lower
/// tile id, then the lower heading, so the choice is order independent.
fn reference_heading(results: &[MatchResult]) -> f64 {
    results
        .iter()
        .min_by(|a, b| {
            a.d.total_cmp(&b.d)
                .then(a.tile_id.cmp(&b.tile_id))
                .then(a.psi_hat.total_cmp(&b.psi_hat))
        })
        .map(|r| r.psi_hat)
        .expect("non-empty")
}

/// Inverse-distance weights, normalised to sum to one.
pub fn weights(results: &[MatchResult]) -> Result<Vec<f64>> {
    validate_results(results)?;
    let inv: Vec<f64> = results.iter().map(|r| 1.0 / r.d).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|w| w / total).collect())
}

/// Inverse-distance weighted pose. Headings are averaged as wrapped offsets
/// from the best candidate's heading, which equals the plain weighted mean
/// whenever all headings fit in a half circle away from the seam.
pub fn weighted_pose(results: &[MatchResult]) -> Result<WeightedPose> {
    let w = weights(results)?;
    let psi_ref = reference_heading(results);
    let mut p_bar = Vector3::zeros();
    let mut dpsi = 0.0;
    let mut theta_bar = 0.0;
    for (wi, r) in w.iter().zip(results) {
        p_bar += r.p_hat * *wi;
        dpsi += wi * wrap_angle(r.psi_hat - psi_ref);
        theta_bar += wi * r.theta_hat;
    }
    Ok(WeightedPose {
        p_bar,
        psi_bar: wrap_angle(psi_ref + dpsi),
        theta_bar,
    })
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Block-diagonal spread of the candidate poses plus `epsilon * I`.
///
/// Position block: unweighted sample covariance (divisor k - 1). Heading:
/// sample variance of wrapped offsets from the best candidate. With fewer
/// than two candidates the configured prior variances are used instead.
pub fn fused_covariance(results: &[MatchResult], cfg: &FusionConfig) -> Result<Matrix5<f64>> {
    validate_results(results)?;
    cfg.validate()?;
    let mut m = Matrix5::zeros();
    if results.len() < 2 {
        for (i, v) in cfg.prior_variances.iter().enumerate() {
            m[(i, i)] = *v;
        }
    } else {
        let k = results.len() as f64;
        let mean = results.iter().fold(Vector3::zeros(), |acc, r| acc + r.p_hat) / k;
        let mut cov = Matrix3::zeros();
        for r in results {
            let e = r.p_hat - mean;
            cov += e * e.transpose();
        }
        cov /= k - 1.0;
        // exact symmetry regardless of summation order
        cov = (cov + cov.transpose()) * 0.5;
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&cov);

        let psi_ref = reference_heading(results);
        let offsets: Vec<f64> = results
            .iter()
            .map(|r| wrap_angle(r.psi_hat - psi_ref))
            .collect();
        m[(3, 3)] = sample_variance(&offsets);
        let tilts: Vec<f64> = results.iter().map(|r| r.theta_hat).collect();
        m[(4, 4)] = sample_variance(&tilts);
    }
    for i in 0..5 {
        m[(i, i)] += cfg.epsilon;
    }
    Ok(m)
}

pub fn fuse(results: &[MatchResult], cfg: &FusionConfig) -> Result<FusedMeasurement> {
    let pose = weighted_pose(results)?;
    let m = fused_covariance(results, cfg)?;
    Ok(FusedMeasurement {
        p_bar: pose.p_bar,
        psi_bar: pose.psi_bar,
        theta_bar: pose.theta_bar,
        m,
    })
}
