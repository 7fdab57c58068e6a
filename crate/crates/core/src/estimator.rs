//! Six-state pose Kalman filter driven by visual odometry.
//!
//! State `X = [x, y, z, psi, theta, phi]` (m, deg). Prediction applies the
//! odometry increment directly and inflates the covariance additively;
//! correction observes everything except roll.

use nalgebra::{Matrix5, Matrix5x6, Matrix6, SymmetricEigen, Vector3, Vector5, Vector6};
use thiserror::Error;

use crate::fusion::FusedMeasurement;
use crate::geometry::{compose_increment, wrap_angle, GeometryError, Pose6D, RotationMatrix};

/// Innovation covariances worse conditioned than this are rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("innovation covariance is ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },
    #[error("out-of-order timestamp {t} after {previous}")]
    Sequencing { t: f64, previous: f64 },
    #[error("{0} correction(s) after the last odometry increment")]
    UnusedCorrections(usize),
    #[error("invalid noise: {0}")]
    InvalidNoise(String),
}

pub type Result<T> = std::result::Result<T, FilterError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub pose: Pose6D,
    pub p: Matrix6<f64>,
}

impl FilterState {
    pub fn new(pose: Pose6D, p: Matrix6<f64>) -> Self {
        Self { pose, p }
    }

    /// Initial covariance defaults to the identity (m^2 and deg^2).
    pub fn with_identity_covariance(pose: Pose6D) -> Self {
        Self::new(pose, Matrix6::identity())
    }

    pub fn x(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.pose.to_array())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.p)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn asymmetry(&self) -> f64 {
        (self.p - self.p.transpose()).amax()
    }
}

/// Diagonal process noise added at every prediction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise(Matrix6<f64>);

impl ProcessNoise {
    pub fn from_diagonal(diag: [f64; 6]) -> Result<Self> {
        if diag.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FilterError::InvalidNoise(format!(
                "process noise diagonal must be finite and >= 0, got {diag:?}"
            )));
        }
        Ok(Self(Matrix6::from_diagonal(&Vector6::from_column_slice(
            &diag,
        ))))
    }

    /// `diag(0.01, ..., 0.01)` per prediction step.
    pub fn standard() -> Self {
        Self::from_diagonal([0.01; 6]).expect("valid")
    }

    pub fn zero() -> Self {
        Self(Matrix6::zeros())
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self::standard()
    }
}

/// Odometry motion between two consecutive frames: `dp` in the world frame,
/// `dr` left-multiplies the previous orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoIncrement {
    pub dp: Vector3<f64>,
    pub dr: RotationMatrix,
}

impl VoIncrement {
    pub fn identity() -> Self {
        Self {
            dp: Vector3::zeros(),
            dr: RotationMatrix::identity(),
        }
    }

    /// Increment taking pose `from` to pose `to`.
    pub fn between(from: &Pose6D, to: &Pose6D) -> Result<Self> {
        let dr = to.rotation()?.compose(&from.rotation()?.transpose());
        Ok(Self {
            dp: to.position() - from.position(),
            dr,
        })
    }
}

/// Observation matrix selecting `[x, y, z, psi, theta]`.
pub fn observation_matrix() -> Matrix5x6<f64> {
    let mut h = Matrix5x6::zeros();
    for i in 0..5 {
        h[(i, i)] = 1.0;
    }
    h
}

pub fn predict(s: &FilterState, inc: &VoIncrement, q: &ProcessNoise) -> Result<FilterState> {
    let pose = compose_increment(&s.pose, &inc.dp, &inc.dr)?;
    Ok(FilterState {
        pose,
        p: s.p + q.0,
    })
}

/// `z - H X` with heading and tilt residuals wrapped into (-180, 180].
pub fn innovation(s: &FilterState, z: &FusedMeasurement) -> Vector5<f64> {
    let mut y = z.to_vector() - observation_matrix() * s.x();
    y[3] = wrap_angle(y[3]);
    y[4] = wrap_angle(y[4]);
    y
}

fn condition_number(s: &Matrix5<f64>) -> f64 {
    let eig = SymmetricEigen::new(*s).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn correct(s: &FilterState, z: &FusedMeasurement) -> Result<FilterState> {
    let h = observation_matrix();
    let y = innovation(s, z);
    let mut innov_cov = z.m + h * s.p * h.transpose();
    innov_cov = (innov_cov + innov_cov.transpose()) * 0.5;
    let cond = condition_number(&innov_cov);
    if !(cond <= MAX_CONDITION_NUMBER) {
        return Err(FilterError::IllConditioned { cond });
    }
    let chol = innov_cov
        .cholesky()
        .ok_or(FilterError::IllConditioned { cond })?;
    // K^T = S^-1 H P, as both S and P are symmetric
    let gain = chol.solve(&(h * s.p)).transpose();

    let mut x = s.x() + gain * y;
    x[3] = wrap_angle(x[3]);
    x[4] = wrap_angle(x[4]);
    x[5] = wrap_angle(x[5]);
    let p = (Matrix6::identity() - gain * h) * s.p;
    Ok(FilterState {
        pose: Pose6D::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]),
        p: (p + p.transpose()) * 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedIncrement {
    pub t: f64,
    pub increment: VoIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedMeasurement {
    pub t: f64,
    pub measurement: FusedMeasurement,
}

/// Runs the filter over an odometry stream, applying each correction right
/// after the last prediction at or before its timestamp. Returns one state
/// per increment.
pub fn run_filter(
    init: FilterState,
    t0: f64,
    increments: &[TimedIncrement],
    corrections: &[TimedMeasurement],
    q: &ProcessNoise,
) -> Result<Vec<FilterState>> {
    let mut previous = t0;
    for inc in increments {
        if !(inc.t > previous) {
            return Err(FilterError::Sequencing {
                t: inc.t,
                previous,
            });
        }
        previous = inc.t;
    }
    let mut previous = t0;
    for c in corrections {
        if !(c.t > previous) {
            return Err(FilterError::Sequencing { t: c.t, previous });
        }
        previous = c.t;
    }

    let mut out = Vec::with_capacity(increments.len());
    let mut state = init;
    let mut pending = corrections.iter().peekable();
    for inc in increments {
        state = predict(&state, &inc.increment, q)?;
        while let Some(c) = pending.next_if(|c| c.t <= inc.t) {
            state = correct(&state, &c.measurement)?;
        }
        out.push(state);
    }
    let unused = pending.count();
    if unused > 0 {
        return Err(FilterError::UnusedCorrections(unused));
    }
    Ok(out)
}
