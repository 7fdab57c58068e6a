//! Training losses of the scene and camera localization networks, written as
//! plain scalar functions with analytic gradients.
//!
//! Nothing here is tied to a network: the functions take feature vectors,
//! distances and logits directly, which makes them usable for gradient
//! checks and for synthetic demos.

pub mod selftest;

use thiserror::Error;

use crate::geometry::{wrap_angle, CellIndex, NUM_CELLS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected {expected} logits, got {actual}")]
    LogitCount { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("feature distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("margin must be non-negative, got {0}")]
    NegativeMargin(f64),
    #[error("loss weight `{name}` must be non-negative, got {value}")]
    NegativeWeight { name: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, LossError>;

/// Default feature-distance margin of the contrastive loss.
pub const DEFAULT_MARGIN: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFinite("feature vector"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Euclidean distance between two embeddings.
pub fn feature_distance(u: &FeatureVector, v: &FeatureVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(LossError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(u.0
        .iter()
        .zip(&v.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Whether a UAV/satellite pair depicts the same scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    NonMatching,
    Matching,
}

impl PairLabel {
    pub fn indicator(self) -> f64 {
        match self {
            PairLabel::NonMatching => 0.0,
            PairLabel::Matching => 1.0,
        }
    }
}

fn check_distance(d: f64, margin: f64) -> Result<()> {
    if !d.is_finite() {
        return Err(LossError::NonFinite("distance"));
    }
    if !margin.is_finite() {
        return Err(LossError::NonFinite("margin"));
    }
    if d < 0.0 {
        return Err(LossError::NegativeDistance(d));
    }
    if margin < 0.0 {
        return Err(LossError::NegativeMargin(margin));
    }
    Ok(())
}

/// `l * d^2 + (1 - l) * max(0, m - d)^2`.
pub fn contrastive_loss(d: f64, label: PairLabel, margin: f64) -> Result<f64> {
    check_distance(d, margin)?;
    let l = label.indicator();
    let hinge = (margin - d).max(0.0);
    Ok(l * d * d + (1.0 - l) * hinge * hinge)
}

/// Derivative of [`contrastive_loss`] with respect to `d`. The kink at
/// `d == margin` takes the zero subgradient.
pub fn contrastive_loss_grad(d: f64, label: PairLabel, margin: f64) -> Result<f64> {
    check_distance(d, margin)?;
    Ok(match label {
        PairLabel::Matching => 2.0 * d,
        PairLabel::NonMatching if d < margin => -2.0 * (margin - d),
        PairLabel::NonMatching => 0.0,
    })
}

/// Raw scores of the 64 horizontal position cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLogits([f64; NUM_CELLS]);

impl CellLogits {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.len() != NUM_CELLS {
            return Err(LossError::LogitCount {
                expected: NUM_CELLS,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFinite("logits"));
        }
        let mut out = [0.0; NUM_CELLS];
        out.copy_from_slice(values);
        Ok(Self(out))
    }

    pub fn zeros() -> Self {
        Self([0.0; NUM_CELLS])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cell with the largest score (lowest id on ties).
    pub fn argmax(&self) -> CellIndex {
        let mut best = 0;
        for (i, v) in self.0.iter().enumerate() {
            if *v > self.0[best] {
                best = i;
            }
        }
        CellIndex::new(best as u32).expect("index below NUM_CELLS")
    }

    pub fn softmax(&self) -> [f64; NUM_CELLS] {
        let max = self.max();
        let mut p = [0.0; NUM_CELLS];
        let mut sum = 0.0;
        for (pi, v) in p.iter_mut().zip(&self.0) {
            *pi = (v - max).exp();
            sum += *pi;
        }
        p.iter_mut().for_each(|pi| *pi /= sum);
        p
    }

    fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn log_sum_exp(&self) -> f64 {
        let max = self.max();
        max + self.0.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }
}

/// Softmax cross-entropy of the target cell.
pub fn cell_cross_entropy(logits: &CellLogits, target: CellIndex) -> f64 {
    // ln(sum exp) - c[target]; the max shift keeps exp in range
    (logits.log_sum_exp() - logits.0[target.id()]).max(0.0)
}

/// `softmax(logits) - onehot(target)`.
pub fn cell_cross_entropy_grad(logits: &CellLogits, target: CellIndex) -> [f64; NUM_CELLS] {
    let mut g = logits.softmax();
    g[target.id()] -= 1.0;
    g
}

/// Weights of the combined camera localization loss plus the scene margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraLossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub margin: f64,
}

impl Default for CameraLossWeights {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            beta: 1.0,
            gamma: 0.5,
            margin: DEFAULT_MARGIN,
        }
    }
}

impl CameraLossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("margin", self.margin),
        ] {
            if !value.is_finite() {
                return Err(LossError::NonFinite(name));
            }
            if value < 0.0 {
                return Err(LossError::NegativeWeight { name, value });
            }
        }
        Ok(())
    }
}

/// Regressed part of a camera pose: altitude (m), heading and tilt (deg).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraRegression {
    pub z: f64,
    pub psi: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraLoss {
    pub xy: f64,
    pub z: f64,
    pub psi: f64,
    pub theta: f64,
    pub total: f64,
}

/// `alpha * L_xy + L_z + beta * L_psi + gamma * L_theta`.
///
/// The heading residual is wrapped, so 179 vs -179 costs 2 degrees.
pub fn camera_loss(
    logits: &CellLogits,
    target_cell: CellIndex,
    estimate: &CameraRegression,
    target: &CameraRegression,
    weights: &CameraLossWeights,
) -> Result<CameraLoss> {
    weights.validate()?;
    let finite = [
        estimate.z,
        estimate.psi,
        estimate.theta,
        target.z,
        target.psi,
        target.theta,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(LossError::NonFinite("camera regression"));
    }
    let xy = cell_cross_entropy(logits, target_cell);
    let z = (target.z - estimate.z).abs();
    let psi = wrap_angle(target.psi - estimate.psi).abs();
    let theta = (target.theta - estimate.theta).abs();
    let total = weights.alpha * xy + z + weights.beta * psi + weights.gamma * theta;
    Ok(CameraLoss {
        xy,
        z,
        psi,
        theta,
        total,
    })
}
