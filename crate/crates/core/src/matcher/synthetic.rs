use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{MatchBackend, MatchResult, MatcherNoiseModel, Result, UavObservation, D_MIN};
use crate::geometry::{ground_intersection, wrap_angle};
use crate::seeds::{self, TAG_DISTANCE, TAG_MATCH_FRAME, TAG_MATCH_PAIR};
use crate::tiledb::TileRecord;

const TILT_RANGE: (f64, f64) = (0.0, 45.0);

/// Synthetic feature distance: `d0 + d_slope * offset + jitter`, where
/// `offset` is the distance from the tile centre to the true scene centre.
pub fn distance_model(
    obs: &UavObservation,
    tile: &TileRecord,
    noise: &MatcherNoiseModel,
    seed: u64,
) -> Result<f64> {
    let (sx, sy) = ground_intersection(obs.truth())?;
    let offset = tile.distance_to(sx, sy);
    let mut rng = seeds::rng(seed, &[TAG_DISTANCE, obs.frame(), tile.tile_id as u64]);
    let z: f64 = rng.sample(StandardNormal);
    let jitter = noise.d_jitter * z.abs();
    Ok((noise.d0 + noise.d_slope * offset + jitter).max(D_MIN))
}

fn normals<R: Rng>(rng: &mut R) -> [f64; 5] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

/// Oracle camera localization: truth perturbed by the noise model.
pub fn synthetic_match(
    obs: &UavObservation,
    tile: &TileRecord,
    noise: &MatcherNoiseModel,
    seed: u64,
) -> Result<MatchResult> {
    let d = distance_model(obs, tile, noise, seed)?;

    let common = normals(&mut seeds::rng(seed, &[TAG_MATCH_FRAME, obs.frame()]));
    let mut pair_rng = seeds::rng(seed, &[TAG_MATCH_PAIR, obs.frame(), tile.tile_id as u64]);
    let own = normals(&mut pair_rng);
    let outlier = pair_rng.random::<f64>() < noise.outlier_prob;

    let rho = noise.frame_correlation;
    let (wc, wo) = (rho.sqrt(), (1.0 - rho).sqrt());
    let gain = if outlier { noise.outlier_factor } else { 1.0 };
    let n: [f64; 5] = std::array::from_fn(|i| gain * (wc * common[i] + wo * own[i]));

    let t = obs.truth();
    Ok(MatchResult {
        tile_id: tile.tile_id,
        d,
        p_hat: Vector3::new(
            t.x + noise.sigma_xy * n[0],
            t.y + noise.sigma_xy * n[1],
            t.z + noise.sigma_z * n[2],
        ),
        psi_hat: wrap_angle(t.psi + noise.sigma_psi * n[3]),
        theta_hat: (t.theta + noise.sigma_theta * n[4]).clamp(TILT_RANGE.0, TILT_RANGE.1),
    })
}

/// Pose reported by the scene-only pipeline, which has no camera network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePriors {
    /// Altitude assumed for the camera: midpoint of the 100-200 m band.
    pub altitude: f64,
    pub psi: f64,
    pub theta: f64,
}

impl Default for ScenePriors {
    fn default() -> Self {
        Self {
            altitude: 150.0,
            psi: 0.0,
            theta: 0.0,
        }
    }
}

/// Scene-only localization: the camera is assumed to sit over the tile.
pub fn scene_match(
    obs: &UavObservation,
    tile: &TileRecord,
    noise: &MatcherNoiseModel,
    priors: &ScenePriors,
    seed: u64,
) -> Result<MatchResult> {
    Ok(MatchResult {
        tile_id: tile.tile_id,
        d: distance_model(obs, tile, noise, seed)?,
        p_hat: Vector3::new(tile.x, tile.y, priors.altitude),
        psi_hat: wrap_angle(priors.psi),
        theta_hat: priors.theta,
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    noise: MatcherNoiseModel,
    seed: u64,
}

impl SyntheticBackend {
    pub fn new(noise: MatcherNoiseModel, seed: u64) -> Result<Self> {
        noise.validate()?;
        Ok(Self { noise, seed })
    }

    pub fn noise(&self) -> &MatcherNoiseModel {
        &self.noise
    }
}

impl MatchBackend for SyntheticBackend {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult> {
        synthetic_match(obs, tile, &self.noise, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct SceneBackend {
    noise: MatcherNoiseModel,
    priors: ScenePriors,
    seed: u64,
}

impl SceneBackend {
    pub fn new(noise: MatcherNoiseModel, priors: ScenePriors, seed: u64) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            noise,
            priors,
            seed,
        })
    }
}

impl MatchBackend for SceneBackend {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult> {
        scene_match(obs, tile, &self.noise, &self.priors, self.seed)
    }
}
