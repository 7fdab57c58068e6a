//! End-to-end runs of the four localization pipelines.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix6;

use super::config::{BackendConfig, BackendKind, ExperimentConfig, FilterConfig};
use super::io::save_trajectory;
use super::metrics::{rmse, RmseSummary};
use super::trajectory::{gen_trajectory, path_length, TrajectoryFrame};
use super::vo::simulate_vo;
use super::{Result, SimError};
use crate::estimator::{correct, predict, FilterState, ProcessNoise, VoIncrement};
use crate::fusion::{fuse, Component, FusionConfig};
use crate::geometry::{ground_intersection, Pose6D};
use crate::matcher::{
    MatchBackend, MatcherNoiseModel, Recorder, ReplayBackend, SceneBackend, SyntheticBackend,
    UavObservation,
};
use crate::tiledb::{TileSet, DEFAULT_SPACING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Vo,
    VoScene,
    VoRegression,
    VoHybrid,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Vo,
        Method::VoScene,
        Method::VoRegression,
        Method::VoHybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vo => "vo",
            Method::VoScene => "vo_scene",
            Method::VoRegression => "vo_regression",
            Method::VoHybrid => "vo_hybrid",
        }
    }
}

/// How fused measurements feed the filter.
pub struct Corrector<'a> {
    pub backend: &'a dyn MatchBackend,
    pub fusion: FusionConfig,
    /// Only the horizontal position is observed; altitude and orientation
    /// are marked uninformative.
    pub horizontal_only: bool,
}

impl FilterConfig {
    pub fn process_noise(&self) -> Result<ProcessNoise> {
        let (p, a) = (self.q_position, self.q_angle);
        Ok(ProcessNoise::from_diagonal([p, p, p, a, a, a])?)
    }

    pub fn initial_covariance(&self) -> Matrix6<f64> {
        let (p, a) = (self.p0_position, self.p0_angle);
        Matrix6::from_diagonal(&nalgebra::Vector6::new(p, p, p, a, a, a))
    }
}

/// Point around which candidate tiles are retrieved: the image centre of the
/// predicted pose (tilt clamped to the flight envelope), or the predicted
/// position when the optical axis does not reach the ground.
pub fn candidate_query(pose: &Pose6D, tilt_range: (f64, f64)) -> (f64, f64) {
    let mut p = *pose;
    p.theta = p.theta.clamp(tilt_range.0, tilt_range.1);
    ground_intersection(&p).unwrap_or((pose.x, pose.y))
}

/// Filter states for every frame. The filter starts at the first true pose,
/// predicts with every odometry increment and, with a corrector, fuses the
/// candidate matches every `correction_interval` frames.
pub fn run_pipeline(
    truth: &[TrajectoryFrame],
    vo: &[VoIncrement],
    tiles: &TileSet,
    filter: &FilterConfig,
    tilt_range: (f64, f64),
    corrector: Option<&Corrector<'_>>,
) -> Result<Vec<FilterState>> {
    if truth.len() != vo.len() {
        return Err(SimError::LengthMismatch {
            est: vo.len(),
            truth: truth.len(),
        });
    }
    let Some(first) = truth.first() else {
        return Ok(Vec::new());
    };
    let q = filter.process_noise()?;
    let mut state = FilterState::new(first.truth, filter.initial_covariance());
    let mut states = Vec::with_capacity(truth.len());
    states.push(state);
    for (i, (frame, inc)) in truth.iter().zip(vo).enumerate().skip(1) {
        state = predict(&state, inc, &q)?;
        if let Some(c) = corrector {
            if i % filter.correction_interval == 0 {
                let (qx, qy) = candidate_query(&state.pose, tilt_range);
                let candidates = tiles.k_nearest(qx, qy, filter.candidates)?;
                let obs = UavObservation::new(i as u64, frame.truth);
                let results = c.backend.match_candidates(&obs, &candidates)?;
                let mut z = fuse(&results, &c.fusion)?;
                if c.horizontal_only {
                    for comp in [Component::Z, Component::Psi, Component::Theta] {
                        z.mark_uninformative(comp);
                    }
                }
                state = correct(&state, &z)?;
            }
        }
        states.push(state);
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    pub states: Vec<FilterState>,
    pub rmse: RmseSummary,
}

impl MethodRun {
    pub fn poses(&self) -> impl Iterator<Item = Pose6D> + '_ {
        self.states.iter().map(|s| s.pose)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub seed: u64,
    pub truth: Vec<TrajectoryFrame>,
    pub vo: Vec<VoIncrement>,
    /// True 3D path length, m.
    pub path_length: f64,
    /// One entry per method, in [`Method::ALL`] order.
    pub runs: Vec<MethodRun>,
}

impl ExperimentResult {
    pub fn run(&self, m: Method) -> &MethodRun {
        self.runs
            .iter()
            .find(|r| r.method == m)
            .expect("every method is run")
    }

    /// Estimated trajectory of `m` with the odometry increments it consumed.
    pub fn frames(&self, m: Method) -> Vec<TrajectoryFrame> {
        self.truth
            .iter()
            .zip(self.run(m).poses())
            .zip(&self.vo)
            .map(|((f, pose), inc)| TrajectoryFrame {
                t: f.t,
                truth: pose,
                vo_increment: *inc,
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,pos_rmse_m,pos_pct,psi_rmse_deg,theta_rmse_deg\n");
        for r in &self.runs {
            let s = r.rmse;
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.method.name(),
                s.pos_rmse_m,
                s.pos_pct,
                s.psi_rmse_deg,
                s.theta_rmse_deg
            );
        }
        out
    }

    /// True poses with the simulated odometry increments.
    pub fn truth_with_vo(&self) -> Vec<TrajectoryFrame> {
        with_increments(&self.truth, &self.vo)
    }

    /// Writes `truth.txt`, one trajectory file per method and `summary.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        save_trajectory(&self.truth_with_vo(), dir.join("truth.txt"))?;
        for m in Method::ALL {
            save_trajectory(&self.frames(m), dir.join(format!("{}.txt", m.name())))?;
        }
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}

fn with_increments(frames: &[TrajectoryFrame], vo: &[VoIncrement]) -> Vec<TrajectoryFrame> {
    frames
        .iter()
        .zip(vo)
        .map(|(f, inc)| TrajectoryFrame {
            vo_increment: *inc,
            ..*f
        })
        .collect()
}

/// Ground truth of a seeded flight carrying the simulated odometry
/// increments instead of the true ones.
pub fn simulate_flight(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<TrajectoryFrame>> {
    cfg.validate()?;
    let truth = gen_trajectory(&cfg.trajectory, seed)?;
    let vo = simulate_vo(&truth, &cfg.drift, seed)?;
    Ok(with_increments(&truth, &vo))
}

fn build_backend(
    b: &BackendConfig,
    noise: MatcherNoiseModel,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Box<dyn MatchBackend>> {
    Ok(match b.kind {
        BackendKind::Synthetic => Box::new(SyntheticBackend::new(noise, seed)?),
        BackendKind::Scene => Box::new(SceneBackend::new(noise, cfg.scene, seed)?),
        BackendKind::Replay => {
            let path = b
                .replay_file
                .as_ref()
                .ok_or_else(|| SimError::Config("replay backend without a file".into()))?;
            Box::new(ReplayBackend::load(path)?)
        }
    })
}

/// Match records of the corrected pipelines, in the replay file format.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct MatchLogs {
    pub logs: Vec<(Method, String)>,
}

/// Runs all four pipelines on the same truth, odometry and seed.
pub fn run_experiment(cfg: &ExperimentConfig, tiles: &TileSet, seed: u64) -> Result<ExperimentResult> {
    run_inner(cfg, tiles, seed, None)
}

/// As [`run_experiment`], also returning the match records of every
/// corrected pipeline in the replay file format.
pub fn run_experiment_recorded(
    cfg: &ExperimentConfig,
    tiles: &TileSet,
    seed: u64,
) -> Result<(ExperimentResult, MatchLogs)> {
    let mut logs = MatchLogs::default();
    let result = run_inner(cfg, tiles, seed, Some(&mut logs))?;
    Ok((result, logs))
}

fn run_inner(
    cfg: &ExperimentConfig,
    tiles: &TileSet,
    seed: u64,
    mut logs: Option<&mut MatchLogs>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let truth = gen_trajectory(&cfg.trajectory, seed)?;
    let vo = simulate_vo(&truth, &cfg.drift, seed)?;
    let truth_poses: Vec<Pose6D> = truth.iter().map(|f| f.truth).collect();
    let tilt_range = (cfg.trajectory.tilt_min, cfg.trajectory.tilt_max);

    let hybrid = cfg.noise_model(&cfg.hybrid);
    let regression = cfg.noise_model(&cfg.regression);
    // scene matches only use the distance model
    let scene_noise = cfg.noise_model(&MatcherNoiseModel::noiseless());
    let scene_var = DEFAULT_SPACING * DEFAULT_SPACING;
    let scene_fusion = FusionConfig {
        epsilon: cfg.fusion_epsilon,
        prior_variances: [scene_var, scene_var, 1.0, 1.0, 1.0],
    };

    let mut runs = Vec::with_capacity(4);
    for method in Method::ALL {
        let setup = match method {
            Method::Vo => None,
            Method::VoScene => Some((&cfg.scene_backend, scene_noise, scene_fusion, true)),
            Method::VoRegression => Some((
                &cfg.regression_backend,
                regression,
                cfg.fusion_for(&regression),
                false,
            )),
            Method::VoHybrid => Some((&cfg.hybrid_backend, hybrid, cfg.fusion_for(&hybrid), false)),
        };
        let states = match setup {
            None => run_pipeline(&truth, &vo, tiles, &cfg.filter, tilt_range, None)?,
            Some((b, noise, fusion, horizontal_only)) => {
                let recorder = Recorder::new(build_backend(b, noise, cfg, seed)?);
                let corrector = Corrector {
                    backend: &recorder,
                    fusion,
                    horizontal_only,
                };
                let states =
                    run_pipeline(&truth, &vo, tiles, &cfg.filter, tilt_range, Some(&corrector))?;
                if let Some(l) = logs.as_deref_mut() {
                    l.logs.push((method, recorder.to_text()));
                }
                states
            }
        };
        let est: Vec<Pose6D> = states.iter().map(|s| s.pose).collect();
        runs.push(MethodRun {
            method,
            rmse: rmse(&est, &truth_poses)?,
            states,
        });
    }
    Ok(ExperimentResult {
        seed,
        path_length: path_length(truth_poses.iter().copied()),
        truth,
        vo,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiledb::generate_grid;

    fn tiles(cfg: &ExperimentConfig) -> TileSet {
        generate_grid(cfg.trajectory.tile_bounds(DEFAULT_SPACING, 100.0).unwrap()).unwrap()
    }

    #[test]
    fn vo_pipeline_is_dead_reckoning() {
        let cfg = ExperimentConfig::default();
        let r = run_experiment(&cfg, &tiles(&cfg), 1).unwrap();
        let dr = super::super::vo::dead_reckon(r.truth[0].truth, &r.vo).unwrap();
        for (s, p) in r.run(Method::Vo).states.iter().zip(&dr) {
            assert_eq!(s.pose, *p);
        }
        let traces: Vec<f64> = r.run(Method::Vo).states.iter().map(|s| s.p.trace()).collect();
        assert!(traces.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn all_trajectories_have_equal_length() {
        let cfg = ExperimentConfig::default();
        let r = run_experiment(&cfg, &tiles(&cfg), 2).unwrap();
        for m in Method::ALL {
            assert_eq!(r.run(m).states.len(), r.truth.len());
        }
        assert_eq!(r.summary_csv().lines().count(), 5);
    }

    #[test]
    fn recorded_matches_replay_identically() {
        let cfg = ExperimentConfig::default();
        let t = tiles(&cfg);
        let (r, logs) = run_experiment_recorded(&cfg, &t, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut replay = cfg.clone();
        for (m, text) in &logs.logs {
            let path = dir.path().join(format!("{}.match", m.name()));
            std::fs::write(&path, text).unwrap();
            let b = BackendConfig {
                kind: BackendKind::Replay,
                replay_file: Some(path),
            };
            match m {
                Method::VoScene => replay.scene_backend = b,
                Method::VoRegression => replay.regression_backend = b,
                Method::VoHybrid => replay.hybrid_backend = b,
                Method::Vo => unreachable!(),
            }
        }
        let again = run_experiment(&replay, &t, 3).unwrap();
        assert_eq!(again.summary_csv(), r.summary_csv());
    }
}
