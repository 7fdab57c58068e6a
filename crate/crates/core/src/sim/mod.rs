//! Simulated flights and end-to-end evaluation of the localization
//! pipelines.

pub mod config;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod trajectory;
pub mod vo;

use thiserror::Error;

use crate::estimator::FilterError;
use crate::fusion::FusionError;
use crate::geometry::GeometryError;
use crate::matcher::MatchError;
use crate::tiledb::TileError;

pub use config::{BackendConfig, BackendKind, ExperimentConfig, FilterConfig};
pub use experiment::{
    run_experiment, run_experiment_recorded, simulate_flight, ExperimentResult, MatchLogs, Method,
    MethodRun,
};
pub use io::{load_trajectory, parse_trajectory, save_trajectory, trajectory_to_text};
pub use metrics::{rmse, RmseSummary};
pub use trajectory::{gen_trajectory, path_length, TrajectoryConfig, TrajectoryFrame};
pub use vo::{dead_reckon, simulate_vo, VoDriftModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trajectory length mismatch: estimate has {est} frames, truth {truth}")]
    LengthMismatch { est: usize, truth: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Tile(#[from] TileError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
