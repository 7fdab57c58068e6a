use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crossview::lossmath::selftest;
use crossview::sim::{
    load_trajectory, rmse, run_experiment, run_experiment_recorded, save_trajectory,
    simulate_flight, ExperimentConfig,
};
use crossview::tiledb::{generate_grid, GridBounds, TileSet, DEFAULT_SPACING};

#[derive(Parser)]
#[command(name = "crossview", version, about = "Cross-view UAV geolocalization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a regular tile lattice.
    GenTiles {
        #[arg(long, num_args = 4, value_names = ["XMIN", "XMAX", "YMIN", "YMAX"], allow_negative_numbers = true)]
        bounds: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_SPACING)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a ground-truth flight with simulated odometry increments.
    #[command(after_long_help = config_help())]
    Simulate {
        /// `key = value` config file; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the four pipelines and write trajectories and summary.csv.
    #[command(after_long_help = config_help())]
    Run {
        /// `key = value` config file; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Tile file; a lattice covering the flight is generated when omitted.
        #[arg(long)]
        tiles: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the match records of every corrected pipeline.
        #[arg(long)]
        record: bool,
    },
    /// Print position RMSE (m, % of length), heading RMSE and tilt RMSE.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Loss function utilities.
    Losses {
        /// Compare analytic gradients with finite differences.
        #[arg(long)]
        self_test: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_help() -> String {
    let mut s = String::from("Config keys and defaults:\n");
    s.push_str(&ExperimentConfig::default().to_text());
    s
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenTiles {
            bounds,
            spacing,
            out,
        } => {
            let b = GridBounds::new(bounds[0], bounds[1], bounds[2], bounds[3], spacing)?;
            let tiles = generate_grid(b)?;
            tiles.save(&out)?;
            println!("{} tiles written to {}", tiles.len(), out.display());
        }
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let frames = simulate_flight(&cfg, seed)?;
            save_trajectory(&frames, &out)?;
            println!("{} frames written to {}", frames.len(), out.display());
        }
        Command::Run {
            config,
            tiles,
            seed,
            out,
            record,
        } => {
            let cfg = load_config(config.as_deref())?;
            let tiles = match tiles {
                Some(p) => TileSet::load(&p).with_context(|| format!("reading tiles {}", p.display()))?,
                None => generate_grid(cfg.trajectory.tile_bounds(DEFAULT_SPACING, 100.0)?)?,
            };
            let result = if record {
                let (result, logs) = run_experiment_recorded(&cfg, &tiles, seed)?;
                std::fs::create_dir_all(&out)?;
                for (method, text) in &logs.logs {
                    std::fs::write(out.join(format!("{}.match", method.name())), text)?;
                }
                result
            } else {
                run_experiment(&cfg, &tiles, seed)?
            };
            result.write(&out)?;
            print!("{}", result.summary_csv());
        }
        Command::Eval { est, truth } => {
            let e = load_trajectory(&est).with_context(|| format!("reading {}", est.display()))?;
            let t = load_trajectory(&truth).with_context(|| format!("reading {}", truth.display()))?;
            let est_poses: Vec<_> = e.iter().map(|f| f.truth).collect();
            let truth_poses: Vec<_> = t.iter().map(|f| f.truth).collect();
            let r = rmse(&est_poses, &truth_poses)?;
            println!("pos_rmse_m {}", r.pos_rmse_m);
            println!("pos_pct {}", r.pos_pct);
            println!("psi_rmse_deg {}", r.psi_rmse_deg);
            println!("theta_rmse_deg {}", r.theta_rmse_deg);
        }
        Command::Losses { self_test, seed } => {
            if !self_test {
                bail!("nothing to do; pass --self-test");
            }
            let checks = selftest::run(seed);
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {}: {} points ({} near kinks skipped), max relative error {:.3e}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.points,
                    c.skipped,
                    c.max_rel_error
                );
                ok &= c.passed();
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
