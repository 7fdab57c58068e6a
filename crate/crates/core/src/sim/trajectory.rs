//! Ground-truth flight generation.
//!
//! The horizontal path is one lap of a racetrack (straight, half turn,
//! straight, half turn) flown at constant 3D speed, starting on a straight
//! leg. After the initial pure-translation leg, altitude and tilt follow
//! seeded piecewise constant-rate schedules within their bounds.

use std::f64::consts::PI;

use rand::Rng;

use super::{Result, SimError};
use crate::estimator::VoIncrement;
use crate::geometry::{wrap_angle, Pose6D};
use crate::seeds::{self, TAG_TRAJECTORY};
use crate::tiledb::GridBounds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub length_m: f64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub speed_mps: f64,
    pub altitude_min: f64,
    pub altitude_max: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
    /// Tilt schedule targets are drawn below this value.
    pub tilt_target_max: f64,
    pub initial_straight_m: f64,
    pub turn_radius_m: f64,
    pub max_climb_rate: f64,
    pub max_tilt_rate: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            length_m: 2500.0,
            duration_s: 200.0,
            rate_hz: 20.0,
            speed_mps: 12.5,
            altitude_min: 100.0,
            altitude_max: 200.0,
            tilt_min: 0.0,
            tilt_max: 45.0,
            tilt_target_max: 20.0,
            initial_straight_m: 100.0,
            turn_radius_m: 150.0,
            max_climb_rate: 1.5,
            max_tilt_rate: 2.0,
        }
    }
}

/// One ground-truth frame. `vo_increment` is the motion from the previous
/// frame (identity for the first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFrame {
    pub t: f64,
    pub truth: Pose6D,
    pub vo_increment: VoIncrement,
}

fn config_error(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

impl TrajectoryConfig {
    /// Number of frames, `duration * rate`.
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    fn straight_length(&self) -> f64 {
        (self.length_m - 2.0 * PI * self.turn_radius_m) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.length_m,
            self.duration_s,
            self.rate_hz,
            self.speed_mps,
            self.altitude_min,
            self.altitude_max,
            self.tilt_min,
            self.tilt_max,
            self.tilt_target_max,
            self.initial_straight_m,
            self.turn_radius_m,
            self.max_climb_rate,
            self.max_tilt_rate,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(config_error("trajectory parameters must be finite"));
        }
        if self.length_m <= 0.0 || self.duration_s <= 0.0 || self.rate_hz <= 0.0 {
            return Err(config_error("length, duration and rate must be positive"));
        }
        let flown = self.speed_mps * self.duration_s;
        if (flown - self.length_m).abs() > 0.02 * self.length_m {
            return Err(config_error(format!(
                "speed * duration = {flown} m does not match length {} m",
                self.length_m
            )));
        }
        let frames = self.duration_s * self.rate_hz;
        if (frames - frames.round()).abs() > 1e-6 || frames.round() < 2.0 {
            return Err(config_error(format!(
                "duration * rate must be a whole number of frames >= 2, got {frames}"
            )));
        }
        if !(self.altitude_min > 0.0 && self.altitude_min < self.altitude_max) {
            return Err(config_error("need 0 < altitude_min < altitude_max"));
        }
        if !(self.tilt_min >= 0.0 && self.tilt_min <= self.tilt_max && self.tilt_max < 90.0) {
            return Err(config_error("need 0 <= tilt_min <= tilt_max < 90"));
        }
        if !(self.tilt_min..=self.tilt_max).contains(&self.tilt_target_max) {
            return Err(config_error("tilt_target_max must lie in [tilt_min, tilt_max]"));
        }
        if self.turn_radius_m <= 0.0 {
            return Err(config_error("turn radius must be positive"));
        }
        if self.straight_length() < self.initial_straight_m {
            return Err(config_error(format!(
                "racetrack straight of {:.1} m is shorter than the initial straight {} m",
                self.straight_length(),
                self.initial_straight_m
            )));
        }
        if self.max_climb_rate < 0.0 || self.max_climb_rate >= self.speed_mps {
            return Err(config_error("climb rate must lie in [0, speed)"));
        }
        if self.max_tilt_rate < 0.0 {
            return Err(config_error("tilt rate must be >= 0"));
        }
        Ok(())
    }

    /// Horizontal position and compass heading at arc length `s`.
    fn racetrack(&self, s: f64) -> (f64, f64, f64) {
        let straight = self.straight_length();
        let r = self.turn_radius_m;
        let half = PI * r;
        let s = s.rem_euclid(2.0 * (straight + half));
        if s < straight {
            (s, 0.0, 90.0)
        } else if s < straight + half {
            let a = (s - straight) / r;
            (straight + r * a.sin(), r - r * a.cos(), 90.0 - a.to_degrees())
        } else if s < 2.0 * straight + half {
            (straight - (s - straight - half), 2.0 * r, -90.0)
        } else {
            let a = (s - 2.0 * straight - half) / r;
            (-r * a.sin(), r + r * a.cos(), wrap_angle(-90.0 - a.to_degrees()))
        }
    }

    /// Lattice bounds covering the track plus the farthest possible image
    /// centre, with `margin` extra on every side.
    pub fn tile_bounds(&self, spacing: f64, margin: f64) -> Result<GridBounds> {
        let reach = self.altitude_max * self.tilt_max.to_radians().tan() + margin;
        let r = self.turn_radius_m;
        let snap_down = |v: f64| (v / spacing).floor() * spacing;
        let snap_up = |v: f64| (v / spacing).ceil() * spacing;
        GridBounds::new(
            snap_down(-r - reach),
            snap_up(self.straight_length() + r + reach),
            snap_down(-reach),
            snap_up(2.0 * r + reach),
            spacing,
        )
        .map_err(SimError::from)
    }
}

/// Piecewise constant-rate schedule: `(start time, rate)` segments.
struct Schedule(Vec<(f64, f64)>);

impl Schedule {
    fn rate_at(&self, t: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .find(|(start, _)| t >= *start)
            .map_or(0.0, |(_, r)| *r)
    }
}

fn climb_schedule<R: Rng>(rng: &mut R, cfg: &TrajectoryConfig, start: f64) -> Schedule {
    let mut segs = vec![(0.0, 0.0)];
    let mut t = start;
    while t < cfg.duration_s {
        let rate = rng.random_range(-1.0..=1.0) * cfg.max_climb_rate;
        segs.push((t, rate));
        t += rng.random_range(10.0..30.0);
    }
    Schedule(segs)
}

/// Tilt targets with hold times; the tilt moves toward each target at a
/// bounded rate.
fn tilt_targets<R: Rng>(rng: &mut R, cfg: &TrajectoryConfig, start: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let mut t = start;
    while t < cfg.duration_s {
        let target = rng.random_range(cfg.tilt_min..=cfg.tilt_target_max);
        let rate = cfg.max_tilt_rate * rng.random_range(0.3..=1.0);
        out.push((t, target, rate));
        t += rng.random_range(8.0..25.0);
    }
    out
}

/// Seeded ground-truth trajectory.
pub fn gen_trajectory(cfg: &TrajectoryConfig, seed: u64) -> Result<Vec<TrajectoryFrame>> {
    cfg.validate()?;
    let mut rng = seeds::rng(seed, &[TAG_TRAJECTORY]);
    let n = cfg.frame_count();
    let dt = cfg.dt();
    let span = cfg.altitude_max - cfg.altitude_min;
    let mut z = rng.random_range(cfg.altitude_min + 0.3 * span..=cfg.altitude_max - 0.3 * span);
    let mut theta = rng.random_range(cfg.tilt_min..=cfg.tilt_target_max);

    let straight_end = cfg.initial_straight_m / cfg.speed_mps;
    let climbs = climb_schedule(&mut rng, cfg, straight_end);
    let tilts = tilt_targets(&mut rng, cfg, straight_end);
    let z_guard = (cfg.altitude_min + 0.05 * span, cfg.altitude_max - 0.05 * span);

    let mut frames = Vec::with_capacity(n);
    let mut s = 0.0;
    let mut climb_sign = 1.0;
    let mut previous: Option<Pose6D> = None;
    for i in 0..n {
        let t = i as f64 * dt;
        if i > 0 {
            let t_prev = t - dt;
            let mut vz = climb_sign * climbs.rate_at(t_prev);
            if (z + vz * dt) < z_guard.0 || (z + vz * dt) > z_guard.1 {
                climb_sign = -climb_sign;
                vz = -vz;
            }
            let vh = (cfg.speed_mps * cfg.speed_mps - vz * vz).sqrt();
            s += vh * dt;
            z += vz * dt;
            if let Some(&(_, target, rate)) = tilts.iter().rev().find(|(start, _, _)| t_prev >= *start) {
                let step = rate * dt;
                theta += (target - theta).clamp(-step, step);
            }
        }
        let (x, y, psi) = cfg.racetrack(s);
        let pose = Pose6D::new(x, y, z, psi, theta.clamp(cfg.tilt_min, cfg.tilt_max), 0.0);
        let vo_increment = match previous {
            Some(p) => VoIncrement::between(&p, &pose)?,
            None => VoIncrement::identity(),
        };
        frames.push(TrajectoryFrame {
            t,
            truth: pose,
            vo_increment,
        });
        previous = Some(pose);
    }
    Ok(frames)
}

/// Sum of 3D step lengths.
pub fn path_length(poses: impl IntoIterator<Item = Pose6D>) -> f64 {
    let mut it = poses.into_iter();
    let Some(mut prev) = it.next() else {
        return 0.0;
    };
    let mut total = 0.0;
    for p in it {
        total += (p.position() - prev.position()).norm();
        prev = p;
    }
    total
}
