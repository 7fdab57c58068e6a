//! Trajectory text files.
//!
//! Header `#crossview-traj-v1`, then one frame per line:
//! `t x y z psi theta phi dpx dpy dpz dpsi dtheta dphi`. The increment angles
//! are the Z-Y-X Euler angles of the rotation increment. Values are written
//! in shortest round-trip form, so output is byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::trajectory::TrajectoryFrame;
use super::{Result, SimError};
use crate::estimator::VoIncrement;
use crate::geometry::{euler_to_rotmat, rotmat_to_euler, Pose6D};

pub const TRAJECTORY_FILE_HEADER: &str = "#crossview-traj-v1";

pub fn trajectory_to_text(frames: &[TrajectoryFrame]) -> Result<String> {
    let mut out = String::with_capacity(160 * (frames.len() + 1));
    out.push_str(TRAJECTORY_FILE_HEADER);
    out.push('\n');
    for f in frames {
        let p = f.truth;
        let d = f.vo_increment.dp;
        let (dpsi, dtheta, dphi) = rotmat_to_euler(&f.vo_increment.dr)?;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {} {}",
            f.t, p.x, p.y, p.z, p.psi, p.theta, p.phi, d.x, d.y, d.z, dpsi, dtheta, dphi
        );
    }
    Ok(out)
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryFrame>> {
    let err = |line, msg: String| SimError::Parse { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == TRAJECTORY_FILE_HEADER => {}
        Some((n, h)) => {
            return Err(err(
                n,
                format!("expected header `{TRAJECTORY_FILE_HEADER}`, found `{h}`"),
            ))
        }
        None => return Err(err(1, "empty file".into())),
    }
    let mut frames = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 13 {
            return Err(err(n, format!("expected 13 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 13];
        for (slot, s) in v.iter_mut().zip(&fields) {
            *slot = s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(n, format!("bad value `{s}`")))?;
        }
        if v[0] <= last_t {
            return Err(err(n, format!("time {} is not after {last_t}", v[0])));
        }
        last_t = v[0];
        let dr = euler_to_rotmat(v[10], v[11], v[12]).map_err(|e| err(n, e.to_string()))?;
        frames.push(TrajectoryFrame {
            t: v[0],
            truth: Pose6D::new(v[1], v[2], v[3], v[4], v[5], v[6]),
            vo_increment: VoIncrement {
                dp: Vector3::new(v[7], v[8], v[9]),
                dr,
            },
        });
    }
    Ok(frames)
}

pub fn save_trajectory(frames: &[TrajectoryFrame], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, trajectory_to_text(frames)?)?;
    Ok(())
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryFrame>> {
    parse_trajectory(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trajectory::{gen_trajectory, TrajectoryConfig};

    #[test]
    fn poses_survive_text() {
        let frames = gen_trajectory(&TrajectoryConfig::default(), 4).unwrap();
        let back = parse_trajectory(&trajectory_to_text(&frames).unwrap()).unwrap();
        assert_eq!(back.len(), frames.len());
        for (a, b) in frames.iter().zip(&back) {
            assert_eq!((a.t, a.truth), (b.t, b.truth));
            assert_eq!(a.vo_increment.dp, b.vo_increment.dp);
            assert!((a.vo_increment.dr.matrix() - b.vo_increment.dr.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_trajectory("t x y\n"), Err(SimError::Parse { line: 1, .. })));
        let short = format!("{TRAJECTORY_FILE_HEADER}\n0 1 2\n");
        assert!(matches!(parse_trajectory(&short), Err(SimError::Parse { line: 2, .. })));
        let row = "0 0 0 150 0 10 0 0 0 0 0 0 0";
        let repeated = format!("{TRAJECTORY_FILE_HEADER}\n{row}\n{row}\n");
        assert!(matches!(parse_trajectory(&repeated), Err(SimError::Parse { line: 3, .. })));
        let nan = format!("{TRAJECTORY_FILE_HEADER}\n0 NaN 0 150 0 10 0 0 0 0 0 0 0\n");
        assert!(parse_trajectory(&nan).is_err());
    }
}
