use crossview::geometry::{angle_diff, Pose6D};
use crossview::matcher::{
    MatchBackend, MatcherNoiseModel, SceneBackend, ScenePriors, SyntheticBackend, UavObservation,
};
use crossview::tiledb::TileRecord;

const DRAWS: u64 = 10_000;

fn truth() -> Pose6D {
    Pose6D::new(250.0, -120.0, 150.0, 45.0, 22.5, 0.0)
}

fn tile(id: u32) -> TileRecord {
    TileRecord {
        tile_id: id,
        x: 250.0 + 50.0 * (id % 3) as f64,
        y: -50.0 + 50.0 * (id / 3) as f64,
    }
}

/// RMS errors over independent frames: `(horizontal, vertical, heading, tilt)`.
fn rms_errors(noise: MatcherNoiseModel) -> [f64; 4] {
    let backend = SyntheticBackend::new(noise, 99).unwrap();
    let t = truth();
    let mut acc = [0.0; 4];
    for frame in 0..DRAWS {
        let r = backend
            .match_pair(&UavObservation::new(frame, t), &tile((frame % 9) as u32))
            .unwrap();
        acc[0] += (r.p_hat.x - t.x).powi(2) + (r.p_hat.y - t.y).powi(2);
        acc[1] += (r.p_hat.z - t.z).powi(2);
        acc[2] += angle_diff(r.psi_hat, t.psi).powi(2);
        acc[3] += (r.theta_hat - t.theta).powi(2);
    }
    acc.map(|a| (a / DRAWS as f64).sqrt())
}

fn assert_within(name: &str, got: f64, want: f64) {
    let rel = (got - want).abs() / want;
    assert!(rel < 0.05, "{name}: RMS {got:.3} vs configured {want:.3} ({:.1}%)", 100.0 * rel);
}

#[test]
fn hybrid_noise_reproduces_calibration() {
    let [h, v, psi, theta] = rms_errors(MatcherNoiseModel::hybrid_grade());
    assert_within("horizontal", h, 33.86);
    assert_within("vertical", v, 16.05);
    assert_within("heading", psi, 31.68);
    assert_within("tilt", theta, 6.28);
}

#[test]
fn regression_noise_reproduces_calibration() {
    let [h, v, psi, theta] = rms_errors(MatcherNoiseModel::regression_grade());
    assert_within("horizontal", h, 68.06);
    assert_within("vertical", v, 17.32);
    assert_within("heading", psi, 70.64);
    assert_within("tilt", theta, 7.94);
}

#[test]
fn marginal_error_independent_of_frame_correlation() {
    for rho in [0.0, 0.5, 1.0] {
        let noise = MatcherNoiseModel {
            frame_correlation: rho,
            ..MatcherNoiseModel::hybrid_grade()
        };
        let [h, ..] = rms_errors(noise);
        assert_within("horizontal", h, 33.86);
    }
}

#[test]
fn backends_share_distances_for_a_seed() {
    let obs = UavObservation::new(40, truth());
    let tiles: Vec<_> = (0..9).map(tile).collect();
    let hybrid = SyntheticBackend::new(MatcherNoiseModel::hybrid_grade(), 5).unwrap();
    let regression = SyntheticBackend::new(MatcherNoiseModel::regression_grade(), 5).unwrap();
    let scene = SceneBackend::new(MatcherNoiseModel::noiseless(), ScenePriors::default(), 5).unwrap();
    let scene_jitter = SceneBackend::new(
        MatcherNoiseModel {
            d_jitter: MatcherNoiseModel::DEFAULT_D_JITTER,
            ..MatcherNoiseModel::noiseless()
        },
        ScenePriors::default(),
        5,
    )
    .unwrap();
    let d = |b: &dyn MatchBackend| -> Vec<f64> {
        b.match_candidates(&obs, &tiles).unwrap().iter().map(|r| r.d).collect()
    };
    assert_eq!(d(&hybrid), d(&regression));
    assert_eq!(d(&hybrid), d(&scene_jitter));
    assert_ne!(d(&hybrid), d(&scene));
}

#[test]
fn synthetic_backend_is_deterministic() {
    let obs = UavObservation::new(7, truth());
    let tiles: Vec<_> = (0..9).map(tile).collect();
    let a = SyntheticBackend::new(MatcherNoiseModel::hybrid_grade(), 1).unwrap();
    let b = SyntheticBackend::new(MatcherNoiseModel::hybrid_grade(), 1).unwrap();
    let c = SyntheticBackend::new(MatcherNoiseModel::hybrid_grade(), 2).unwrap();
    let first = a.match_candidates(&obs, &tiles).unwrap();
    // call order does not matter
    let mut reversed: Vec<_> = tiles.iter().rev().map(|t| b.match_pair(&obs, t).unwrap()).collect();
    reversed.reverse();
    assert_eq!(first, reversed);
    assert_ne!(first, c.match_candidates(&obs, &tiles).unwrap());
}
