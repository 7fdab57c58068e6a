use crossview::estimator::{correct, predict, FilterState, ProcessNoise, VoIncrement};
use crossview::fusion::{fuse, fused_covariance, weighted_pose, FusedMeasurement, FusionConfig};
use crossview::geometry::{
    angle_diff, cell_center, cell_index, euler_to_rotmat, ground_intersection, rotmat_to_euler,
    wrap_angle, CellIndex, Pose6D, RotationMatrix,
};
use crossview::matcher::MatchResult;
use crossview::tiledb::{generate_grid, GridBounds, TileRecord};
use nalgebra::{Matrix5, Matrix6, Vector3};
use proptest::prelude::*;

fn result_strategy() -> impl Strategy<Value = MatchResult> {
    (
        0u32..1000,
        0.01f64..100.0,
        prop::array::uniform3(-500.0f64..500.0),
        -90.0f64..90.0,
        0.0f64..45.0,
    )
        .prop_map(|(id, d, p, psi, theta)| MatchResult {
            tile_id: id,
            d,
            p_hat: Vector3::from(p),
            psi_hat: psi,
            theta_hat: theta,
        })
}

fn psd_matrix6() -> impl Strategy<Value = Matrix6<f64>> {
    (prop::collection::vec(-3.0f64..3.0, 36), 0.01f64..2.0).prop_map(|(v, diag)| {
        let a = Matrix6::from_row_slice(&v);
        a * a.transpose() + Matrix6::identity() * diag
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn euler_round_trip(psi in -179.999f64..180.0, theta in -89.0f64..89.0, phi in -179.999f64..180.0) {
        let r = euler_to_rotmat(psi, theta, phi).unwrap();
        let (p2, t2, f2) = rotmat_to_euler(&r).unwrap();
        prop_assert!(angle_diff(p2, psi).abs() < 1e-9);
        prop_assert!((t2 - theta).abs() < 1e-9);
        prop_assert!(angle_diff(f2, phi).abs() < 1e-9);
    }

    #[test]
    fn wrap_is_idempotent_and_in_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!(w > -180.0 && w <= 180.0);
        prop_assert_eq!(wrap_angle(w), w);
        // same direction
        prop_assert!(((a - w) / 360.0 - ((a - w) / 360.0).round()).abs() < 1e-9);
    }

    #[test]
    fn rotation_composition_stays_orthonormal(
        a in prop::array::uniform3(-30.0f64..30.0),
        b in prop::array::uniform3(-30.0f64..30.0),
    ) {
        let r = RotationMatrix::from_rotation_vector_deg(&Vector3::from(a))
            .compose(&RotationMatrix::from_rotation_vector_deg(&Vector3::from(b)));
        prop_assert!(r.deviation() < 1e-12);
    }

    #[test]
    fn ground_intersection_distance(z in 1.0f64..500.0, theta in 0.0f64..80.0, psi in -180.0f64..180.0) {
        let pose = Pose6D::new(12.0, -7.0, z, psi, theta, 0.0);
        let (x, y) = ground_intersection(&pose).unwrap();
        let dist = ((x - 12.0).powi(2) + (y + 7.0).powi(2)).sqrt();
        prop_assert!((dist - z * theta.to_radians().tan()).abs() < 1e-9 * (1.0 + dist));
    }

    #[test]
    fn cell_of_centre_is_cell(id in 0u32..64) {
        let c = CellIndex::new(id).unwrap();
        let (x, y) = cell_center(c);
        prop_assert_eq!(cell_index(x, y).unwrap(), c);
    }

    #[test]
    fn fusion_is_convex(results in prop::collection::vec(result_strategy(), 1..12)) {
        let w = weighted_pose(&results).unwrap();
        for axis in 0..3 {
            let lo = results.iter().map(|r| r.p_hat[axis]).fold(f64::INFINITY, f64::min);
            let hi = results.iter().map(|r| r.p_hat[axis]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(w.p_bar[axis] >= lo - 1e-9 && w.p_bar[axis] <= hi + 1e-9);
        }
        let lo = results.iter().map(|r| r.theta_hat).fold(f64::INFINITY, f64::min);
        let hi = results.iter().map(|r| r.theta_hat).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(w.theta_bar >= lo - 1e-9 && w.theta_bar <= hi + 1e-9);
    }

    #[test]
    fn fusion_distance_scale_invariant(
        results in prop::collection::vec(result_strategy(), 1..12),
        c in 0.1f64..10.0,
    ) {
        let scaled: Vec<_> = results.iter().map(|r| MatchResult { d: r.d * c, ..*r }).collect();
        let (a, b) = (weighted_pose(&results).unwrap(), weighted_pose(&scaled).unwrap());
        prop_assert!((a.p_bar - b.p_bar).amax() < 1e-12 * (1.0 + a.p_bar.amax()));
        prop_assert!(angle_diff(a.psi_bar, b.psi_bar).abs() < 1e-12 * 180.0);
        prop_assert!((a.theta_bar - b.theta_bar).abs() < 1e-12 * 45.0);
    }

    #[test]
    fn fusion_permutation_invariant(
        results in prop::collection::vec(result_strategy(), 2..12),
        rot in 0usize..12,
    ) {
        let mut perm = results.clone();
        perm.reverse();
        let n = perm.len();
        perm.rotate_left(rot % n);
        let cfg = FusionConfig::default();
        let (a, b) = (fuse(&results, &cfg).unwrap(), fuse(&perm, &cfg).unwrap());
        prop_assert!((a.p_bar - b.p_bar).amax() < 1e-9);
        prop_assert!(angle_diff(a.psi_bar, b.psi_bar).abs() < 1e-9);
        prop_assert!((a.m - b.m).amax() < 1e-9 * (1.0 + a.m.amax()));
    }

    #[test]
    fn fused_covariance_block_diagonal_psd(results in prop::collection::vec(result_strategy(), 1..12)) {
        let m = fused_covariance(&results, &FusionConfig::default()).unwrap();
        prop_assert_eq!(m, m.transpose());
        for i in 0..3 {
            prop_assert_eq!(m[(i, 3)], 0.0);
            prop_assert_eq!(m[(i, 4)], 0.0);
        }
        prop_assert_eq!(m[(3, 4)], 0.0);
        let min = m.symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-9 * (1.0 + m.amax()));
    }

    #[test]
    fn k_nearest_matches_brute_force(
        qx in -700.0f64..700.0,
        qy in -700.0f64..700.0,
        k in 1usize..30,
    ) {
        let set = generate_grid(GridBounds::new(-500.0, 500.0, -500.0, 500.0, 50.0).unwrap()).unwrap();
        let got = set.k_nearest(qx, qy, k).unwrap();
        let mut all: Vec<(f64, TileRecord)> = set
            .tiles()
            .iter()
            .map(|t| (((t.x - qx).powi(2) + (t.y - qy).powi(2)).sqrt(), *t))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.tile_id.cmp(&b.1.tile_id)));
        let want: Vec<u32> = all.iter().take(k).map(|(_, t)| t.tile_id).collect();
        let got: Vec<u32> = got.iter().map(|t| t.tile_id).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn correction_keeps_covariance_psd(
        p in psd_matrix6(),
        m_diag in prop::array::uniform5(1e-3f64..1e3),
        z in prop::array::uniform5(-50.0f64..50.0),
    ) {
        let s = FilterState::new(Pose6D::new(0.0, 0.0, 150.0, 10.0, 20.0, 0.0), p);
        let meas = FusedMeasurement {
            p_bar: Vector3::new(z[0], z[1], 150.0 + z[2]),
            psi_bar: wrap_angle(10.0 + z[3]),
            theta_bar: 20.0 + z[4] * 0.3,
            m: Matrix5::from_diagonal(&m_diag.into()),
        };
        let post = correct(&s, &meas).unwrap();
        prop_assert_eq!(post.asymmetry(), 0.0);
        prop_assert!(post.min_eigenvalue() >= -1e-9);
        // a correction never increases the variance of an observed component
        for i in 0..5 {
            prop_assert!(post.p[(i, i)] <= s.p[(i, i)] + 1e-9);
        }
    }

    #[test]
    fn prediction_adds_process_noise(p in psd_matrix6(), q in 0.0f64..1.0) {
        let s = FilterState::new(Pose6D::new(0.0, 0.0, 120.0, 0.0, 5.0, 0.0), p);
        let noise = ProcessNoise::from_diagonal([q; 6]).unwrap();
        let next = predict(&s, &VoIncrement::identity(), &noise).unwrap();
        prop_assert!((next.p - s.p - Matrix6::identity() * q).amax() < 1e-12);
    }
}
