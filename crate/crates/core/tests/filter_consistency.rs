//! Monte Carlo consistency of the filter on a scenario whose noise matches
//! the filter's model exactly.

use crossview::estimator::{correct, predict, FilterState, ProcessNoise, VoIncrement};
use crossview::fusion::FusedMeasurement;
use crossview::geometry::{Pose6D, RotationMatrix};
use nalgebra::{Matrix3, Matrix5, Matrix6, Vector3, Vector5};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const RUNS: usize = 100;
const STEPS: usize = 600;
const Q: f64 = 0.01;
const R_POS: f64 = 4.0;
const R_ANG: f64 = 9.0;

fn run(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    let q = ProcessNoise::from_diagonal([Q; 6]).unwrap();
    let r = Matrix5::from_diagonal(&Vector5::new(R_POS, R_POS, R_POS, R_ANG, R_ANG));
    let start = Pose6D::new(0.0, 0.0, 150.0, 30.0, 15.0, 0.0);
    let mut truth = start.position();
    let mut state = FilterState::new(start, Matrix6::identity());
    // initial error drawn from P0
    let e0 = Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
    state.pose.set_position(&(truth + e0));

    let mut nees = Vec::with_capacity(STEPS);
    for step in 1..=STEPS {
        // truth moves by a known increment; odometry reports it with noise of variance Q
        let dp = Vector3::new(0.5, 0.2, 0.0);
        truth += dp;
        let w = Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)) * Q.sqrt();
        let inc = VoIncrement {
            dp: dp + w,
            dr: RotationMatrix::identity(),
        };
        state = predict(&state, &inc, &q).unwrap();
        if step % 20 == 0 {
            let v = Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)) * R_POS.sqrt();
            let z = FusedMeasurement {
                p_bar: truth + v,
                psi_bar: 30.0 + n.sample(&mut rng) * R_ANG.sqrt(),
                theta_bar: 15.0 + n.sample(&mut rng) * R_ANG.sqrt(),
                m: r,
            };
            state = correct(&state, &z).unwrap();
        }
        let e = state.pose.position() - truth;
        let p: Matrix3<f64> = state.p.fixed_view::<3, 3>(0, 0).into();
        nees.push((e.transpose() * p.try_inverse().unwrap() * e)[(0, 0)]);
    }
    nees
}

#[test]
fn position_nees_within_chi_square_bounds() {
    let runs: Vec<Vec<f64>> = (0..RUNS as u64).map(run).collect();
    let dof = 3.0 * RUNS as f64;
    let chi = ChiSquared::new(dof).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.025) / RUNS as f64, chi.inverse_cdf(0.975) / RUNS as f64);
    let mut inside = 0;
    let mut overall = 0.0;
    for k in 0..STEPS {
        let avg = runs.iter().map(|r| r[k]).sum::<f64>() / RUNS as f64;
        overall += avg / STEPS as f64;
        if (lo..=hi).contains(&avg) {
            inside += 1;
        }
    }
    let frac = inside as f64 / STEPS as f64;
    assert!(frac >= 0.9, "only {:.1}% of steps inside [{lo:.2}, {hi:.2}]", 100.0 * frac);
    assert!((overall - 3.0).abs() < 0.3, "time-averaged NEES {overall:.3}");
}
