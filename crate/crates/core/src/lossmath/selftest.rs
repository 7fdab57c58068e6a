//! Finite-difference check of the analytic loss gradients.
//!
//! Used by the `losses --self-test` command. Points within `KINK_EXCLUSION`
//! of a non-differentiable point are skipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    cell_cross_entropy, cell_cross_entropy_grad, contrastive_loss, contrastive_loss_grad,
    CellLogits, PairLabel, DEFAULT_MARGIN,
};
use crate::geometry::{CellIndex, NUM_CELLS};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-6;
pub const KINK_EXCLUSION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub name: &'static str,
    pub points: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        self.points > 0 && self.max_rel_error < REL_TOLERANCE
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Central differences of the contrastive loss at `points` seeded distances.
pub fn check_contrastive(seed: u64, points: usize) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = DEFAULT_MARGIN;
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst = 0.0f64;
    while checked < points {
        let d: f64 = rng.random_range(0.0..1.5 * margin);
        let label = if rng.random_bool(0.5) {
            PairLabel::Matching
        } else {
            PairLabel::NonMatching
        };
        if label == PairLabel::NonMatching && (d - margin).abs() < KINK_EXCLUSION
            || d < FD_STEP
        {
            skipped += 1;
            continue;
        }
        let f = |x: f64| contrastive_loss(x, label, margin).expect("valid distance");
        let numeric = (f(d + FD_STEP) - f(d - FD_STEP)) / (2.0 * FD_STEP);
        let analytic = contrastive_loss_grad(d, label, margin).expect("valid distance");
        worst = worst.max(rel_error(analytic, numeric));
        checked += 1;
    }
    GradientCheck {
        name: "contrastive_loss",
        points: checked,
        skipped,
        max_rel_error: worst,
    }
}

/// Central differences of the cell cross-entropy, every logit perturbed, at
/// `points` seeded logit vectors in `[-1, 1]`.
pub fn check_cross_entropy(seed: u64, points: usize) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let values: Vec<f64> = (0..NUM_CELLS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = CellIndex::new(rng.random_range(0..NUM_CELLS as u32)).expect("in range");
        let logits = CellLogits::new(&values).expect("finite");
        let analytic = cell_cross_entropy_grad(&logits, target);
        let mut probe = values.clone();
        for j in 0..NUM_CELLS {
            probe[j] = values[j] + FD_STEP;
            let plus = cell_cross_entropy(&CellLogits::new(&probe).expect("finite"), target);
            probe[j] = values[j] - FD_STEP;
            let minus = cell_cross_entropy(&CellLogits::new(&probe).expect("finite"), target);
            probe[j] = values[j];
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(analytic[j], numeric));
        }
    }
    GradientCheck {
        name: "cell_cross_entropy",
        points,
        skipped: 0,
        max_rel_error: worst,
    }
}

/// Both checks at 100 points each.
pub fn run(seed: u64) -> Vec<GradientCheck> {
    vec![
        check_contrastive(seed, 100),
        check_cross_entropy(seed.wrapping_add(1), 100),
    ]
}
