//! Seeded random model inputs shared by tests and randomized checks.

use alloc::vec;
use alloc::vec::Vec;

use crate::belief::Belief;
use crate::model::{GameModel, Team};
use crate::prescriptions::Prescription;
use crate::rng::SplitMix64;

/// Random belief supported on the reachable cells of `stage`.
pub fn random_belief(model: &GameModel, stage: usize, rng: &mut SplitMix64) -> Belief {
    let mut weights = vec![0.0; model.dims(stage).n_cells];
    let support = model.support(stage);
    let mut sum = 0.0;
    for &cell in support {
        let w = rng.next_range(0.01, 1.0);
        weights[cell] = w;
        sum += w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    Belief::new(stage, weights).expect("random belief is normalized")
}

/// Random interior behavioral prescription (every action has positive mass).
pub fn random_prescription(model: &GameModel, team: Team, stage: usize, rng: &mut SplitMix64) -> Prescription {
    let rows = (0..model.num_players(team))
        .map(|j| {
            let n_p = model.private_info(stage, team, j).len();
            let n_u = model.actions(stage, team, j).len();
            (0..n_p)
                .map(|_| {
                    let mut row: Vec<f64> = (0..n_u).map(|_| rng.next_range(0.05, 1.0)).collect();
                    let sum: f64 = row.iter().sum();
                    for p in row.iter_mut() {
                        *p /= sum;
                    }
                    row
                })
                .collect()
        })
        .collect();
    Prescription { team, stage, rows }
}
