//! Property tests for the belief machinery on randomized models, beliefs,
//! and prescriptions.

use proptest::prelude::*;

use cib_core::belief::{
    cib_update, cib_update_one_sided, common_marginal, extended, initial_belief, joint_transform,
};
use cib_core::model::builtin_example;
use cib_core::oracle::random_small_game;
use cib_core::prescriptions::Prescription;
use cib_core::rng::SplitMix64;
use cib_core::testing::{random_belief, random_prescription};
use cib_core::Team;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every belief any update produces is normalized, across models and
    /// realized or impossible increments.
    #[test]
    fn updates_stay_normalized(seed in 0u64..5_000, z_pick in 0usize..64) {
        let model = if seed % 3 == 0 {
            builtin_example("defender_attacker").unwrap()
        } else {
            random_small_game(seed)
        };
        let mut rng = SplitMix64::new(seed ^ 0xFEED);
        let stage = (seed as usize / 3) % model.horizon();
        let pi = random_belief(&model, stage, &mut rng);
        let g1 = random_prescription(&model, Team::One, stage, &mut rng);
        let g2 = random_prescription(&model, Team::Two, stage, &mut rng);
        let n_z = model.increments(stage).len();
        let z = z_pick % n_z;
        let post = cib_update(&model, &pi, &g1, &g2, z).unwrap();
        prop_assert!((post.mass() - 1.0).abs() <= 1e-9);
        prop_assert!(post.weights.iter().all(|&w| w >= 0.0));
    }

    /// One-sided and two-sided updates agree on team1_only models at any
    /// increment with positive probability.
    #[test]
    fn one_sided_agrees_with_two_sided(seed in 0u64..5_000) {
        let model = if seed % 2 == 0 {
            builtin_example("defender_attacker").unwrap()
        } else {
            random_small_game(seed)
        };
        let mut rng = SplitMix64::new(seed ^ 0xABCD);
        let stage = (seed as usize) % model.horizon();
        let pi = random_belief(&model, stage, &mut rng);
        let g1 = random_prescription(&model, Team::One, stage, &mut rng);
        let g2 = random_prescription(&model, Team::Two, stage, &mut rng);
        let joint = joint_transform(&model, &pi, &g1, &g2).unwrap();
        let marg = common_marginal(&joint);
        for (z, &pz) in marg.iter().enumerate() {
            if pz > 1e-9 {
                let two = cib_update(&model, &pi, &g1, &g2, z).unwrap();
                let one = cib_update_one_sided(&model, &pi, &g1, z).unwrap();
                for (a, b) in one.weights.iter().zip(&two.weights) {
                    prop_assert!((a - b).abs() <= 1e-10);
                }
            }
        }
    }

    /// Degree-one homogeneity of the extended-domain transforms.
    #[test]
    fn extended_transforms_are_homogeneous(seed in 0u64..5_000, alpha in 0.0f64..=1.0) {
        let model = random_small_game(seed);
        let mut rng = SplitMix64::new(seed ^ 0x77);
        let pi = random_belief(&model, 0, &mut rng);
        let g1 = random_prescription(&model, Team::One, 0, &mut rng);
        let g2 = random_prescription(&model, Team::Two, 0, &mut rng);
        let scaled: Vec<f64> = pi.weights.iter().map(|w| alpha * w).collect();

        let full = extended::joint_transform_scaled(&model, 0, &pi.weights, &g1, &g2);
        let part = extended::joint_transform_scaled(&model, 0, &scaled, &g1, &g2);
        for (a, b) in part.weights.iter().zip(&full.weights) {
            prop_assert!((a - alpha * b).abs() <= 1e-12);
        }
        let c_full = extended::stage_cost_scaled(&model, 0, &pi.weights, &g1, &g2);
        let c_part = extended::stage_cost_scaled(&model, 0, &scaled, &g1, &g2);
        prop_assert!((c_part - alpha * c_full).abs() <= 1e-12);
    }

    /// The product form of any behavioral prescription is a distribution
    /// over joint actions for every private-information realization.
    #[test]
    fn product_form_is_a_distribution(seed in 0u64..5_000) {
        let model = builtin_example("defender_attacker").unwrap();
        let mut rng = SplitMix64::new(seed);
        let g1 = random_prescription(&model, Team::One, 0, &mut rng);
        let d = model.dims(0);
        let ad = model.action_dims(0);
        for p in 0..d.n_p1 {
            let total: f64 = (0..ad.n_u1)
                .map(|u| g1.product_form_flat(&d.p1, &ad.u1, p, u))
                .sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn uniform_prescriptions_cover_every_builtin() {
    for name in cib_core::model::BUILTIN_NAMES {
        let model = builtin_example(name).unwrap();
        let pi = initial_belief(&model);
        let g1 = Prescription::uniform(&model, Team::One, 0);
        let g2 = Prescription::uniform(&model, Team::Two, 0);
        let joint = joint_transform(&model, &pi, &g1, &g2).unwrap();
        let total: f64 = joint.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "{name}");
    }
}
