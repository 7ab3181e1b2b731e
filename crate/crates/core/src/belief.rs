//! The common-information belief (CIB), its strategy-independent update,
//! the joint/marginal outcome transforms, and the reduced stage cost.
//!
//! All operations are pure functions of their arguments. The [`extended`]
//! submodule exposes the un-normalized transforms on the scaled domain;
//! they are exactly degree-one homogeneous in the belief argument and exist
//! for property tests and the solver's continuation term.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::model::{CibControl, GameModel, Team};
use crate::prescriptions::Prescription;

/// Mass below which an increment is treated as impossible and the belief
/// update falls back to the uniform belief.
pub const ZERO_PROB_EPS: f64 = 1e-12;

/// Tolerance on belief normalization.
pub const BELIEF_NORM_TOL: f64 = 1e-9;

/// Probability vector over the joint space `X x P1 x P2` at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub stage: usize,
    pub weights: Vec<f64>,
}

impl Belief {
    /// Builds a belief, checking nonnegativity and unit mass.
    pub fn new(stage: usize, weights: Vec<f64>) -> Result<Belief, Error> {
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidDistribution("belief has a negative weight"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > BELIEF_NORM_TOL {
            return Err(Error::InvalidDistribution("belief does not sum to 1"));
        }
        Ok(Belief { stage, weights })
    }

    /// Point mass on one cell.
    pub fn point_mass(model: &GameModel, stage: usize, cell: usize) -> Belief {
        let mut weights = vec![0.0; model.dims(stage).n_cells];
        weights[cell] = 1.0;
        Belief { stage, weights }
    }

    /// Uniform belief over all cells of a stage.
    pub fn uniform(model: &GameModel, stage: usize) -> Belief {
        let n = model.dims(stage).n_cells;
        Belief {
            stage,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Joint distribution over `(Z, X', P1', P2')` produced by one stage of
/// play, indexed `z * n_cells + cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcomeDist {
    /// Stage of the belief/prescriptions that produced this outcome.
    pub stage: usize,
    pub n_z: usize,
    pub n_cells: usize,
    pub weights: Vec<f64>,
}

impl JointOutcomeDist {
    #[inline]
    pub fn slice(&self, z: usize) -> &[f64] {
        &self.weights[z * self.n_cells..(z + 1) * self.n_cells]
    }
}

fn check_stage_args(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    g2: &Prescription,
) -> Result<(), Error> {
    if pi.stage >= model.horizon() {
        return Err(Error::StageMismatch {
            expected: model.horizon() - 1,
            got: pi.stage,
        });
    }
    if g1.stage != pi.stage || g2.stage != pi.stage {
        return Err(Error::StageMismatch {
            expected: pi.stage,
            got: if g1.stage != pi.stage { g1.stage } else { g2.stage },
        });
    }
    if g1.team != Team::One || g2.team != Team::Two {
        return Err(Error::Mismatch("prescription teams are swapped"));
    }
    if pi.weights.len() != model.dims(pi.stage).n_cells {
        return Err(Error::Mismatch("belief length does not match stage cells"));
    }
    if !g1.matches_model(model) || !g2.matches_model(model) {
        return Err(Error::Mismatch("prescription shape does not match model"));
    }
    Ok(())
}

/// One stage of play viewed as a joint distribution over the next common
/// increment, state, and private information.
pub fn joint_transform(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    g2: &Prescription,
) -> Result<JointOutcomeDist, Error> {
    check_stage_args(model, pi, g1, g2)?;
    Ok(extended::joint_transform_scaled(model, pi.stage, &pi.weights, g1, g2))
}

/// Marginal of a joint outcome over the common increment.
pub fn common_marginal(joint: &JointOutcomeDist) -> Vec<f64> {
    let mut out = vec![0.0; joint.n_z];
    for (z, out_z) in out.iter_mut().enumerate() {
        *out_z = joint.slice(z).iter().sum();
    }
    out
}

/// The strategy-independent belief update `F_t`.
///
/// Conditions the joint outcome on the realized increment `z`; if `z` has
/// (numerically) zero probability, returns the uniform belief over the
/// next stage's cells.
pub fn cib_update(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    g2: &Prescription,
    z: usize,
) -> Result<Belief, Error> {
    let joint = joint_transform(model, pi, g1, g2)?;
    if z >= joint.n_z {
        return Err(Error::IndexOutOfRange {
            what: "increment",
            index: z,
            len: joint.n_z,
        });
    }
    Ok(condition_on_slice(model, pi.stage, joint.slice(z)))
}

/// Normalizes one z-slice of a joint outcome into a next-stage belief, with
/// the uniform fallback on numerically impossible slices.
pub(crate) fn condition_on_slice(model: &GameModel, stage: usize, slice: &[f64]) -> Belief {
    let mass: f64 = slice.iter().sum();
    if mass > ZERO_PROB_EPS {
        Belief {
            stage: stage + 1,
            weights: slice.iter().map(|w| w / mass).collect(),
        }
    } else {
        Belief::uniform(model, stage + 1)
    }
}

/// One-sided belief update: `F_t` computed without Team 2's prescription.
///
/// Requires `cib_control = team1_only`. Team 2's joint action is read from
/// the realized increment through the declared projection; the Team-2
/// behavioral factor cancels, so the result equals [`cib_update`] for every
/// Team-2 prescription consistent with `z`.
pub fn cib_update_one_sided(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    z: usize,
) -> Result<Belief, Error> {
    if model.cib_control() != CibControl::Team1Only {
        return Err(Error::UnsupportedStructure(
            "one-sided belief update needs cib_control = team1_only",
        ));
    }
    let stage = pi.stage;
    if stage >= model.horizon() {
        return Err(Error::StageMismatch {
            expected: model.horizon() - 1,
            got: stage,
        });
    }
    if g1.stage != stage {
        return Err(Error::StageMismatch { expected: stage, got: g1.stage });
    }
    let n_z = model.increments(stage).len();
    if z >= n_z {
        return Err(Error::IndexOutOfRange { what: "increment", index: z, len: n_z });
    }
    let proj = model
        .u2_projection(stage)
        .ok_or(Error::UnsupportedStructure("one-sided update needs u2_projection"))?;
    let u2 = proj[z];

    let d = model.dims(stage);
    let ad = model.action_dims(stage);
    let n_next = model.dims(stage + 1).n_cells;
    let mut out = vec![0.0; n_next];
    for cell in 0..d.n_cells {
        let w = pi.weights[cell];
        if w == 0.0 {
            continue;
        }
        let (_, p1, _) = d.split_cell(cell);
        for u1 in 0..ad.n_u1 {
            let wu = w * g1.product_form_flat(&d.p1, &ad.u1, p1, u1);
            if wu == 0.0 {
                continue;
            }
            for term in model.kernel_terms(stage, cell, u1, u2) {
                if term.z as usize == z {
                    out[term.cell as usize] += wu * term.p;
                }
            }
        }
    }
    Ok(condition_on_slice(model, stage, &out))
}

/// Reduced stage cost `discount^t * c~_t(pi, g1, g2)`.
pub fn stage_cost(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    g2: &Prescription,
) -> Result<f64, Error> {
    check_stage_args(model, pi, g1, g2)?;
    Ok(extended::stage_cost_scaled(model, pi.stage, &pi.weights, g1, g2))
}

/// The model's initial belief at stage 0.
pub fn initial_belief(model: &GameModel) -> Belief {
    Belief {
        stage: 0,
        weights: model.initial_weights().to_vec(),
    }
}

/// Un-normalized transforms on the scaled belief domain.
///
/// For weights `alpha * pi` with `0 <= alpha <= 1`, each of these scales
/// exactly by `alpha`. They skip argument validation.
pub mod extended {
    use super::*;

    /// Un-normalized joint outcome transform.
    pub fn joint_transform_scaled(
        model: &GameModel,
        stage: usize,
        weights: &[f64],
        g1: &Prescription,
        g2: &Prescription,
    ) -> JointOutcomeDist {
        let d = model.dims(stage);
        let ad = model.action_dims(stage);
        let n_z = model.increments(stage).len();
        let n_next = model.dims(stage + 1).n_cells;
        let mut out = vec![0.0; n_z * n_next];
        for (cell, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (_, p1, p2) = d.split_cell(cell);
            for u1 in 0..ad.n_u1 {
                let w1 = w * g1.product_form_flat(&d.p1, &ad.u1, p1, u1);
                if w1 == 0.0 {
                    continue;
                }
                for u2 in 0..ad.n_u2 {
                    let w12 = w1 * g2.product_form_flat(&d.p2, &ad.u2, p2, u2);
                    if w12 == 0.0 {
                        continue;
                    }
                    for term in model.kernel_terms(stage, cell, u1, u2) {
                        out[term.z as usize * n_next + term.cell as usize] += w12 * term.p;
                    }
                }
            }
        }
        JointOutcomeDist {
            stage,
            n_z,
            n_cells: n_next,
            weights: out,
        }
    }

    /// Un-normalized reduced stage cost (includes the discount weight).
    pub fn stage_cost_scaled(
        model: &GameModel,
        stage: usize,
        weights: &[f64],
        g1: &Prescription,
        g2: &Prescription,
    ) -> f64 {
        let d = model.dims(stage);
        let ad = model.action_dims(stage);
        let mut total = 0.0;
        for (cell, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (x, p1, p2) = d.split_cell(cell);
            for u1 in 0..ad.n_u1 {
                let w1 = w * g1.product_form_flat(&d.p1, &ad.u1, p1, u1);
                if w1 == 0.0 {
                    continue;
                }
                for u2 in 0..ad.n_u2 {
                    let w12 = w1 * g2.product_form_flat(&d.p2, &ad.u2, p2, u2);
                    if w12 != 0.0 {
                        total += w12 * model.cost(stage, x, u1, u2);
                    }
                }
            }
        }
        model.discount_weight(stage) * total
    }

    /// Un-normalized increment marginal.
    pub fn common_marginal_scaled(
        model: &GameModel,
        stage: usize,
        weights: &[f64],
        g1: &Prescription,
        g2: &Prescription,
    ) -> Vec<f64> {
        common_marginal(&joint_transform_scaled(model, stage, weights, g1, g2))
    }
}
