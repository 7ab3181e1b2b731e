//! Team 2's best response to a fixed CIB-based Team-1 policy, and the
//! resulting exploitability.
//!
//! Under one-sided CIB control the belief chain does not depend on Team 2,
//! so the best-response problem is a single-agent dynamic program over the
//! belief: at each sampled point, maximize over pure Team-2 prescriptions
//! the stage cost plus the interpolated continuation. Pure prescriptions
//! suffice because the objective is linear in Team 2's product form.

use alloc::vec::Vec;

use crate::belief::Belief;
use crate::error::Error;
use crate::model::{CibControl, GameModel, Team};
use crate::prescriptions::{enumerate_pure_capped, PurePrescription};
use crate::runner::{ParallelMap, SerialRunner};
use crate::solver::{assemble_grid, SolverConfig, StageEval, TablePoint, ValueTable};
use crate::strategy::Team1Policy;

/// Best-response value table for one stage: values live in an ordinary
/// [`ValueTable`] (prescriptions there are the lifted argmax), and the
/// maximizing pure prescription is kept alongside.
#[derive(Debug, Clone)]
pub struct BrTable {
    pub values: ValueTable,
    /// Index into [`Self::pures`] per stored point.
    pub argmax: Vec<usize>,
    /// The pure Team-2 prescriptions enumerated at this stage.
    pub pures: Vec<PurePrescription>,
}

impl BrTable {
    pub fn stage(&self) -> usize {
        self.values.stage
    }

    /// Maximizing pure prescription stored for point `idx`.
    pub fn argmax_at(&self, idx: usize) -> &PurePrescription {
        &self.pures[self.argmax[idx]]
    }
}

/// Best-response dynamic program over the sampled belief grid against a
/// fixed Team-1 policy. Requires one-sided CIB control.
pub fn solve_best_response(
    model: &GameModel,
    policy: &dyn Team1Policy,
    cfg: &SolverConfig,
) -> Result<Vec<BrTable>, Error> {
    solve_best_response_with(model, policy, cfg, &SerialRunner)
}

pub fn solve_best_response_with(
    model: &GameModel,
    policy: &dyn Team1Policy,
    cfg: &SolverConfig,
    runner: &impl ParallelMap,
) -> Result<Vec<BrTable>, Error> {
    if model.cib_control() != CibControl::Team1Only {
        return Err(Error::UnsupportedStructure(
            "exact best response needs cib_control = team1_only",
        ));
    }
    let t = model.horizon();
    let mut tables: Vec<Option<BrTable>> = (0..t).map(|_| None).collect();
    for stage in (0..t).rev() {
        let grid = assemble_grid(model, stage, cfg)?;
        let pures = enumerate_pure_capped(model, Team::Two, stage, cfg.pure_cap)?;
        let next = if stage + 1 < t {
            Some(&tables[stage + 1].as_ref().expect("later stage solved").values)
        } else {
            None
        };
        let solved: Vec<Result<(f64, usize), Error>> = runner.run(grid.len(), |i| {
            best_response_point(model, policy, &grid[i], next, &pures)
        });
        let mut points = Vec::with_capacity(grid.len());
        let mut argmax = Vec::with_capacity(grid.len());
        for (belief, solved) in grid.into_iter().zip(solved) {
            let (value, arg) = solved?;
            points.push(TablePoint {
                belief,
                value,
                prescription: pures[arg].lift(),
            });
            argmax.push(arg);
        }
        let k = cfg.interp_k.unwrap_or(model.support(stage).len() + 1);
        let values = ValueTable::from_points(model, stage, points, k, cfg.interp_power, true);
        tables[stage] = Some(BrTable { values, argmax, pures: pures.clone() });
    }
    Ok(tables.into_iter().map(|t| t.expect("all stages solved")).collect())
}

/// One best-response Bellman step: max over pure Team-2 prescriptions at an
/// exact belief, ties broken toward the lowest enumeration index.
pub(crate) fn best_response_point(
    model: &GameModel,
    policy: &dyn Team1Policy,
    pi: &Belief,
    next: Option<&ValueTable>,
    pures: &[PurePrescription],
) -> Result<(f64, usize), Error> {
    let g1 = policy.prescription(model, pi)?;
    if !g1.is_valid(1e-9) {
        return Err(Error::InvalidDistribution("policy emitted an invalid prescription"));
    }
    let mut eval = StageEval::new(model, pi.stage, next, pures);
    eval.set_belief(&pi.weights);
    let mut values = Vec::new();
    eval.values_per_pure(&g1, &mut values);
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0usize;
    for (q, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            arg = q;
        }
    }
    if !best.is_finite() {
        return Err(Error::NonFinite { stage: pi.stage });
    }
    Ok((best, arg))
}

/// The best-response value at the initial belief: what Team 2 extracts
/// against the fixed policy.
pub fn exploitability(
    model: &GameModel,
    policy: &dyn Team1Policy,
    cfg: &SolverConfig,
) -> Result<f64, Error> {
    let tables = solve_best_response(model, policy, cfg)?;
    exploitability_from(&tables, model)
}

/// Reads the exploitability off already-solved best-response tables.
pub fn exploitability_from(tables: &[BrTable], model: &GameModel) -> Result<f64, Error> {
    let first = tables.first().ok_or(Error::Mismatch("no tables"))?;
    first.values.interpolate(&crate::belief::initial_belief(model))
}
