//! Seeded Monte Carlo rollouts of (Team-1 policy, Team-2 policy) pairs on
//! the true game dynamics.
//!
//! Every random number is a counter-based draw keyed by
//! `(seed, stage, role, player)`, so trajectories are reproducible and
//! independent of evaluation order; rollouts can run in parallel without
//! changing any output.

use alloc::vec::Vec;

use crate::belief::{cib_update, cib_update_one_sided, initial_belief, Belief};
use crate::error::Error;
use crate::model::{CibControl, GameModel, Team};
use crate::prescriptions::{Prescription, PurePrescription};
use crate::rng::unit_for;
use crate::runner::{ParallelMap, SerialRunner};
use crate::solver::StageEval;
use crate::strategy::{rand_draw, Team1Policy};

/// Roles in the randomness key space.
mod role {
    pub const INIT: u64 = 0;
    pub const TEAM1: u64 = 1;
    pub const TEAM2: u64 = 2;
    pub const NATURE: u64 = 3;
}

/// One stage of a realized trajectory (flat indices).
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub x: usize,
    pub p1: usize,
    pub p2: usize,
    pub u1: usize,
    pub u2: usize,
    pub z: usize,
    /// Discounted stage cost `discount^t * c(x, u1, u2)`.
    pub cost: f64,
}

/// A full realized play-through with its total discounted cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StageRecord>,
    pub total_cost: f64,
}

/// A Team-2 policy for simulation.
pub trait Team2SimPolicy: Sync {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error>;
}

/// Uniform Team-2 play.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformTeam2;

impl Team2SimPolicy for UniformTeam2 {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error> {
        Ok(Prescription::uniform(model, Team::Two, pi.stage))
    }
}

/// Scripted Team-2 play: one pure prescription per stage, cycled when the
/// script is shorter than the horizon.
#[derive(Debug, Clone)]
pub struct ScriptedTeam2 {
    pub script: Vec<PurePrescription>,
}

impl Team2SimPolicy for ScriptedTeam2 {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error> {
        if self.script.is_empty() {
            return Err(Error::Mismatch("empty Team-2 script"));
        }
        let q = &self.script[pi.stage % self.script.len()];
        let mut lifted = q.lift();
        lifted.stage = pi.stage;
        if !lifted.matches_model(model) {
            return Err(Error::Mismatch("scripted prescription does not fit the model"));
        }
        Ok(lifted)
    }
}

/// Best-response play from solved BR tables: a one-step lookahead at the
/// exact current belief against the same Team-1 policy the tables were
/// solved for.
pub struct BrTeam2<'a> {
    pub tables: &'a [crate::bestresponse::BrTable],
    pub team1: &'a dyn Team1Policy,
}

impl Team2SimPolicy for BrTeam2<'_> {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error> {
        let stage = pi.stage;
        if stage >= self.tables.len() {
            return Err(Error::StageMismatch { expected: self.tables.len() - 1, got: stage });
        }
        let next = self.tables.get(stage + 1).map(|t| &t.values);
        let pures = &self.tables[stage].pures;
        let (_, arg) =
            crate::bestresponse::best_response_point(model, self.team1, pi, next, pures)?;
        Ok(pures[arg].lift())
    }
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStats {
    pub mean: f64,
    pub stderr: f64,
    /// True when `n = 1`, where the standard error is reported as 0.
    pub degenerate: bool,
}

/// One seeded rollout. All randomness is drawn from counter-based streams;
/// identical `(model, policies, seed)` reproduce the trajectory bit for
/// bit.
pub fn rollout(
    model: &GameModel,
    team1: &dyn Team1Policy,
    team2: &dyn Team2SimPolicy,
    seed: u64,
) -> Result<Trajectory, Error> {
    let t = model.horizon();
    let mut pi = initial_belief(model);

    // Initial (x, p1, p2) from the initial belief.
    let mut cell = draw_index(model.initial_weights(), unit_for(&[seed, 0, role::INIT, 0]));
    let mut records = Vec::with_capacity(t);
    let mut total = 0.0;
    for stage in 0..t {
        let d = model.dims(stage);
        let ad = model.action_dims(stage);
        let (x, p1, p2) = d.split_cell(cell);

        let g1 = team1.prescription(model, &pi)?;
        let g2 = team2.prescription(model, &pi)?;
        if !g1.is_valid(1e-9) || !g2.is_valid(1e-9) {
            return Err(Error::InvalidDistribution("policy emitted an invalid distribution"));
        }

        // Per-player actions through the RAND mechanism.
        let mut u1 = 0usize;
        for j in 0..model.num_players(Team::One) {
            let pj = crate::model::Dims::tuple_component(&d.p1, p1, j);
            let k = unit_for(&[seed, stage as u64, role::TEAM1, j as u64]);
            u1 = u1 * ad.u1[j] + rand_draw(&g1.rows[j][pj], k);
        }
        let mut u2 = 0usize;
        for j in 0..model.num_players(Team::Two) {
            let pj = crate::model::Dims::tuple_component(&d.p2, p2, j);
            let k = unit_for(&[seed, stage as u64, role::TEAM2, j as u64]);
            u2 = u2 * ad.u2[j] + rand_draw(&g2.rows[j][pj], k);
        }

        let cost = model.discount_weight(stage) * model.cost(stage, x, u1, u2);
        total += cost;

        // Next (x', p1', p2', z) from the kernel row (terms are in
        // canonical (z, cell) order).
        let terms = model.kernel_terms(stage, cell, u1, u2);
        let draw = unit_for(&[seed, stage as u64, role::NATURE, 0]);
        let mut acc = 0.0;
        let mut picked = terms.len() - 1;
        for (i, term) in terms.iter().enumerate() {
            acc += term.p;
            if acc >= draw {
                picked = i;
                break;
            }
        }
        let z = terms[picked].z as usize;
        let next_cell = terms[picked].cell as usize;

        records.push(StageRecord { stage, x, p1, p2, u1, u2, z, cost });

        pi = match model.cib_control() {
            CibControl::Team1Only => cib_update_one_sided(model, &pi, &g1, z)?,
            CibControl::Both => cib_update(model, &pi, &g1, &g2, z)?,
        };
        cell = next_cell;
    }
    Ok(Trajectory { records, total_cost: total })
}

fn draw_index(weights: &[f64], k: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if acc >= k {
                return i;
            }
        }
    }
    last_positive
}

/// Mean total cost over `n` independent rollouts with derived seeds
/// `seed+1 ..= seed+n`, with its sample standard error.
pub fn monte_carlo_cost(
    model: &GameModel,
    team1: &dyn Team1Policy,
    team2: &dyn Team2SimPolicy,
    n: usize,
    seed: u64,
) -> Result<McStats, Error> {
    monte_carlo_cost_with(model, team1, team2, n, seed, &SerialRunner)
}

pub fn monte_carlo_cost_with(
    model: &GameModel,
    team1: &dyn Team1Policy,
    team2: &dyn Team2SimPolicy,
    n: usize,
    seed: u64,
    runner: &impl ParallelMap,
) -> Result<McStats, Error> {
    Ok(summarize(&rollout_costs_with(model, team1, team2, n, seed, runner)?))
}

/// Total costs of `n` rollouts with derived seeds, in seed order.
pub fn rollout_costs_with(
    model: &GameModel,
    team1: &dyn Team1Policy,
    team2: &dyn Team2SimPolicy,
    n: usize,
    seed: u64,
    runner: &impl ParallelMap,
) -> Result<Vec<f64>, Error> {
    if n == 0 {
        return Err(Error::Mismatch("n must be at least 1"));
    }
    let costs: Vec<Result<f64, Error>> = runner.run(n, |i| {
        rollout(model, team1, team2, seed.wrapping_add(1 + i as u64)).map(|t| t.total_cost)
    });
    costs.into_iter().collect()
}

/// Mean and sample standard error with Kahan-compensated accumulation in
/// index order, so results are independent of the executor.
pub fn summarize(costs: &[f64]) -> McStats {
    let n = costs.len();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &c in costs {
        let y = c - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let mean = sum / n as f64;
    if n == 1 {
        return McStats { mean, stderr: 0.0, degenerate: true };
    }
    let mut sq = 0.0;
    let mut comp2 = 0.0;
    for &c in costs {
        let d = (c - mean) * (c - mean);
        let y = d - comp2;
        let t = sq + y;
        comp2 = (t - sq) - y;
        sq = t;
    }
    let stderr = libm::sqrt(sq / ((n as f64) * (n as f64 - 1.0)));
    McStats { mean, stderr, degenerate: false }
}

/// Surrogate evaluation of a (g1, pure q2) pair against BR continuation
/// tables; used by tests to cross-check the lookahead policy.
pub fn lookahead_values(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    pures: &[PurePrescription],
    next: Option<&crate::solver::ValueTable>,
) -> Vec<f64> {
    let mut eval = StageEval::new(model, pi.stage, next, pures);
    eval.set_belief(&pi.weights);
    let mut out = Vec::new();
    eval.values_per_pure(g1, &mut out);
    out
}
