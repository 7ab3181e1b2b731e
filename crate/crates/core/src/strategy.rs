//! Online execution of the min-max Team-1 strategy: track the CIB, derive
//! the prescription at the current belief, and generate per-player actions
//! with the inverse-CDF randomization mechanism.

use alloc::vec::Vec;

use crate::belief::{cib_update, cib_update_one_sided, Belief};
use crate::error::Error;
use crate::model::{CibControl, GameModel, Team};
use crate::prescriptions::Prescription;
use crate::solver::{stage_upper, SolverConfig, ValueTable};

/// Inverse-CDF draw: the first element (in alphabet order) whose cumulative
/// probability reaches `k`. Bit-exact given `(d, k)`; `k` must lie in
/// `(0, 1]`.
pub fn rand_draw(d: &[f64], k: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in d.iter().enumerate() {
        acc += p;
        if acc >= k {
            return i;
        }
    }
    d.len() - 1
}

/// How the executor turns the current belief into a prescription.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Re-solve the stage problem at the exact current belief (default).
    Resolve,
    /// Use the stored prescription of the nearest sampled belief.
    TableLookup,
}

/// Stateful runner of the CIB-based min-max strategy.
///
/// Single-owner value; clone it to branch a run. The executor never owns a
/// random source: per-player uniforms come from the caller.
#[derive(Debug, Clone)]
pub struct PolicyExecutor<'a> {
    model: &'a GameModel,
    tables: &'a [ValueTable],
    cfg: SolverConfig,
    mode: ExecMode,
    stage: usize,
    belief: Belief,
}

impl<'a> PolicyExecutor<'a> {
    /// Starts an executor at stage 0 with belief `initial`. `tables` must
    /// be the upper value tables solved for this model (with `cfg`).
    pub fn start(
        model: &'a GameModel,
        tables: &'a [ValueTable],
        initial: Belief,
        cfg: SolverConfig,
    ) -> Result<PolicyExecutor<'a>, Error> {
        if tables.len() != model.horizon() {
            return Err(Error::Mismatch("table count does not match horizon"));
        }
        for (s, t) in tables.iter().enumerate() {
            if t.stage != s || t.is_empty() {
                return Err(Error::Mismatch("tables are not a stage-complete solve"));
            }
        }
        if initial.stage != 0 || initial.weights.len() != model.dims(0).n_cells {
            return Err(Error::Mismatch("initial belief does not match the model"));
        }
        Ok(PolicyExecutor {
            model,
            tables,
            cfg,
            mode: ExecMode::Resolve,
            stage: 0,
            belief: initial,
        })
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    /// Current stage (0-based; equals `horizon` after the final step).
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    /// Team 1's prescription at the current belief.
    pub fn prescription_now(&self) -> Result<Prescription, Error> {
        if self.stage >= self.model.horizon() {
            return Err(Error::StageMismatch {
                expected: self.model.horizon() - 1,
                got: self.stage,
            });
        }
        prescription_at(
            self.model,
            self.tables,
            &self.belief,
            &self.cfg,
            self.mode,
        )
    }

    /// Executes one stage: draws every Team-1 action from the current
    /// prescription via [`rand_draw`], then advances the CIB with the
    /// realized common increment. `private` holds each player's private
    /// info index, `ks` the per-player uniforms in `(0, 1]`.
    ///
    /// Models without one-sided control must use
    /// [`Self::step_with_opponent`] instead.
    pub fn step(&mut self, private: &[usize], ks: &[f64], z: usize) -> Result<Vec<usize>, Error> {
        if self.model.cib_control() != CibControl::Team1Only {
            return Err(Error::UnsupportedStructure(
                "two-sided model: supply the opponent prescription via step_with_opponent",
            ));
        }
        let g1 = self.prescription_now()?;
        let actions = self.draw_actions(&g1, private, ks)?;
        self.belief = cib_update_one_sided(self.model, &self.belief, &g1, z)?;
        self.stage += 1;
        Ok(actions)
    }

    /// [`Self::step`] with an explicit Team-2 prescription trace, for
    /// models where both teams control the belief.
    pub fn step_with_opponent(
        &mut self,
        private: &[usize],
        ks: &[f64],
        z: usize,
        g2: &Prescription,
    ) -> Result<Vec<usize>, Error> {
        let g1 = self.prescription_now()?;
        let actions = self.draw_actions(&g1, private, ks)?;
        self.belief = cib_update(self.model, &self.belief, &g1, g2, z)?;
        self.stage += 1;
        Ok(actions)
    }

    fn draw_actions(
        &self,
        g1: &Prescription,
        private: &[usize],
        ks: &[f64],
    ) -> Result<Vec<usize>, Error> {
        let n1 = self.model.num_players(Team::One);
        if private.len() != n1 || ks.len() != n1 {
            return Err(Error::Mismatch("one private-info index and one K per player"));
        }
        let mut actions = Vec::with_capacity(n1);
        for j in 0..n1 {
            let n_p = self.model.private_info(self.stage, Team::One, j).len();
            if private[j] >= n_p {
                return Err(Error::IndexOutOfRange {
                    what: "private info",
                    index: private[j],
                    len: n_p,
                });
            }
            if !(ks[j] > 0.0 && ks[j] <= 1.0) {
                return Err(Error::InvalidDistribution("K outside (0, 1]"));
            }
            actions.push(rand_draw(&g1.rows[j][private[j]], ks[j]));
        }
        Ok(actions)
    }
}

/// Shared prescription derivation for the executor and CIB-based policies.
fn prescription_at(
    model: &GameModel,
    tables: &[ValueTable],
    pi: &Belief,
    cfg: &SolverConfig,
    mode: ExecMode,
) -> Result<Prescription, Error> {
    let stage = pi.stage;
    let table = &tables[stage];
    match mode {
        ExecMode::TableLookup => {
            let (idx, _) = table.nearest(pi)?;
            Ok(table.points()[idx].prescription.clone())
        }
        ExecMode::Resolve => {
            // A solve at a stored belief reproduces the stored argmin, so
            // serve grid hits from the table.
            let (idx, dist) = table.nearest(pi)?;
            if dist < crate::solver::EXACT_POINT_EPS {
                return Ok(table.points()[idx].prescription.clone());
            }
            let next = tables.get(stage + 1);
            Ok(stage_upper(model, pi, next, cfg)?.prescription)
        }
    }
}

/// A Team-1 policy usable by the best-response solver and the simulator.
pub trait Team1Policy: Sync {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error>;
}

/// Plays the uniform prescription everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformTeam1;

impl Team1Policy for UniformTeam1 {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error> {
        Ok(Prescription::uniform(model, Team::One, pi.stage))
    }
}

/// The solved min-max policy in resolve mode: stage solves at the exact
/// belief, with stored-grid hits served from the tables.
pub struct ResolveTeam1<'a> {
    pub tables: &'a [ValueTable],
    pub cfg: SolverConfig,
}

impl Team1Policy for ResolveTeam1<'_> {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error> {
        prescription_at(model, self.tables, pi, &self.cfg, ExecMode::Resolve)
    }
}

/// The solved min-max policy in table-lookup mode: nearest sampled belief.
pub struct LookupTeam1<'a> {
    pub tables: &'a [ValueTable],
}

impl Team1Policy for LookupTeam1<'_> {
    fn prescription(&self, model: &GameModel, pi: &Belief) -> Result<Prescription, Error> {
        let _ = model;
        prescription_at(
            model,
            self.tables,
            pi,
            &SolverConfig::default(),
            ExecMode::TableLookup,
        )
    }
}
