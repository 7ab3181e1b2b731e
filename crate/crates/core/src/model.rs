//! Normalized game representation.
//!
//! A game is stored per stage: finite alphabets for states, per-player
//! actions and private information, common-observation increments, a joint
//! stage kernel `P[x', p1', p2', z | x, p1, p2, u1, u2]`, and a stage cost
//! `c(x, u1, u2)`. Team 1 minimizes, Team 2 maximizes. Discounting is folded
//! into the stage cost as `discount^stage * c`.
//!
//! Stages are 0-based throughout the crate: a model with horizon `T` has
//! decision stages `0..T`, and alphabets for states/private information
//! exist for stages `0..=T` (the kernel at stage `T-1` emits stage-`T`
//! outcomes).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;

/// Team identifier. Team 1 minimizes the total cost, Team 2 maximizes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Team {
    One,
    Two,
}

/// Who controls the evolution of the common-information belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CibControl {
    /// General case: both teams' prescriptions enter the belief update.
    Both,
    /// The belief update does not depend on Team 2's prescription. Requires
    /// the structural condition checked by [`check_one_sided`].
    Team1Only,
}

/// An ordered finite alphabet of named symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Self {
        Self { symbols }
    }

    pub fn from_strs(symbols: &[&str]) -> Self {
        Self {
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    fn has_duplicates(&self) -> bool {
        for i in 0..self.symbols.len() {
            for j in (i + 1)..self.symbols.len() {
                if self.symbols[i] == self.symbols[j] {
                    return true;
                }
            }
        }
        false
    }
}

/// One outcome of a kernel row: probability `p` of jumping to joint cell
/// `cell` at the next stage while emitting common increment `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTerm {
    pub z: u32,
    pub cell: u32,
    pub p: f64,
}

/// Sizes of the joint space `X x P1 x P2` at one stage, with flat-index
/// helpers. Cells are indexed `(x * n_p1 + p1) * n_p2 + p2`; team private
/// tuples use player-major mixed radix (player 0 most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct Dims {
    pub n_states: usize,
    pub p1: Vec<usize>,
    pub p2: Vec<usize>,
    pub n_p1: usize,
    pub n_p2: usize,
    pub n_cells: usize,
}

impl Dims {
    fn new(n_states: usize, p1: Vec<usize>, p2: Vec<usize>) -> Self {
        let n_p1 = p1.iter().product::<usize>().max(1);
        let n_p2 = p2.iter().product::<usize>().max(1);
        Self {
            n_states,
            n_p1,
            n_p2,
            n_cells: n_states * n_p1 * n_p2,
            p1,
            p2,
        }
    }

    #[inline]
    pub fn cell(&self, x: usize, p1: usize, p2: usize) -> usize {
        (x * self.n_p1 + p1) * self.n_p2 + p2
    }

    /// Splits a flat cell index into `(x, p1, p2)`.
    #[inline]
    pub fn split_cell(&self, cell: usize) -> (usize, usize, usize) {
        let p2 = cell % self.n_p2;
        let rest = cell / self.n_p2;
        (rest / self.n_p1, rest % self.n_p1, p2)
    }

    /// Splits a flat joint private-info index into per-player indices.
    pub fn split_tuple(dims: &[usize], mut flat: usize) -> Vec<usize> {
        let mut out = vec![0usize; dims.len()];
        for j in (0..dims.len()).rev() {
            out[j] = flat % dims[j];
            flat /= dims[j];
        }
        out
    }

    pub fn join_tuple(dims: &[usize], parts: &[usize]) -> usize {
        let mut flat = 0usize;
        for (d, p) in dims.iter().zip(parts) {
            flat = flat * d + p;
        }
        flat
    }

    /// Component `j` of a flat joint index over `dims`.
    #[inline]
    pub fn tuple_component(dims: &[usize], flat: usize, j: usize) -> usize {
        let mut rest = flat;
        for d in dims[j + 1..].iter() {
            rest /= d;
        }
        rest % dims[j]
    }
}

/// Per-stage action-space sizes with flat joint indices (player-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDims {
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    pub n_u1: usize,
    pub n_u2: usize,
}

/// Everything needed to build a [`GameModel`], fully expanded per stage.
///
/// All alphabets are index-aligned with the kernel/cost tables; name
/// resolution happens before this point.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub horizon: usize,
    pub discount: f64,
    /// States per stage, `horizon + 1` entries.
    pub states: Vec<Alphabet>,
    /// Team-1 private-info alphabets per stage per player, `horizon + 1` entries.
    pub private1: Vec<Vec<Alphabet>>,
    pub private2: Vec<Vec<Alphabet>>,
    /// Team-1 action alphabets per stage per player, `horizon` entries.
    pub actions1: Vec<Vec<Alphabet>>,
    pub actions2: Vec<Vec<Alphabet>>,
    /// Common-increment alphabets, `horizon` entries (`increments[t]` holds
    /// the symbols of `z` emitted by the stage-`t` kernel).
    pub increments: Vec<Alphabet>,
    /// Kernel rows per stage, indexed by `(cell * n_u1 + u1) * n_u2 + u2`.
    pub kernel: Vec<Vec<Vec<KernelTerm>>>,
    /// Stage costs, indexed by `(x * n_u1 + u1) * n_u2 + u2`.
    pub cost: Vec<Vec<f64>>,
    /// Initial distribution over stage-0 cells.
    pub initial_belief: Vec<f64>,
    pub cib_control: CibControl,
    /// Declared projection `z -> u2` per stage, if any.
    pub u2_projection: Option<Vec<Vec<usize>>>,
    /// Serialization hint: stage data was declared once and repeated.
    pub homogeneous: bool,
}

/// A validated-shape finite game. Immutable after construction; safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct GameModel {
    parts: ModelParts,
    dims: Vec<Dims>,
    action_dims: Vec<ActionDims>,
    /// Reachable support (sorted cell indices) per stage, propagated from
    /// the initial belief through kernel supports.
    supports: Vec<Vec<usize>>,
}

/// One violated model invariant, reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Dotted path of the offending field, with indices.
    pub field: String,
    pub message: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Result of [`check_one_sided`].
#[derive(Debug, Clone, PartialEq)]
pub enum OneSidedDiagnosis {
    Holds,
    /// Team-2 player `player` has non-singleton private info at `stage`.
    FailsPrivateInfo { stage: usize, player: usize },
    /// No `u2_projection` was declared in the game file.
    FailsMissingProjection,
    /// Increment `z` at `stage` is reachable under two distinct Team-2
    /// actions (or contradicts the declared projection).
    FailsProjection { stage: usize, z: usize, declared_u2: usize, seen_u2: usize },
}

impl OneSidedDiagnosis {
    pub fn holds(&self) -> bool {
        matches!(self, OneSidedDiagnosis::Holds)
    }
}

impl GameModel {
    /// Builds a model from expanded parts, checking structural consistency
    /// (array lengths and index ranges). Numeric invariants are checked by
    /// [`validate`], not here.
    pub fn from_parts(mut parts: ModelParts) -> Result<GameModel, Error> {
        let t = parts.horizon;
        if t == 0 {
            return Err(Error::Mismatch("horizon must be at least 1"));
        }
        let lens_ok = parts.states.len() == t + 1
            && parts.private1.len() == t + 1
            && parts.private2.len() == t + 1
            && parts.actions1.len() == t
            && parts.actions2.len() == t
            && parts.increments.len() == t
            && parts.kernel.len() == t
            && parts.cost.len() == t;
        if !lens_ok {
            return Err(Error::Mismatch("per-stage array lengths do not match horizon"));
        }
        let n1 = parts.private1[0].len();
        let n2 = parts.private2[0].len();
        if n1 == 0 || n2 == 0 {
            return Err(Error::Mismatch("each team needs at least one player"));
        }
        if parts.private1.iter().any(|v| v.len() != n1)
            || parts.actions1.iter().any(|v| v.len() != n1)
            || parts.private2.iter().any(|v| v.len() != n2)
            || parts.actions2.iter().any(|v| v.len() != n2)
        {
            return Err(Error::Mismatch("player counts differ across stages"));
        }

        let dims: Vec<Dims> = (0..=t)
            .map(|s| {
                Dims::new(
                    parts.states[s].len(),
                    parts.private1[s].iter().map(Alphabet::len).collect(),
                    parts.private2[s].iter().map(Alphabet::len).collect(),
                )
            })
            .collect();
        let action_dims: Vec<ActionDims> = (0..t)
            .map(|s| {
                let u1: Vec<usize> = parts.actions1[s].iter().map(Alphabet::len).collect();
                let u2: Vec<usize> = parts.actions2[s].iter().map(Alphabet::len).collect();
                let n_u1 = u1.iter().product::<usize>().max(1);
                let n_u2 = u2.iter().product::<usize>().max(1);
                ActionDims { u1, u2, n_u1, n_u2 }
            })
            .collect();

        if parts.initial_belief.len() != dims[0].n_cells {
            return Err(Error::Mismatch("initial belief length does not match stage-0 cells"));
        }
        for s in 0..t {
            let n_inputs = dims[s].n_cells * action_dims[s].n_u1 * action_dims[s].n_u2;
            if parts.kernel[s].len() != n_inputs {
                return Err(Error::Mismatch("kernel row count does not match input space"));
            }
            if parts.cost[s].len() != dims[s].n_states * action_dims[s].n_u1 * action_dims[s].n_u2 {
                return Err(Error::Mismatch("cost table length does not match (x, u1, u2) space"));
            }
            let n_out_cells = dims[s + 1].n_cells as u32;
            let n_z = parts.increments[s].len() as u32;
            for row in parts.kernel[s].iter_mut() {
                for term in row.iter() {
                    if term.cell >= n_out_cells || term.z >= n_z {
                        return Err(Error::Mismatch("kernel term indexes outside next-stage space"));
                    }
                }
                // Canonical row order, duplicates merged.
                row.sort_by_key(|term| (term.z, term.cell));
                row.dedup_by(|b, a| {
                    if a.z == b.z && a.cell == b.cell {
                        a.p += b.p;
                        true
                    } else {
                        false
                    }
                });
            }
            if let Some(proj) = &parts.u2_projection {
                if proj.len() != t || proj[s].len() != parts.increments[s].len() {
                    return Err(Error::Mismatch("u2_projection shape does not match increments"));
                }
                if proj[s].iter().any(|&u| u >= action_dims[s].n_u2) {
                    return Err(Error::Mismatch("u2_projection maps to an out-of-range action"));
                }
            }
        }

        let supports = compute_supports(&parts, &dims, &action_dims);
        Ok(GameModel {
            parts,
            dims,
            action_dims,
            supports,
        })
    }

    pub fn horizon(&self) -> usize {
        self.parts.horizon
    }

    pub fn discount(&self) -> f64 {
        self.parts.discount
    }

    pub fn cib_control(&self) -> CibControl {
        self.parts.cib_control
    }

    pub fn is_homogeneous(&self) -> bool {
        self.parts.homogeneous
    }

    pub fn num_players(&self, team: Team) -> usize {
        match team {
            Team::One => self.parts.private1[0].len(),
            Team::Two => self.parts.private2[0].len(),
        }
    }

    pub fn dims(&self, stage: usize) -> &Dims {
        &self.dims[stage]
    }

    pub fn action_dims(&self, stage: usize) -> &ActionDims {
        &self.action_dims[stage]
    }

    pub fn states(&self, stage: usize) -> &Alphabet {
        &self.parts.states[stage]
    }

    pub fn actions(&self, stage: usize, team: Team, player: usize) -> &Alphabet {
        match team {
            Team::One => &self.parts.actions1[stage][player],
            Team::Two => &self.parts.actions2[stage][player],
        }
    }

    pub fn private_info(&self, stage: usize, team: Team, player: usize) -> &Alphabet {
        match team {
            Team::One => &self.parts.private1[stage][player],
            Team::Two => &self.parts.private2[stage][player],
        }
    }

    /// All per-player private-info alphabets of one team at one stage.
    pub fn private_alphabets(&self, stage: usize, team: Team) -> &[Alphabet] {
        match team {
            Team::One => &self.parts.private1[stage],
            Team::Two => &self.parts.private2[stage],
        }
    }

    /// All per-player action alphabets of one team at one stage.
    pub fn action_alphabets(&self, stage: usize, team: Team) -> &[Alphabet] {
        match team {
            Team::One => &self.parts.actions1[stage],
            Team::Two => &self.parts.actions2[stage],
        }
    }

    pub fn increments(&self, stage: usize) -> &Alphabet {
        &self.parts.increments[stage]
    }

    pub fn initial_weights(&self) -> &[f64] {
        &self.parts.initial_belief
    }

    pub fn u2_projection(&self, stage: usize) -> Option<&[usize]> {
        self.parts.u2_projection.as_ref().map(|p| p[stage].as_slice())
    }

    /// Discount weight `discount^stage` applied to the stage cost.
    pub fn discount_weight(&self, stage: usize) -> f64 {
        libm::pow(self.parts.discount, stage as f64)
    }

    /// Undiscounted stage cost `c(x, u1, u2)` with flat joint action indices.
    #[inline]
    pub fn cost(&self, stage: usize, x: usize, u1: usize, u2: usize) -> f64 {
        let ad = &self.action_dims[stage];
        self.parts.cost[stage][(x * ad.n_u1 + u1) * ad.n_u2 + u2]
    }

    /// Kernel row (sorted by `(z, cell)`) for flat `(cell, u1, u2)`.
    #[inline]
    pub fn kernel_terms(&self, stage: usize, cell: usize, u1: usize, u2: usize) -> &[KernelTerm] {
        let ad = &self.action_dims[stage];
        &self.parts.kernel[stage][(cell * ad.n_u1 + u1) * ad.n_u2 + u2]
    }

    /// Reachable support at a stage: sorted cell indices that carry positive
    /// probability under some play, starting from the initial belief.
    pub fn support(&self, stage: usize) -> &[usize] {
        &self.supports[stage]
    }

    /// Largest absolute stage cost over all stages (undiscounted).
    pub fn max_abs_cost(&self) -> f64 {
        let mut m = 0.0f64;
        for table in &self.parts.cost {
            for &c in table {
                m = m.max(c.abs());
            }
        }
        m
    }

    /// An upper bound on any value: `sum_t discount^t * max|c|`.
    pub fn value_bound(&self) -> f64 {
        let m = self.max_abs_cost();
        (0..self.horizon()).map(|s| self.discount_weight(s) * m).sum()
    }

    /// The stored kernel row, copied, as a dense distribution over
    /// `(x', p1', p2', z)` indexed `cell' * n_z + z`.
    pub fn kernel_row(
        &self,
        stage: usize,
        x: usize,
        p1: usize,
        p2: usize,
        u1: usize,
        u2: usize,
    ) -> Result<Vec<f64>, Error> {
        if stage >= self.horizon() {
            return Err(Error::IndexOutOfRange { what: "stage", index: stage, len: self.horizon() });
        }
        let d = &self.dims[stage];
        let ad = &self.action_dims[stage];
        if x >= d.n_states {
            return Err(Error::IndexOutOfRange { what: "state", index: x, len: d.n_states });
        }
        if p1 >= d.n_p1 {
            return Err(Error::IndexOutOfRange { what: "p1", index: p1, len: d.n_p1 });
        }
        if p2 >= d.n_p2 {
            return Err(Error::IndexOutOfRange { what: "p2", index: p2, len: d.n_p2 });
        }
        if u1 >= ad.n_u1 {
            return Err(Error::IndexOutOfRange { what: "u1", index: u1, len: ad.n_u1 });
        }
        if u2 >= ad.n_u2 {
            return Err(Error::IndexOutOfRange { what: "u2", index: u2, len: ad.n_u2 });
        }
        let n_z = self.parts.increments[stage].len();
        let mut out = vec![0.0; self.dims[stage + 1].n_cells * n_z];
        for term in self.kernel_terms(stage, d.cell(x, p1, p2), u1, u2) {
            out[term.cell as usize * n_z + term.z as usize] += term.p;
        }
        Ok(out)
    }
}

fn compute_supports(parts: &ModelParts, dims: &[Dims], action_dims: &[ActionDims]) -> Vec<Vec<usize>> {
    let t = parts.horizon;
    let mut supports = Vec::with_capacity(t + 1);
    let mut current: Vec<usize> = parts
        .initial_belief
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, _)| i)
        .collect();
    if current.is_empty() {
        current = (0..dims[0].n_cells).collect();
    }
    supports.push(current.clone());
    for s in 0..t {
        let ad = &action_dims[s];
        let mut next = vec![false; dims[s + 1].n_cells];
        for &cell in &current {
            for u1 in 0..ad.n_u1 {
                for u2 in 0..ad.n_u2 {
                    let row = &parts.kernel[s][(cell * ad.n_u1 + u1) * ad.n_u2 + u2];
                    for term in row {
                        if term.p > 0.0 {
                            next[term.cell as usize] = true;
                        }
                    }
                }
            }
        }
        current = next
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect();
        if current.is_empty() {
            current = (0..dims[s + 1].n_cells).collect();
        }
        supports.push(current.clone());
    }
    supports
}

const ROW_SUM_TOL: f64 = 1e-12;

/// Checks every numeric model invariant and returns all findings, not just
/// the first. An empty list means the model is valid.
pub fn validate(model: &GameModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let t = model.horizon();

    if !(model.discount() > 0.0 && model.discount() <= 1.0) {
        out.push(Violation {
            field: "discount".to_string(),
            message: format!("must be in (0, 1], got {}", model.discount()),
        });
    }

    for s in 0..=t {
        if model.states(s).is_empty() {
            out.push(Violation {
                field: format!("states[t={s}]"),
                message: "alphabet is empty".to_string(),
            });
        }
        check_alphabet_unique(&mut out, format!("states[t={s}]"), model.states(s));
    }
    for s in 0..t {
        for team in [Team::One, Team::Two] {
            let tn = if team == Team::One { 1 } else { 2 };
            for j in 0..model.num_players(team) {
                let a = model.actions(s, team, j);
                if a.is_empty() {
                    out.push(Violation {
                        field: format!("actions[t={s}][team{tn}][{j}]"),
                        message: "alphabet is empty".to_string(),
                    });
                }
                check_alphabet_unique(&mut out, format!("actions[t={s}][team{tn}][{j}]"), a);
            }
        }
        check_alphabet_unique(&mut out, format!("common_increments[t={s}]"), model.increments(s));
    }

    // Kernel rows: nonnegative entries, unit mass.
    for s in 0..t {
        let d = model.dims(s);
        let ad = model.action_dims(s);
        for cell in 0..d.n_cells {
            for u1 in 0..ad.n_u1 {
                for u2 in 0..ad.n_u2 {
                    let row = model.kernel_terms(s, cell, u1, u2);
                    let mut sum = 0.0;
                    let mut negative = false;
                    for term in row {
                        sum += term.p;
                        if term.p < 0.0 {
                            negative = true;
                        }
                    }
                    let (x, p1, p2) = d.split_cell(cell);
                    let locus = format!("kernel[t={s}][x={x},p1={p1},p2={p2},u1={u1},u2={u2}]");
                    if negative {
                        out.push(Violation {
                            field: locus.clone(),
                            message: "row has a negative entry".to_string(),
                        });
                    }
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        out.push(Violation {
                            field: locus,
                            message: format!("row sums to {sum}, expected 1"),
                        });
                    }
                }
            }
        }
    }

    let init_sum: f64 = model.initial_weights().iter().sum();
    if (init_sum - 1.0).abs() > ROW_SUM_TOL {
        out.push(Violation {
            field: "initial_belief".to_string(),
            message: format!("sums to {init_sum}, expected 1"),
        });
    }
    if model.initial_weights().iter().any(|&w| w < 0.0) {
        out.push(Violation {
            field: "initial_belief".to_string(),
            message: "has a negative entry".to_string(),
        });
    }

    if model.cib_control() == CibControl::Team1Only {
        let diag = check_one_sided(model);
        if !diag.holds() {
            out.push(Violation {
                field: "cib_control".to_string(),
                message: format!("declared team1_only but the one-sided condition fails: {diag:?}"),
            });
        }
    }

    out
}

fn check_alphabet_unique(out: &mut Vec<Violation>, field: String, a: &Alphabet) {
    if a.has_duplicates() {
        out.push(Violation {
            field,
            message: "alphabet has duplicate symbols".to_string(),
        });
    }
}

/// Checks the structural condition for one-sided CIB control: (a) Team 2 has
/// no private information, and (b) Team 2's joint action is recoverable from
/// the common increment through the declared `u2_projection`. Under (a)+(b)
/// the Team-2 factor cancels from the belief update.
pub fn check_one_sided(model: &GameModel) -> OneSidedDiagnosis {
    let t = model.horizon();
    for s in 0..=t {
        for j in 0..model.num_players(Team::Two) {
            if model.private_info(s, Team::Two, j).len() != 1 {
                return OneSidedDiagnosis::FailsPrivateInfo { stage: s, player: j };
            }
        }
    }
    for s in 0..t {
        let Some(proj) = model.u2_projection(s) else {
            return OneSidedDiagnosis::FailsMissingProjection;
        };
        let d = model.dims(s);
        let ad = model.action_dims(s);
        for cell in 0..d.n_cells {
            for u1 in 0..ad.n_u1 {
                for u2 in 0..ad.n_u2 {
                    for term in model.kernel_terms(s, cell, u1, u2) {
                        if term.p > 0.0 && proj[term.z as usize] != u2 {
                            return OneSidedDiagnosis::FailsProjection {
                                stage: s,
                                z: term.z as usize,
                                declared_u2: proj[term.z as usize],
                                seen_u2: u2,
                            };
                        }
                    }
                }
            }
        }
    }
    OneSidedDiagnosis::Holds
}

/// Returns a built-in example game.
///
/// Available: `defender_attacker` (two entities under attack, a signaling
/// player and a defender against an attacker; T=15, discount 0.9),
/// `zero_game` (single state, zero cost), `coin_signal` (one-shot matching
/// pennies on a privately observed coin).
pub fn builtin_example(name: &str) -> Result<GameModel, Error> {
    match name {
        "defender_attacker" => Ok(defender_attacker()),
        "zero_game" => Ok(zero_game()),
        "coin_signal" => Ok(coin_signal()),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// Names accepted by [`builtin_example`].
pub const BUILTIN_NAMES: [&str; 3] = ["defender_attacker", "zero_game", "coin_signal"];

/// Replicates homogeneous stage data across the horizon.
pub struct HomogeneousSpec {
    pub horizon: usize,
    pub discount: f64,
    pub states: Alphabet,
    pub private1: Vec<Alphabet>,
    pub private2: Vec<Alphabet>,
    pub actions1: Vec<Alphabet>,
    pub actions2: Vec<Alphabet>,
    pub increments: Alphabet,
    pub kernel: Vec<Vec<KernelTerm>>,
    pub cost: Vec<f64>,
    pub initial_belief: Vec<f64>,
    pub cib_control: CibControl,
    pub u2_projection: Option<Vec<usize>>,
}

impl HomogeneousSpec {
    pub fn into_model(self) -> Result<GameModel, Error> {
        let t = self.horizon;
        let parts = ModelParts {
            horizon: t,
            discount: self.discount,
            states: vec![self.states; t + 1],
            private1: vec![self.private1; t + 1],
            private2: vec![self.private2; t + 1],
            actions1: vec![self.actions1; t],
            actions2: vec![self.actions2; t],
            increments: vec![self.increments; t],
            kernel: vec![self.kernel; t],
            cost: vec![self.cost; t],
            initial_belief: self.initial_belief,
            cib_control: self.cib_control,
            u2_projection: self.u2_projection.map(|p| vec![p; t]),
            homogeneous: true,
        };
        GameModel::from_parts(parts)
    }
}

/// The defender/attacker signaling game.
///
/// States `0..3` are (l,a), (r,a), (l,p), (r,p): which of two entities is
/// vulnerable, and whether the attacker is active or passive. Player 1 of
/// Team 1 observes the state and can only signal through its action; Player
/// 2 defends one entity; the single attacker in Team 2 launches a targeted
/// attack on l (`alpha`), on r (`beta`), or a blanket attack (`mu`). The
/// common increment reveals the active/passive component of the next state
/// plus everyone's actions, so only Team 1 controls the belief.
fn defender_attacker() -> GameModel {
    let states = Alphabet::from_strs(&["0", "1", "2", "3"]);
    let t1_act = Alphabet::from_strs(&["alpha", "beta"]);
    let t2_act = Alphabet::from_strs(&["alpha", "beta", "mu"]);
    let none = Alphabet::from_strs(&["none"]);

    // P[x' | x, u2], rows by u2 then x.
    let trans: [[[f64; 4]; 4]; 3] = [
        // u2 = alpha (targeted attack on l)
        [
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.15, 0.15, 0.7, 0.0],
            [0.15, 0.15, 0.0, 0.7],
        ],
        // u2 = beta (targeted attack on r)
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0, 0.0],
            [0.15, 0.15, 0.7, 0.0],
            [0.15, 0.15, 0.0, 0.7],
        ],
        // u2 = mu (blanket attack)
        [
            [0.7, 0.0, 0.3, 0.0],
            [0.0, 0.7, 0.0, 0.3],
            [0.15, 0.15, 0.7, 0.0],
            [0.15, 0.15, 0.0, 0.7],
        ],
    ];
    // c(x, u12, u2), rows by (u12, u2).
    let cost_rows: [((usize, usize), [f64; 4]); 6] = [
        ((0, 0), [15.0, 0.0, 0.0, 0.0]),
        ((0, 1), [0.0, 15.0, 0.0, 0.0]),
        ((0, 2), [10.0, 20.0, 0.0, 0.0]),
        ((1, 0), [15.0, 0.0, 0.0, 0.0]),
        ((1, 1), [0.0, 15.0, 0.0, 0.0]),
        ((1, 2), [20.0, 10.0, 0.0, 0.0]),
    ];

    // z = (activity(x'), u11, u12, u2), activity-major.
    let n_z = 2 * 2 * 2 * 3;
    let mut z_symbols = Vec::with_capacity(n_z);
    for y in ["act", "pas"] {
        for u11 in ["alpha", "beta"] {
            for u12 in ["alpha", "beta"] {
                for u2 in ["alpha", "beta", "mu"] {
                    z_symbols.push(format!("{y}.{u11}.{u12}.{u2}"));
                }
            }
        }
    }
    let z_index = |y: usize, u11: usize, u12: usize, u2: usize| ((y * 2 + u11) * 2 + u12) * 3 + u2;

    // Cells: (x, p11, p12=none, p2=none) -> flat (x * 4 + p11).
    // The kernel ignores p11 (transitions depend on x only) and forces
    // p11' = x', so reachable beliefs stay on the diagonal cells.
    let n_cells = 4 * 4;
    let n_u1 = 4;
    let n_u2 = 3;
    let mut kernel = vec![Vec::new(); n_cells * n_u1 * n_u2];
    for (x, _) in trans[0].iter().enumerate() {
        for p11 in 0..4usize {
            let cell = x * 4 + p11;
            for u11 in 0..2usize {
                for u12 in 0..2usize {
                    let u1 = u11 * 2 + u12;
                    for u2 in 0..3usize {
                        let mut terms = Vec::new();
                        for (x_next, &p) in trans[u2][x].iter().enumerate() {
                            if p > 0.0 {
                                let y = if x_next < 2 { 0 } else { 1 };
                                terms.push(KernelTerm {
                                    z: z_index(y, u11, u12, u2) as u32,
                                    cell: (x_next * 4 + x_next) as u32,
                                    p,
                                });
                            }
                        }
                        kernel[(cell * n_u1 + u1) * n_u2 + u2] = terms;
                    }
                }
            }
        }
    }

    let mut cost = vec![0.0; 4 * n_u1 * n_u2];
    for ((u12, u2), by_state) in cost_rows {
        for u11 in 0..2usize {
            let u1 = u11 * 2 + u12;
            for (x, &c) in by_state.iter().enumerate() {
                cost[(x * n_u1 + u1) * n_u2 + u2] = c;
            }
        }
    }

    let mut initial = vec![0.0; n_cells];
    initial[0] = 0.5; // (x=0, p11=0)
    initial[4 + 1] = 0.5; // (x=1, p11=1)

    let mut u2_projection = vec![0usize; n_z];
    for (z, proj) in u2_projection.iter_mut().enumerate() {
        *proj = z % 3;
    }

    HomogeneousSpec {
        horizon: 15,
        discount: 0.9,
        states: states.clone(),
        private1: vec![states, none.clone()],
        private2: vec![none],
        actions1: vec![t1_act.clone(), t1_act],
        actions2: vec![t2_act],
        increments: Alphabet::new(z_symbols),
        kernel,
        cost,
        initial_belief: initial,
        cib_control: CibControl::Team1Only,
        u2_projection: Some(u2_projection),
    }
    .into_model()
    .expect("builtin defender_attacker must build")
}

/// Single state, single action per side, zero cost everywhere.
fn zero_game() -> GameModel {
    let one = Alphabet::from_strs(&["s"]);
    let none = Alphabet::from_strs(&["none"]);
    let act = Alphabet::from_strs(&["a"]);
    let z = Alphabet::from_strs(&["z"]);
    HomogeneousSpec {
        horizon: 3,
        discount: 1.0,
        states: one,
        private1: vec![none.clone()],
        private2: vec![none],
        actions1: vec![act.clone()],
        actions2: vec![act],
        increments: z,
        kernel: vec![vec![KernelTerm { z: 0, cell: 0, p: 1.0 }]],
        cost: vec![0.0],
        initial_belief: vec![1.0],
        cib_control: CibControl::Team1Only,
        u2_projection: Some(vec![0]),
    }
    .into_model()
    .expect("builtin zero_game must build")
}

/// One-shot matching pennies on a hidden fair coin: the Team-1 player sees
/// the coin, both sides pick heads or tails, and Team 1 pays 1 whenever the
/// picks match. The hidden coin makes the belief space nontrivial while the
/// stage game keeps the classic mixed value of 0.5.
fn coin_signal() -> GameModel {
    let states = Alphabet::from_strs(&["h", "t"]);
    let act = Alphabet::from_strs(&["h", "t"]);
    let none = Alphabet::from_strs(&["none"]);
    let mut z_symbols = Vec::new();
    for u1 in ["h", "t"] {
        for u2 in ["h", "t"] {
            z_symbols.push(format!("{u1}.{u2}"));
        }
    }

    // Cells: (x, p11) flat x * 2 + p11; diagonal support.
    let n_cells = 4;
    let mut kernel = vec![Vec::new(); n_cells * 2 * 2];
    for x in 0..2usize {
        for p11 in 0..2usize {
            let cell = x * 2 + p11;
            for u1 in 0..2usize {
                for u2 in 0..2usize {
                    kernel[(cell * 2 + u1) * 2 + u2] = vec![KernelTerm {
                        z: (u1 * 2 + u2) as u32,
                        cell: (x * 2 + x) as u32,
                        p: 1.0,
                    }];
                }
            }
        }
    }
    let mut cost = vec![0.0; 2 * 2 * 2];
    for x in 0..2usize {
        for u1 in 0..2usize {
            for u2 in 0..2usize {
                cost[(x * 2 + u1) * 2 + u2] = if u1 == u2 { 1.0 } else { 0.0 };
            }
        }
    }
    let mut initial = vec![0.0; n_cells];
    initial[0] = 0.5;
    initial[3] = 0.5;

    HomogeneousSpec {
        horizon: 1,
        discount: 1.0,
        states: states.clone(),
        private1: vec![states],
        private2: vec![none],
        actions1: vec![act.clone()],
        actions2: vec![act],
        increments: Alphabet::new(z_symbols),
        kernel,
        cost,
        initial_belief: initial,
        cib_control: CibControl::Team1Only,
        u2_projection: Some(vec![0, 1, 0, 1]),
    }
    .into_model()
    .expect("builtin coin_signal must build")
}
