//! Brute-force ground truth for tiny instances.
//!
//! `brute_force_upper` runs the exact min-max recursion on the tree of
//! reachable beliefs with Team 1 restricted to a simplex grid of
//! prescriptions (the inner maximizer stays exact over pure prescriptions).
//! `brute_force_best_response` is the exact best-response recursion over
//! the common-history tree, collapsed onto beliefs. Both enforce hard size
//! bounds and exist to cross-check the sampled-grid solvers.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::belief::{extended, initial_belief, Belief, ZERO_PROB_EPS};
use crate::error::Error;
use crate::model::{Alphabet, CibControl, GameModel, HomogeneousSpec, KernelTerm, Team};
use crate::prescriptions::{enumerate_pure_capped, Prescription};
use crate::rng::SplitMix64;
use crate::strategy::Team1Policy;

const MAX_HORIZON: usize = 3;
const MAX_CELLS: usize = 6;
const MAX_ACTIONS: usize = 3;
const MAX_REACHABLE: usize = 10_000;
const MAX_BR_NODES: usize = 100_000;
const MAX_GAMMA_GRID: u128 = 2_000_000;

fn check_small(model: &GameModel) -> Result<(), Error> {
    if model.horizon() > MAX_HORIZON {
        return Err(Error::SizeBounds("horizon above 3"));
    }
    for s in 0..=model.horizon() {
        if model.dims(s).n_cells > MAX_CELLS {
            return Err(Error::SizeBounds("more than 6 joint cells"));
        }
    }
    for s in 0..model.horizon() {
        for team in [Team::One, Team::Two] {
            for j in 0..model.num_players(team) {
                if model.actions(s, team, j).len() > MAX_ACTIONS {
                    return Err(Error::SizeBounds("action alphabet above 3"));
                }
            }
        }
    }
    Ok(())
}

/// All simplex grid points with denominator `m` over `width` outcomes.
fn row_grid(m: usize, width: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    let mut parts = vec![0usize; width];
    fn rec(m: usize, parts: &mut [usize], at: usize, rows: &mut Vec<Vec<f64>>, denom: usize) {
        if at == parts.len() - 1 {
            parts[at] = m;
            rows.push(parts.iter().map(|&c| c as f64 / denom as f64).collect());
            return;
        }
        for v in (0..=m).rev() {
            parts[at] = v;
            rec(m - v, parts, at + 1, rows, denom);
        }
    }
    rec(m, &mut parts, 0, &mut rows, m);
    rows
}

/// Team-1 prescriptions on the per-row simplex grid with denominator `m`.
fn gamma1_grid(model: &GameModel, stage: usize, m: usize) -> Result<Vec<Prescription>, Error> {
    let mut row_options: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut layout: Vec<(usize, usize)> = Vec::new(); // (player, p)
    let mut total: u128 = 1;
    for j in 0..model.num_players(Team::One) {
        let n_p = model.private_info(stage, Team::One, j).len();
        let n_u = model.actions(stage, Team::One, j).len();
        let grid = row_grid(m, n_u);
        for p in 0..n_p {
            total = total.saturating_mul(grid.len() as u128);
            layout.push((j, p));
            row_options.push(grid.clone());
        }
    }
    if total > MAX_GAMMA_GRID {
        return Err(Error::SizeBounds("Team-1 prescription grid too large"));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut odometer = vec![0usize; layout.len()];
    loop {
        let mut presc = Prescription::uniform(model, Team::One, stage);
        for (slot, &(j, p)) in layout.iter().enumerate() {
            presc.rows[j][p] = row_options[slot][odometer[slot]].clone();
        }
        out.push(presc);
        let mut i = layout.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            odometer[i] += 1;
            if odometer[i] < row_options[i].len() {
                break;
            }
            odometer[i] = 0;
        }
    }
}

fn bits_key(weights: &[f64]) -> Vec<u64> {
    weights.iter().map(|w| w.to_bits()).collect()
}

/// Exact upper (min-max) value at the initial belief, with Team 1
/// restricted to the `m_presc`-denominator grid and Team 2 exact over pure
/// prescriptions. No interpolation: the recursion visits exact reachable
/// beliefs.
pub fn brute_force_upper(model: &GameModel, m_presc: usize) -> Result<f64, Error> {
    check_small(model)?;
    if m_presc == 0 {
        return Err(Error::Mismatch("m_presc must be positive"));
    }
    let mut memo: Vec<BTreeMap<Vec<u64>, f64>> = vec![BTreeMap::new(); model.horizon()];
    let mut visited = 0usize;
    let init = initial_belief(model);
    bf_upper(model, m_presc, 0, &init.weights, &mut memo, &mut visited)
}

fn bf_upper(
    model: &GameModel,
    m_presc: usize,
    stage: usize,
    weights: &[f64],
    memo: &mut Vec<BTreeMap<Vec<u64>, f64>>,
    visited: &mut usize,
) -> Result<f64, Error> {
    if stage == model.horizon() {
        return Ok(0.0);
    }
    let key = bits_key(weights);
    if let Some(&v) = memo[stage].get(&key) {
        return Ok(v);
    }
    *visited += 1;
    if *visited > MAX_REACHABLE {
        return Err(Error::SizeBounds("reachable belief count above 10^4"));
    }
    let pures2 = enumerate_pure_capped(model, Team::Two, stage, 1_000)?;
    let grid = gamma1_grid(model, stage, m_presc)?;
    let n_next = model.dims(stage + 1).n_cells;
    let mut best = f64::INFINITY;
    for g1 in &grid {
        let mut inner = f64::NEG_INFINITY;
        for q2 in &pures2 {
            let g2 = q2.lift();
            let joint = extended::joint_transform_scaled(model, stage, weights, g1, &g2);
            let mut v = extended::stage_cost_scaled(model, stage, weights, g1, &g2);
            for z in 0..joint.n_z {
                let slice = joint.slice(z);
                let mass: f64 = slice.iter().sum();
                if mass > ZERO_PROB_EPS {
                    let mut successor = vec![0.0; n_next];
                    for (c, &w) in slice.iter().enumerate() {
                        successor[c] = w / mass;
                    }
                    v += mass * bf_upper(model, m_presc, stage + 1, &successor, memo, visited)?;
                }
            }
            if v > inner {
                inner = v;
            }
        }
        if inner < best {
            best = inner;
        }
    }
    memo[stage].insert(key, best);
    Ok(best)
}

/// Exact best-response value of Team 2 against a fixed CIB-based Team-1
/// policy, by backward recursion over the common-history tree (nodes with
/// equal beliefs merged). Requires one-sided CIB control.
pub fn brute_force_best_response(
    model: &GameModel,
    policy: &dyn Team1Policy,
) -> Result<f64, Error> {
    if model.cib_control() != CibControl::Team1Only {
        return Err(Error::UnsupportedStructure(
            "exact best response needs cib_control = team1_only",
        ));
    }
    if model.horizon() > MAX_HORIZON {
        return Err(Error::SizeBounds("horizon above 3"));
    }
    for s in 0..model.horizon() {
        if model.increments(s).len() > 12 {
            return Err(Error::SizeBounds("more than 12 common increments"));
        }
    }
    let mut memo: Vec<BTreeMap<Vec<u64>, f64>> = vec![BTreeMap::new(); model.horizon()];
    let mut visited = 0usize;
    let init = initial_belief(model);
    bf_br(model, policy, 0, &init.weights, &mut memo, &mut visited)
}

fn bf_br(
    model: &GameModel,
    policy: &dyn Team1Policy,
    stage: usize,
    weights: &[f64],
    memo: &mut Vec<BTreeMap<Vec<u64>, f64>>,
    visited: &mut usize,
) -> Result<f64, Error> {
    if stage == model.horizon() {
        return Ok(0.0);
    }
    let key = bits_key(weights);
    if let Some(&v) = memo[stage].get(&key) {
        return Ok(v);
    }
    *visited += 1;
    if *visited > MAX_BR_NODES {
        return Err(Error::SizeBounds("best-response tree above 10^5 nodes"));
    }
    let pi = Belief { stage, weights: weights.to_vec() };
    let g1 = policy.prescription(model, &pi)?;
    let pures2 = enumerate_pure_capped(model, Team::Two, stage, 10_000)?;
    let n_next = model.dims(stage + 1).n_cells;
    let mut best = f64::NEG_INFINITY;
    for q2 in &pures2 {
        let g2 = q2.lift();
        let joint = extended::joint_transform_scaled(model, stage, weights, &g1, &g2);
        let mut v = extended::stage_cost_scaled(model, stage, weights, &g1, &g2);
        for z in 0..joint.n_z {
            let slice = joint.slice(z);
            let mass: f64 = slice.iter().sum();
            if mass > ZERO_PROB_EPS {
                let mut successor = vec![0.0; n_next];
                for (c, &w) in slice.iter().enumerate() {
                    successor[c] = w / mass;
                }
                v += mass * bf_br(model, policy, stage + 1, &successor, memo, visited)?;
            }
        }
        if v > best {
            best = v;
        }
    }
    memo[stage].insert(key, best);
    Ok(best)
}

/// Seeded miniature game for solver/oracle cross-checks: 2-3 states, binary
/// actions, one player per team on the Team-2 side, one-sided CIB control.
/// Even seeds build a 2-stage game with no private information; odd seeds a
/// 1-stage signaling game where the Team-1 player observes the state.
pub fn random_small_game(seed: u64) -> GameModel {
    let mut rng = SplitMix64::keyed(&[0xC0FFEE, seed]);
    let signaling = seed % 2 == 1;
    let n_states = if signaling { 2 } else { 2 + (seed / 2 % 2) as usize };
    let horizon = if signaling { 1 } else { 2 };

    let state_names: Vec<&str> = ["s0", "s1", "s2"][..n_states].to_vec();
    let states = Alphabet::from_strs(&state_names);
    let none = Alphabet::from_strs(&["none"]);
    let act = Alphabet::from_strs(&["a", "b"]);
    let p1 = if signaling { states.clone() } else { none.clone() };
    let n_p1 = p1.len();
    let n_cells = n_states * n_p1;
    let n_z = 2 * 2 * 2; // (y, u1, u2)
    let z_index = |y: usize, u1: usize, u2: usize| (y * 2 + u1) * 2 + u2;
    let mut z_names = Vec::new();
    for y in 0..2 {
        for u1 in 0..2 {
            for u2 in 0..2 {
                z_names.push(alloc::format!("y{y}.u{u1}.v{u2}"));
            }
        }
    }

    // Random transition rows and observation emissions.
    let mut trans = vec![vec![0.0; n_states]; n_states * 4];
    for row in trans.iter_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = rng.next_range(0.05, 1.0);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    let mut emit = vec![0.0; n_states];
    for e in emit.iter_mut() {
        *e = rng.next_range(0.2, 0.8);
    }

    let mut kernel = vec![Vec::new(); n_cells * 4];
    for x in 0..n_states {
        for p in 0..n_p1 {
            let cell = x * n_p1 + p;
            for u1 in 0..2usize {
                for u2 in 0..2usize {
                    let mut terms = Vec::new();
                    for x_next in 0..n_states {
                        let px = trans[(x * 2 + u1) * 2 + u2][x_next];
                        let p_next = if signaling { x_next } else { 0 };
                        for y in 0..2usize {
                            let py = if y == 0 { emit[x_next] } else { 1.0 - emit[x_next] };
                            terms.push(KernelTerm {
                                z: z_index(y, u1, u2) as u32,
                                cell: (x_next * n_p1 + p_next) as u32,
                                p: px * py,
                            });
                        }
                    }
                    kernel[(cell * 2 + u1) * 2 + u2] = terms;
                }
            }
        }
    }

    let mut cost = vec![0.0; n_states * 4];
    for c in cost.iter_mut() {
        *c = rng.next_range(0.0, 10.0);
    }

    let mut initial = vec![0.0; n_cells];
    let mut sum = 0.0;
    for x in 0..n_states {
        let p = if signaling { x } else { 0 };
        let w = rng.next_range(0.1, 1.0);
        initial[x * n_p1 + p] = w;
        sum += w;
    }
    for w in initial.iter_mut() {
        *w /= sum;
    }

    let u2_projection: Vec<usize> = (0..n_z).map(|z| z % 2).collect();

    HomogeneousSpec {
        horizon,
        discount: 1.0,
        states,
        private1: vec![p1],
        private2: vec![none],
        actions1: vec![act.clone()],
        actions2: vec![act],
        increments: Alphabet::new(z_names),
        kernel,
        cost,
        initial_belief: initial,
        cib_control: CibControl::Team1Only,
        u2_projection: Some(u2_projection),
    }
    .into_model()
    .expect("generated game is structurally sound")
}
