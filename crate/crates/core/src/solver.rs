//! Approximate dynamic programming over a sampled belief space.
//!
//! Value tables are built backward from the terminal stage. At each sampled
//! belief the upper solve runs `min` over Team-1 prescriptions (multi-start
//! projected local search on softmax-parameterized row simplices) against an
//! inner `max` over Team-2 prescriptions. Under one-sided CIB control the
//! stage surrogate is linear in Team 2's product form, so the inner max is
//! exact over the finite pure-prescription set; otherwise pure enumeration
//! is refined by local ascent and the stage is flagged heuristic.
//!
//! The continuation term is evaluated through the un-normalized transform:
//! `sum_z V^(P_j(pi, gamma; z, .))` with the interpolator extended by
//! `V^(alpha q) = alpha V^(q)`, which keeps the surrogate exactly
//! homogeneous in the belief.

use alloc::vec;
use alloc::vec::Vec;

use crate::belief::{self, Belief, ZERO_PROB_EPS};
use crate::error::Error;
use crate::kdtree::KdTree;
use crate::model::{CibControl, GameModel, Team};
use crate::prescriptions::{
    enumerate_pure_capped, pure_count, Prescription, PurePrescription, DEFAULT_PURE_CAP,
};
use crate::rng::SplitMix64;
use crate::runner::{ParallelMap, SerialRunner};

/// Cap on the number of sampled beliefs per stage.
pub const DEFAULT_GRID_CAP: usize = 500_000;

/// Distance below which an interpolation query is served by the stored
/// point exactly.
pub const EXACT_POINT_EPS: f64 = 1e-12;

/// Names one joint cell `(x, p1, p2)` by symbols, so grid refinements can be
/// declared once and resolved at every stage where those symbols exist.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRef {
    pub x: alloc::string::String,
    pub p1: Vec<alloc::string::String>,
    pub p2: Vec<alloc::string::String>,
}

impl CellRef {
    /// Flat cell index at `stage`, if every symbol resolves.
    pub fn resolve(&self, model: &GameModel, stage: usize) -> Option<usize> {
        let d = model.dims(stage);
        let x = model.states(stage).index_of(&self.x)?;
        if self.p1.len() != d.p1.len() || self.p2.len() != d.p2.len() {
            return None;
        }
        let mut p1 = 0usize;
        for (j, sym) in self.p1.iter().enumerate() {
            p1 = p1 * d.p1[j] + model.private_info(stage, Team::One, j).index_of(sym)?;
        }
        let mut p2 = 0usize;
        for (j, sym) in self.p2.iter().enumerate() {
            p2 = p2 * d.p2[j] + model.private_info(stage, Team::Two, j).index_of(sym)?;
        }
        Some(d.cell(x, p1, p2))
    }
}

/// Extra simplex grid over a named face of the belief space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRefinement {
    pub cells: Vec<CellRef>,
    pub m: usize,
}

/// Solver parameters. Identical `(model, cfg)` inputs produce bitwise
/// identical tables regardless of the executor.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Simplex mesh denominator for the per-stage belief grid.
    pub grid_m: usize,
    /// Local-search restarts for the outer player (first is the uniform
    /// prescription, second a greedy myopic one, the rest seeded random).
    pub restarts: usize,
    /// Iteration cap per local search.
    pub max_iters: usize,
    /// Initial step size in logit space.
    pub step_init: f64,
    /// Relative-improvement stopping tolerance.
    pub eps_opt: f64,
    /// Interpolation neighbor count; `None` means `support size + 1`.
    pub interp_k: Option<usize>,
    /// Inverse-distance weight exponent.
    pub interp_power: i32,
    pub seed: u64,
    /// Cap on pure-prescription enumeration.
    pub pure_cap: usize,
    /// Cap on per-stage grid size.
    pub grid_cap: usize,
    /// Extra grid density on named faces.
    pub refinements: Vec<GridRefinement>,
    /// Outer ascent iterations refining Team 2's prescription in the lower
    /// DP (and the inner refinement on models without one-sided control).
    pub refine_iters: usize,
    /// Iteration cap for warm-started inner solves inside the refinement.
    pub quick_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_m: 12,
            restarts: 8,
            max_iters: 500,
            step_init: 0.5,
            eps_opt: 1e-4,
            interp_k: None,
            interp_power: 2,
            seed: 0,
            pure_cap: DEFAULT_PURE_CAP,
            grid_cap: DEFAULT_GRID_CAP,
            refinements: Vec::new(),
            refine_iters: 40,
            quick_iters: 60,
        }
    }
}

/// One solved belief point.
#[derive(Debug, Clone)]
pub struct TablePoint {
    pub belief: Belief,
    pub value: f64,
    /// Optimizing prescription: Team 1's argmin in upper tables, Team 2's
    /// argmax in lower tables.
    pub prescription: Prescription,
}

/// Sampled value function at one stage with a k-nearest-neighbor
/// inverse-L1-distance interpolator.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub stage: usize,
    /// Cells carrying the sampled beliefs (the stage's reachable support).
    pub support: Vec<usize>,
    pub k: usize,
    pub power: i32,
    /// False when the inner maximization was heuristic (no one-sided
    /// control), in which case stored values are lower bounds on the stage
    /// operator.
    pub inner_exact: bool,
    points: Vec<TablePoint>,
    kd: KdTree,
}

impl ValueTable {
    pub fn from_points(
        model: &GameModel,
        stage: usize,
        points: Vec<TablePoint>,
        k: usize,
        power: i32,
        inner_exact: bool,
    ) -> ValueTable {
        let support = model.support(stage).to_vec();
        let mut coords = Vec::with_capacity(points.len() * support.len());
        for p in &points {
            for &cell in &support {
                coords.push(p.belief.weights[cell]);
            }
        }
        ValueTable {
            stage,
            kd: KdTree::build(support.len().max(1), coords),
            support,
            k,
            power,
            inner_exact,
            points,
        }
    }

    pub fn points(&self) -> &[TablePoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and L1 distance of the nearest stored point.
    pub fn nearest(&self, pi: &Belief) -> Result<(usize, f64), Error> {
        if pi.stage != self.stage {
            return Err(Error::StageMismatch { expected: self.stage, got: pi.stage });
        }
        if self.points.is_empty() {
            return Err(Error::Mismatch("value table is empty"));
        }
        let (coords, extra) = self.project(&pi.weights);
        let nn = self.kd.knn(&coords, 1);
        Ok((nn[0].1 as usize, nn[0].0 + extra))
    }

    /// Inverse-distance-weighted average of the `k` nearest stored values;
    /// the stored value itself when the query coincides with a point.
    pub fn interpolate(&self, pi: &Belief) -> Result<f64, Error> {
        if pi.stage != self.stage {
            return Err(Error::StageMismatch { expected: self.stage, got: pi.stage });
        }
        if self.points.is_empty() {
            return Err(Error::Mismatch("value table is empty"));
        }
        let (coords, extra) = self.project(&pi.weights);
        Ok(self.interp_core(&coords, extra))
    }

    /// Extended-domain interpolation: for an un-normalized weight vector
    /// `q`, returns `mass(q) * interpolate(q / mass(q))`, and 0 on
    /// (numerically) zero mass. Exactly degree-one homogeneous.
    pub fn interpolate_scaled(&self, weights: &[f64]) -> f64 {
        let mass: f64 = weights.iter().sum();
        if mass <= ZERO_PROB_EPS || self.points.is_empty() {
            return 0.0;
        }
        let mut coords = Vec::with_capacity(self.support.len());
        let mut on_support = 0.0;
        for &cell in &self.support {
            let w = weights[cell] / mass;
            on_support += w;
            coords.push(w);
        }
        let extra = (1.0 - on_support).max(0.0);
        mass * self.interp_core(&coords, extra)
    }

    fn project(&self, weights: &[f64]) -> (Vec<f64>, f64) {
        let mut coords = Vec::with_capacity(self.support.len());
        let mut on_support = 0.0;
        for &cell in &self.support {
            on_support += weights[cell];
            coords.push(weights[cell]);
        }
        (coords, (1.0 - on_support).max(0.0))
    }

    fn interp_core(&self, coords: &[f64], extra: f64) -> f64 {
        let k = self.k.min(self.points.len()).max(1);
        let nn = self.kd.knn(coords, k);
        let d0 = nn[0].0 + extra;
        if d0 < EXACT_POINT_EPS {
            return self.points[nn[0].1 as usize].value;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &(d, idx) in &nn {
            let w = 1.0 / ipow(d + extra, self.power);
            num += w * self.points[idx as usize].value;
            den += w;
        }
        num / den
    }
}

fn ipow(x: f64, n: i32) -> f64 {
    let mut out = 1.0;
    for _ in 0..n.unsigned_abs() {
        out *= x;
    }
    if n < 0 {
        1.0 / out
    } else {
        out
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul(n - i) / (i + 1);
    }
    out
}

/// All rational grid points with denominator `m` on the simplex over the
/// stage's reachable support (plus the initial belief at stage 0), in
/// deterministic order: compositions of `m` enumerated first-coordinate
/// descending.
pub fn sample_beliefs(model: &GameModel, stage: usize, m: usize) -> Result<Vec<Belief>, Error> {
    sample_beliefs_capped(model, stage, m, DEFAULT_GRID_CAP)
}

pub fn sample_beliefs_capped(
    model: &GameModel,
    stage: usize,
    m: usize,
    cap: usize,
) -> Result<Vec<Belief>, Error> {
    let support = model.support(stage);
    let d = support.len();
    let count = binomial((m + d - 1) as u128, (d - 1) as u128);
    if count > cap as u128 {
        return Err(Error::GridTooLarge { count, cap });
    }
    let n_cells = model.dims(stage).n_cells;
    let mut out = Vec::with_capacity(count as usize);
    let mut parts = vec![0usize; d];
    compositions(m, d, &mut parts, 0, &mut |parts| {
        let mut weights = vec![0.0; n_cells];
        for (i, &cell) in support.iter().enumerate() {
            weights[cell] = parts[i] as f64 / m as f64;
        }
        out.push(Belief { stage, weights });
    });
    if stage == 0 {
        let init = belief::initial_belief(model);
        if !out.iter().any(|b| b.weights == init.weights) {
            out.push(init);
        }
    }
    Ok(out)
}

fn compositions(m: usize, d: usize, parts: &mut [usize], at: usize, emit: &mut impl FnMut(&[usize])) {
    if at == d - 1 {
        parts[at] = m;
        emit(parts);
        return;
    }
    for v in (0..=m).rev() {
        parts[at] = v;
        compositions(m - v, d, parts, at + 1, emit);
    }
}

/// The per-stage grid the solvers use: the base sample plus any refinement
/// faces, deduplicated bit-exactly (first occurrence kept).
pub fn assemble_grid(model: &GameModel, stage: usize, cfg: &SolverConfig) -> Result<Vec<Belief>, Error> {
    let mut grid = sample_beliefs_capped(model, stage, cfg.grid_m, cfg.grid_cap)?;
    let support = model.support(stage);
    let n_cells = model.dims(stage).n_cells;
    for refinement in &cfg.refinements {
        let cells: Option<Vec<usize>> = refinement.cells.iter().map(|c| c.resolve(model, stage)).collect();
        let Some(cells) = cells else { continue };
        if cells.iter().any(|c| !support.contains(c)) {
            continue;
        }
        let d = cells.len();
        let m = refinement.m;
        let count = binomial((m + d - 1) as u128, (d - 1) as u128);
        if count + grid.len() as u128 > cfg.grid_cap as u128 {
            return Err(Error::GridTooLarge {
                count: count + grid.len() as u128,
                cap: cfg.grid_cap,
            });
        }
        let mut parts = vec![0usize; d];
        compositions(m, d, &mut parts, 0, &mut |parts| {
            let mut weights = vec![0.0; n_cells];
            for (i, &cell) in cells.iter().enumerate() {
                weights[cell] = parts[i] as f64 / m as f64;
            }
            grid.push(Belief { stage, weights });
        });
    }
    // Bit-exact dedupe, keep first occurrence.
    let mut seen: Vec<Vec<u64>> = Vec::with_capacity(grid.len());
    let mut unique = Vec::with_capacity(grid.len());
    'outer: for b in grid {
        let key: Vec<u64> = b.weights.iter().map(|w| w.to_bits()).collect();
        for s in &seen {
            if *s == key {
                continue 'outer;
            }
        }
        seen.push(key);
        unique.push(b);
    }
    Ok(unique)
}

/// Result of one stage solve.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub value: f64,
    pub prescription: Prescription,
    /// True when the inner maximization was exact (one-sided control).
    pub inner_exact: bool,
}

// ---------------------------------------------------------------------------
// Stage evaluation engine
// ---------------------------------------------------------------------------

struct CellCtx {
    cell: u32,
    x: u32,
    p1: u32,
    p2: u32,
    w: f64,
}

/// Evaluates the stage surrogate `w^(pi, g1, g2)` for a fixed belief with
/// reusable scratch buffers.
pub(crate) struct StageEval<'a> {
    model: &'a GameModel,
    stage: usize,
    next: Option<&'a ValueTable>,
    n_u1: usize,
    n_u2: usize,
    n_next: usize,
    dw: f64,
    cells: Vec<CellCtx>,
    /// Team-2 joint action per (pure index, p2 flat).
    pure_u2: Vec<Vec<u32>>,
    w1: Vec<f64>,
    slices: Vec<f64>,
    touched: Vec<u32>,
    marked: Vec<bool>,
}

impl<'a> StageEval<'a> {
    pub(crate) fn new(
        model: &'a GameModel,
        stage: usize,
        next: Option<&'a ValueTable>,
        pures2: &[PurePrescription],
    ) -> StageEval<'a> {
        let d = model.dims(stage);
        let ad = model.action_dims(stage);
        let n_z = model.increments(stage).len();
        let n_next = model.dims(stage + 1).n_cells;
        let pure_u2 = pures2
            .iter()
            .map(|q| {
                (0..d.n_p2)
                    .map(|p2| q.joint_action_flat(&d.p2, p2) as u32)
                    .collect()
            })
            .collect();
        StageEval {
            model,
            stage,
            next,
            n_u1: ad.n_u1,
            n_u2: ad.n_u2,
            n_next,
            dw: model.discount_weight(stage),
            cells: Vec::new(),
            pure_u2,
            w1: Vec::new(),
            slices: vec![0.0; n_z * n_next],
            touched: Vec::new(),
            marked: vec![false; n_z],
        }
    }

    pub(crate) fn set_belief(&mut self, weights: &[f64]) {
        let d = self.model.dims(self.stage);
        self.cells.clear();
        for (cell, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                let (x, p1, p2) = d.split_cell(cell);
                self.cells.push(CellCtx {
                    cell: cell as u32,
                    x: x as u32,
                    p1: p1 as u32,
                    p2: p2 as u32,
                    w,
                });
            }
        }
        self.w1.clear();
        self.w1.resize(self.cells.len() * self.n_u1, 0.0);
    }

    fn compute_w1(&mut self, g1: &Prescription) {
        let d = self.model.dims(self.stage);
        let ad = self.model.action_dims(self.stage);
        for ci in 0..self.cells.len() {
            let (w, p1) = (self.cells[ci].w, self.cells[ci].p1 as usize);
            for u1 in 0..self.n_u1 {
                self.w1[ci * self.n_u1 + u1] = w * g1.product_form_flat(&d.p1, &ad.u1, p1, u1);
            }
        }
    }

    /// Zeroes previously touched slices and resets marks; slices start and
    /// stay zero outside touched regions.
    fn clear_slices(&mut self) {
        for &z in &self.touched {
            let base = z as usize * self.n_next;
            for v in &mut self.slices[base..base + self.n_next] {
                *v = 0.0;
            }
            self.marked[z as usize] = false;
        }
        self.touched.clear();
    }

    /// Continuation term over the touched increments.
    fn continuation(&self) -> f64 {
        let Some(next) = self.next else { return 0.0 };
        let mut total = 0.0;
        for &z in &self.touched {
            let base = z as usize * self.n_next;
            total += next.interpolate_scaled(&self.slices[base..base + self.n_next]);
        }
        total
    }

    /// Surrogate value for a pure Team-2 prescription given precomputed
    /// `w1`.
    fn value_for_pure(&mut self, q_idx: usize) -> f64 {
        self.clear_slices();
        let mut cost = 0.0;
        let model = self.model;
        let stage = self.stage;
        let with_next = self.next.is_some();
        for ci in 0..self.cells.len() {
            let (cell, x, p2) = (
                self.cells[ci].cell as usize,
                self.cells[ci].x as usize,
                self.cells[ci].p2 as usize,
            );
            let u2 = self.pure_u2[q_idx][p2] as usize;
            for u1 in 0..self.n_u1 {
                let w = self.w1[ci * self.n_u1 + u1];
                if w == 0.0 {
                    continue;
                }
                cost += w * model.cost(stage, x, u1, u2);
                if with_next {
                    for term in model.kernel_terms(stage, cell, u1, u2) {
                        let z = term.z as usize;
                        if !self.marked[z] {
                            self.marked[z] = true;
                            self.touched.push(term.z);
                        }
                        self.slices[z * self.n_next + term.cell as usize] += w * term.p;
                    }
                }
            }
        }
        self.dw * cost + self.continuation()
    }

    /// Inner max over the pure Team-2 set; returns `(value, argmax index)`.
    pub(crate) fn max_over_pure(&mut self, g1: &Prescription) -> (f64, usize) {
        self.compute_w1(g1);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for q in 0..self.pure_u2.len() {
            let v = self.value_for_pure(q);
            if v > best {
                best = v;
                arg = q;
            }
        }
        (best, arg)
    }

    /// Surrogate values for every pure Team-2 prescription.
    pub(crate) fn values_per_pure(&mut self, g1: &Prescription, out: &mut Vec<f64>) {
        self.compute_w1(g1);
        out.clear();
        for q in 0..self.pure_u2.len() {
            out.push(self.value_for_pure(q));
        }
    }

    /// Surrogate value for behavioral prescriptions on both sides.
    pub(crate) fn value_behavioral(&mut self, g1: &Prescription, g2: &Prescription) -> f64 {
        let d = self.model.dims(self.stage);
        let ad = self.model.action_dims(self.stage);
        self.compute_w1(g1);
        self.clear_slices();
        let mut cost = 0.0;
        let model = self.model;
        let stage = self.stage;
        let with_next = self.next.is_some();
        for ci in 0..self.cells.len() {
            let (cell, x, p2) = (
                self.cells[ci].cell as usize,
                self.cells[ci].x as usize,
                self.cells[ci].p2 as usize,
            );
            for u1 in 0..self.n_u1 {
                let w = self.w1[ci * self.n_u1 + u1];
                if w == 0.0 {
                    continue;
                }
                for u2 in 0..self.n_u2 {
                    let w2 = w * g2.product_form_flat(&d.p2, &ad.u2, p2, u2);
                    if w2 == 0.0 {
                        continue;
                    }
                    cost += w2 * model.cost(stage, x, u1, u2);
                    if with_next {
                        for term in model.kernel_terms(stage, cell, u1, u2) {
                            let z = term.z as usize;
                            if !self.marked[z] {
                                self.marked[z] = true;
                                self.touched.push(term.z);
                            }
                            self.slices[z * self.n_next + term.cell as usize] += w2 * term.p;
                        }
                    }
                }
            }
        }
        self.dw * cost + self.continuation()
    }
}

/// The sampled stage surrogate `c~ + sum_z V^(P_j(...; z))` for explicit
/// prescriptions. `next = None` means a zero continuation (terminal stage).
pub fn stage_surrogate(
    model: &GameModel,
    pi: &Belief,
    g1: &Prescription,
    g2: &Prescription,
    next: Option<&ValueTable>,
) -> Result<f64, Error> {
    if pi.stage >= model.horizon() {
        return Err(Error::StageMismatch { expected: model.horizon() - 1, got: pi.stage });
    }
    if let Some(table) = next {
        if table.stage != pi.stage + 1 {
            return Err(Error::StageMismatch { expected: pi.stage + 1, got: table.stage });
        }
    }
    Ok(stage_surrogate_scaled(model, pi.stage, &pi.weights, g1, g2, next))
}

/// Extended-domain surrogate on un-normalized weights; exactly homogeneous
/// of degree one in `weights`.
pub fn stage_surrogate_scaled(
    model: &GameModel,
    stage: usize,
    weights: &[f64],
    g1: &Prescription,
    g2: &Prescription,
    next: Option<&ValueTable>,
) -> f64 {
    let mut eval = StageEval::new(model, stage, next, &[]);
    eval.set_belief(weights);
    eval.value_behavioral(g1, g2)
}

// ---------------------------------------------------------------------------
// Local search over softmax-parameterized prescriptions
// ---------------------------------------------------------------------------

const LOGIT_CLAMP: f64 = 12.0;
const GRAD_H: f64 = 1e-4;

/// Row widths of one team's prescription, flattened (player-major,
/// private-info-minor).
fn row_widths(model: &GameModel, team: Team, stage: usize) -> Vec<usize> {
    let mut widths = Vec::new();
    for j in 0..model.num_players(team) {
        let n_p = model.private_info(stage, team, j).len();
        let n_u = model.actions(stage, team, j).len();
        widths.extend(core::iter::repeat_n(n_u, n_p));
    }
    widths
}

fn theta_len(widths: &[usize]) -> usize {
    widths.iter().sum()
}

/// Writes `softmax(theta)` row by row into a prescription.
fn theta_to_prescription(theta: &[f64], widths: &[usize], presc: &mut Prescription) {
    let mut at = 0usize;
    let mut row_idx = 0usize;
    for player in presc.rows.iter_mut() {
        for row in player.iter_mut() {
            let w = widths[row_idx];
            let logits = &theta[at..at + w];
            let mut max = f64::NEG_INFINITY;
            for &l in logits {
                max = max.max(l);
            }
            let mut sum = 0.0;
            for (i, &l) in logits.iter().enumerate() {
                let e = libm::exp(l - max);
                row[i] = e;
                sum += e;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
            at += w;
            row_idx += 1;
        }
    }
}

fn blank_prescription(model: &GameModel, team: Team, stage: usize) -> Prescription {
    Prescription::uniform(model, team, stage)
}

/// Logits placing most of the mass on a pure prescription's choices.
fn pure_to_theta(pure: &PurePrescription, widths: &[usize]) -> Vec<f64> {
    let mut theta = vec![0.0; theta_len(widths)];
    let mut at = 0usize;
    let mut row_idx = 0usize;
    for player in &pure.choices {
        for &choice in player {
            theta[at + choice] = 4.0;
            at += widths[row_idx];
            row_idx += 1;
        }
    }
    theta
}

struct SearchParams {
    max_iters: usize,
    eps_opt: f64,
    step_init: f64,
}

/// Projected local search: gradient descent on the logits with forward
/// differences and backtracking. Minimizes `eval`; returns the best value.
fn local_search(
    theta: &mut [f64],
    eval: &mut dyn FnMut(&[f64]) -> f64,
    params: &SearchParams,
) -> f64 {
    let n = theta.len();
    let mut f = eval(theta);
    if n == 0 {
        return f;
    }
    let mut step = params.step_init;
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut stall = 0usize;
    for _ in 0..params.max_iters {
        let mut gmax = 0.0f64;
        for i in 0..n {
            trial.copy_from_slice(theta);
            trial[i] += GRAD_H;
            let fi = eval(&trial);
            grad[i] = (fi - f) / GRAD_H;
            gmax = gmax.max(grad[i].abs());
        }
        if gmax <= 1e-13 {
            break;
        }
        let f_prev = f;
        let mut improved = false;
        for _ in 0..10 {
            for i in 0..n {
                trial[i] = (theta[i] - step * grad[i] / gmax).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            }
            let ft = eval(&trial);
            if ft < f {
                theta.copy_from_slice(&trial);
                f = ft;
                improved = true;
                step = (step * 1.5).min(4.0);
                break;
            }
            step *= 0.5;
        }
        if !improved {
            stall += 1;
            if stall >= 2 {
                break;
            }
            continue;
        }
        if f_prev - f <= params.eps_opt * f_prev.abs().max(1.0) {
            stall += 1;
            if stall >= 2 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    f
}

fn belief_key(weights: &[f64]) -> u64 {
    let mut acc = 0x5851_F42D_4C95_7F2Du64;
    for w in weights {
        acc = SplitMix64::keyed(&[acc, w.to_bits()]).next_u64();
    }
    acc
}

fn random_theta(len: usize, key: &[u64]) -> Vec<f64> {
    let mut rng = SplitMix64::keyed(key);
    (0..len).map(|_| rng.next_range(-2.0, 2.0)).collect()
}

/// Greedy myopic pure Team-1 prescription: minimizes the max over pure
/// Team-2 prescriptions of the immediate stage cost. Falls back to the
/// uniform seed when the pure space is large.
fn myopic_theta(
    model: &GameModel,
    stage: usize,
    weights: &[f64],
    pures2: &[PurePrescription],
    widths1: &[usize],
    cap: usize,
) -> Vec<f64> {
    if pure_count(model, Team::One, stage) > 4096.min(cap) as u128 {
        return vec![0.0; theta_len(widths1)];
    }
    let Ok(pures1) = enumerate_pure_capped(model, Team::One, stage, 4096.min(cap)) else {
        return vec![0.0; theta_len(widths1)];
    };
    let mut eval = StageEval::new(model, stage, None, pures2);
    eval.set_belief(weights);
    let mut best = f64::INFINITY;
    let mut best_theta = vec![0.0; theta_len(widths1)];
    for q1 in &pures1 {
        let g1 = q1.lift();
        let (v, _) = eval.max_over_pure(&g1);
        if v < best {
            best = v;
            best_theta = pure_to_theta(q1, widths1);
        }
    }
    best_theta
}

// ---------------------------------------------------------------------------
// Stage solves
// ---------------------------------------------------------------------------

/// Min-max stage solve at one belief: Team 1's best prescription against
/// the exact (or refined-heuristic) inner maximum, evaluated on the
/// stage-`t+1` table `next` (`None` for the terminal stage).
pub fn stage_upper(
    model: &GameModel,
    pi: &Belief,
    next: Option<&ValueTable>,
    cfg: &SolverConfig,
) -> Result<StageOutcome, Error> {
    let stage = pi.stage;
    if stage >= model.horizon() {
        return Err(Error::StageMismatch { expected: model.horizon() - 1, got: stage });
    }
    if let Some(table) = next {
        if table.stage != stage + 1 {
            return Err(Error::StageMismatch { expected: stage + 1, got: table.stage });
        }
    }
    let pures2 = enumerate_pure_capped(model, Team::Two, stage, cfg.pure_cap)?;
    let one_sided = model.cib_control() == CibControl::Team1Only;
    let widths1 = row_widths(model, Team::One, stage);
    let key = belief_key(&pi.weights);

    let mut eval = StageEval::new(model, stage, next, &pures2);
    eval.set_belief(&pi.weights);
    let mut g1_buf = blank_prescription(model, Team::One, stage);
    let mut g2_buf = blank_prescription(model, Team::Two, stage);
    let widths2 = row_widths(model, Team::Two, stage);

    let params = SearchParams {
        max_iters: cfg.max_iters,
        eps_opt: cfg.eps_opt,
        step_init: cfg.step_init,
    };

    let mut results: Vec<(f64, Vec<f64>)> = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts.max(1) {
        let mut theta = match r {
            0 => vec![0.0; theta_len(&widths1)],
            1 => myopic_theta(model, stage, &pi.weights, &pures2, &widths1, cfg.pure_cap),
            _ => random_theta(theta_len(&widths1), &[cfg.seed, 0xA1, stage as u64, key, r as u64]),
        };
        let mut objective = |t: &[f64]| -> f64 {
            theta_to_prescription(t, &widths1, &mut g1_buf);
            let (base, arg) = eval.max_over_pure(&g1_buf);
            if one_sided {
                base
            } else {
                // No linearity guarantee: refine the inner max over
                // behavioral prescriptions from the best pure start.
                let mut theta2 = pure_to_theta(&pures2[arg], &widths2);
                let inner_params = SearchParams {
                    max_iters: cfg.quick_iters,
                    eps_opt: cfg.eps_opt,
                    step_init: cfg.step_init,
                };
                let refined = local_search(
                    &mut theta2,
                    &mut |t2: &[f64]| {
                        theta_to_prescription(t2, &widths2, &mut g2_buf);
                        -eval.value_behavioral(&g1_buf, &g2_buf)
                    },
                    &inner_params,
                );
                base.max(-refined)
            }
        };
        let value = local_search(&mut theta, &mut objective, &params);
        results.push((value, theta));
    }

    let best = results
        .iter()
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NonFinite { stage });
    }
    let (value, theta) = results
        .iter()
        .find(|(v, _)| *v <= best + cfg.eps_opt)
        .expect("a restart attains the best value");
    let mut prescription = blank_prescription(model, Team::One, stage);
    theta_to_prescription(theta, &widths1, &mut prescription);
    Ok(StageOutcome {
        value: *value,
        prescription,
        inner_exact: one_sided,
    })
}

/// Max-min stage solve at one belief: Team 2's best prescription (pure
/// enumeration plus local ascent) against Team 1's inner minimum.
pub fn stage_lower(
    model: &GameModel,
    pi: &Belief,
    next: Option<&ValueTable>,
    cfg: &SolverConfig,
) -> Result<StageOutcome, Error> {
    stage_lower_seeded(model, pi, next, cfg, None)
}

/// [`stage_lower`] with an extra Team-1 candidate for the final inner
/// minimization. [`solve_lower`] passes the upper solve's argmin at the
/// same grid point: together with shared grids and the exact inner max
/// this pins the lower table below the upper table pointwise, so the
/// minimax sandwich holds by construction rather than by luck of two
/// independent searches.
pub fn stage_lower_seeded(
    model: &GameModel,
    pi: &Belief,
    next: Option<&ValueTable>,
    cfg: &SolverConfig,
    seed_gamma1: Option<&Prescription>,
) -> Result<StageOutcome, Error> {
    let stage = pi.stage;
    if stage >= model.horizon() {
        return Err(Error::StageMismatch { expected: model.horizon() - 1, got: stage });
    }
    if let Some(table) = next {
        if table.stage != stage + 1 {
            return Err(Error::StageMismatch { expected: stage + 1, got: table.stage });
        }
    }
    let pures2 = enumerate_pure_capped(model, Team::Two, stage, cfg.pure_cap)?;
    let widths1 = row_widths(model, Team::One, stage);
    let widths2 = row_widths(model, Team::Two, stage);
    let key = belief_key(&pi.weights);

    let mut eval = StageEval::new(model, stage, next, &pures2);
    eval.set_belief(&pi.weights);
    let mut g1_buf = blank_prescription(model, Team::One, stage);
    let mut g2_buf = blank_prescription(model, Team::Two, stage);

    // Inner minimization over Team 1 for a fixed behavioral Team-2
    // prescription. Warm starts reuse the previous argmin.
    let full_params = SearchParams {
        max_iters: cfg.max_iters,
        eps_opt: cfg.eps_opt,
        step_init: cfg.step_init,
    };
    let quick_params = SearchParams {
        max_iters: cfg.quick_iters,
        eps_opt: cfg.eps_opt,
        step_init: cfg.step_init,
    };

    let inner_min = |g2: &Prescription,
                         warm: Option<&[f64]>,
                         quick: bool,
                         tag: u64,
                         eval: &mut StageEval,
                         g1_buf: &mut Prescription|
     -> (f64, Vec<f64>) {
        let params = if quick { &quick_params } else { &full_params };
        let n_restarts = if quick { 2 } else { cfg.restarts.max(1) };
        let mut best_val = f64::INFINITY;
        let mut best_theta = vec![0.0; theta_len(&widths1)];
        for r in 0..n_restarts {
            let mut theta = match (r, warm) {
                (0, _) => vec![0.0; theta_len(&widths1)],
                (1, Some(w)) => soften_theta(w),
                _ => random_theta(
                    theta_len(&widths1),
                    &[cfg.seed, 0xB2, stage as u64, key, tag, r as u64],
                ),
            };
            let v = local_search(
                &mut theta,
                &mut |t: &[f64]| {
                    theta_to_prescription(t, &widths1, g1_buf);
                    eval.value_behavioral(g1_buf, g2)
                },
                params,
            );
            if v < best_val {
                best_val = v;
                best_theta = theta;
            }
        }
        (best_val, best_theta)
    };

    // Enumerate pure Team-2 candidates plus the uniform center, each scored
    // by a full-quality inner solve.
    let mut best_val = f64::NEG_INFINITY;
    let mut best_theta2: Vec<f64> = vec![0.0; theta_len(&widths2)];
    let mut warm1: Vec<f64> = vec![0.0; theta_len(&widths1)];
    for (qi, q2) in pures2.iter().enumerate() {
        let g2 = q2.lift();
        let (v, theta1) = inner_min(&g2, None, false, qi as u64, &mut eval, &mut g1_buf);
        if v > best_val {
            best_val = v;
            best_theta2 = pure_to_theta(q2, &widths2);
            warm1 = theta1;
        }
    }
    {
        let uniform2 = Prescription::uniform(model, Team::Two, stage);
        let (v, theta1) = inner_min(&uniform2, Some(&warm1), false, 500, &mut eval, &mut g1_buf);
        if v > best_val {
            best_val = v;
            best_theta2 = vec![0.0; theta_len(&widths2)];
            warm1 = theta1;
        }
    }

    // Local ascent over behavioral Team-2 prescriptions from the best
    // candidate. The ascent direction comes from the fixed inner argmin (a
    // supergradient of the concave outer objective under one-sided
    // control). Quick inner solves only steer the ascent; acceptance of the
    // refined point happens below at full quality.
    let mut theta2 = best_theta2.clone();
    let mut refined_best = f64::NEG_INFINITY;
    let mut refined_theta2 = theta2.clone();
    let mut step = cfg.step_init;
    let mut current = f64::NEG_INFINITY;
    for it in 0..cfg.refine_iters {
        theta_to_prescription(&theta2, &widths2, &mut g2_buf);
        let (v, theta1) = inner_min(&g2_buf, Some(&warm1), true, 1000 + it as u64, &mut eval, &mut g1_buf);
        warm1 = theta1;
        if v > refined_best {
            refined_best = v;
            refined_theta2 = theta2.clone();
        }
        // Supergradient of w^ in theta2 at the fixed inner argmin.
        theta_to_prescription(&warm1, &widths1, &mut g1_buf);
        let n2 = theta2.len();
        let f0 = {
            theta_to_prescription(&theta2, &widths2, &mut g2_buf);
            eval.value_behavioral(&g1_buf, &g2_buf)
        };
        let mut grad = vec![0.0; n2];
        let mut gmax = 0.0f64;
        let mut trial = theta2.clone();
        for i in 0..n2 {
            trial.copy_from_slice(&theta2);
            trial[i] += GRAD_H;
            theta_to_prescription(&trial, &widths2, &mut g2_buf);
            let fi = eval.value_behavioral(&g1_buf, &g2_buf);
            grad[i] = (fi - f0) / GRAD_H;
            gmax = gmax.max(grad[i].abs());
        }
        if gmax <= 1e-13 {
            break;
        }
        for i in 0..n2 {
            theta2[i] = (theta2[i] + step * grad[i] / gmax).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        }
        if v > current {
            step = (step * 1.3).min(4.0);
        } else {
            step *= 0.5;
            if step <= 1e-6 {
                break;
            }
        }
        current = v;
    }

    // Re-verify the refined candidate at full quality; keep it only when it
    // genuinely beats the enumerated candidates.
    if refined_theta2 != best_theta2 {
        theta_to_prescription(&refined_theta2, &widths2, &mut g2_buf);
        let (v, _) = inner_min(&g2_buf, Some(&warm1), false, 9999, &mut eval, &mut g1_buf);
        if v > best_val {
            best_theta2 = refined_theta2;
        }
    }

    // Final polish at the chosen Team-2 prescription, including the seeded
    // Team-1 candidate when present, so the reported value is genuinely
    // attained and never above what the seed achieves.
    theta_to_prescription(&best_theta2, &widths2, &mut g2_buf);
    let (mut value, _) = inner_min(&g2_buf, Some(&warm1), false, 9999, &mut eval, &mut g1_buf);
    if let Some(seed) = seed_gamma1 {
        let mut theta = prescription_to_theta(seed, &widths1);
        let seeded = local_search(
            &mut theta,
            &mut |t: &[f64]| {
                theta_to_prescription(t, &widths1, &mut g1_buf);
                eval.value_behavioral(&g1_buf, &g2_buf)
            },
            &full_params,
        );
        value = value.min(seeded);
    }
    if !value.is_finite() {
        return Err(Error::NonFinite { stage });
    }
    let mut prescription = blank_prescription(model, Team::Two, stage);
    theta_to_prescription(&best_theta2, &widths2, &mut prescription);
    Ok(StageOutcome {
        value,
        prescription,
        inner_exact: true,
    })
}

/// Logits whose softmax reproduces the prescription (up to clamp
/// saturation on zero-probability actions).
fn prescription_to_theta(p: &Prescription, widths: &[usize]) -> Vec<f64> {
    let mut theta = Vec::with_capacity(theta_len(widths));
    for player in &p.rows {
        for row in player {
            for &prob in row {
                theta.push(if prob > 0.0 {
                    libm::log(prob).clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
                } else {
                    -LOGIT_CLAMP
                });
            }
        }
    }
    theta
}

/// Rescales logits into a narrow band so softmax gradients stay alive when
/// a previous argmin is reused as a warm start.
fn soften_theta(theta: &[f64]) -> Vec<f64> {
    let maxabs = theta.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    if maxabs <= 6.0 {
        return theta.to_vec();
    }
    let scale = 6.0 / maxabs;
    theta.iter().map(|&t| t * scale).collect()
}

// ---------------------------------------------------------------------------
// Backward induction drivers
// ---------------------------------------------------------------------------

fn solve_with<F>(
    model: &GameModel,
    cfg: &SolverConfig,
    runner: &impl ParallelMap,
    stage_solve: F,
) -> Result<Vec<ValueTable>, Error>
where
    F: Fn(&Belief, Option<&ValueTable>, &SolverConfig) -> Result<StageOutcome, Error> + Sync,
{
    let t = model.horizon();
    let mut tables: Vec<Option<ValueTable>> = (0..t).map(|_| None).collect();
    for stage in (0..t).rev() {
        let grid = assemble_grid(model, stage, cfg)?;
        let next = if stage + 1 < t {
            Some(tables[stage + 1].as_ref().expect("later stage already solved"))
        } else {
            None
        };
        let outcomes: Vec<Result<StageOutcome, Error>> =
            runner.run(grid.len(), |i| stage_solve(&grid[i], next, cfg));
        let mut points = Vec::with_capacity(grid.len());
        let mut inner_exact = true;
        for (belief, outcome) in grid.into_iter().zip(outcomes) {
            let outcome = outcome?;
            inner_exact &= outcome.inner_exact;
            points.push(TablePoint {
                belief,
                value: outcome.value,
                prescription: outcome.prescription,
            });
        }
        let k = cfg.interp_k.unwrap_or(model.support(stage).len() + 1);
        tables[stage] = Some(ValueTable::from_points(
            model,
            stage,
            points,
            k,
            cfg.interp_power,
            inner_exact,
        ));
    }
    Ok(tables.into_iter().map(|t| t.expect("all stages solved")).collect())
}

/// Upper (min-max) value tables for all stages, built backward from
/// `V_{T+1} = 0`.
pub fn solve_upper(model: &GameModel, cfg: &SolverConfig) -> Result<Vec<ValueTable>, Error> {
    solve_upper_with(model, cfg, &SerialRunner)
}

pub fn solve_upper_with(
    model: &GameModel,
    cfg: &SolverConfig,
    runner: &impl ParallelMap,
) -> Result<Vec<ValueTable>, Error> {
    solve_with(model, cfg, runner, |pi, next, cfg| stage_upper(model, pi, next, cfg))
}

/// Lower (max-min) value tables for all stages.
///
/// Runs the upper solve first and seeds every final inner minimization
/// with the upper argmin at the same grid point; on one-sided models this
/// keeps the lower table below the upper table pointwise.
pub fn solve_lower(model: &GameModel, cfg: &SolverConfig) -> Result<Vec<ValueTable>, Error> {
    solve_lower_with(model, cfg, &SerialRunner)
}

pub fn solve_lower_with(
    model: &GameModel,
    cfg: &SolverConfig,
    runner: &impl ParallelMap,
) -> Result<Vec<ValueTable>, Error> {
    let upper = solve_upper_with(model, cfg, runner)?;
    let t = model.horizon();
    let mut tables: Vec<Option<ValueTable>> = (0..t).map(|_| None).collect();
    for stage in (0..t).rev() {
        let grid = assemble_grid(model, stage, cfg)?;
        let next = if stage + 1 < t {
            Some(tables[stage + 1].as_ref().expect("later stage already solved"))
        } else {
            None
        };
        // Same cfg, same deterministic grid: point i of the upper table
        // holds the argmin for grid[i].
        let upper_points = upper[stage].points();
        let aligned = upper_points.len() == grid.len()
            && grid
                .iter()
                .zip(upper_points)
                .all(|(b, p)| b.weights == p.belief.weights);
        let outcomes: Vec<Result<StageOutcome, Error>> = runner.run(grid.len(), |i| {
            let seed = if aligned { Some(&upper_points[i].prescription) } else { None };
            stage_lower_seeded(model, &grid[i], next, cfg, seed)
        });
        let mut points = Vec::with_capacity(grid.len());
        let mut inner_exact = true;
        for (belief, outcome) in grid.into_iter().zip(outcomes) {
            let outcome = outcome?;
            inner_exact &= outcome.inner_exact;
            points.push(TablePoint {
                belief,
                value: outcome.value,
                prescription: outcome.prescription,
            });
        }
        let k = cfg.interp_k.unwrap_or(model.support(stage).len() + 1);
        tables[stage] = Some(ValueTable::from_points(
            model,
            stage,
            points,
            k,
            cfg.interp_power,
            inner_exact,
        ));
    }
    Ok(tables.into_iter().map(|t| t.expect("all stages solved")).collect())
}

/// Value at the initial belief: a table read, since the grid always
/// contains the initial belief.
pub fn game_value(tables: &[ValueTable], initial: &Belief) -> Result<f64, Error> {
    let first = tables.first().ok_or(Error::Mismatch("no tables"))?;
    first.interpolate(initial)
}

/// The `w^` matrix over pure prescriptions of both teams, for oracle-style
/// cross-checks: `out[q1][q2]`.
pub fn pure_stage_matrix(
    model: &GameModel,
    pi: &Belief,
    next: Option<&ValueTable>,
    cap: usize,
) -> Result<Vec<Vec<f64>>, Error> {
    let pures1 = enumerate_pure_capped(model, Team::One, pi.stage, cap)?;
    let pures2 = enumerate_pure_capped(model, Team::Two, pi.stage, cap)?;
    let mut eval = StageEval::new(model, pi.stage, next, &pures2);
    eval.set_belief(&pi.weights);
    let mut out = Vec::with_capacity(pures1.len());
    let mut row = Vec::new();
    for q1 in &pures1 {
        let g1 = q1.lift();
        eval.values_per_pure(&g1, &mut row);
        out.push(row.clone());
    }
    Ok(out)
}
