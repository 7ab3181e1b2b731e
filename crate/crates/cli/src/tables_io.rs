//! On-disk layout of a solve: per-stage value and prescription CSVs, a
//! human-readable summary, and a machine-readable config for reloading.
//!
//! CSV files carry one row per sampled belief; belief coordinates are the
//! support cells of the stage in cell order, printed to 17 significant
//! digits so a reload is bit-exact. Filenames are 1-based
//! (`values_1.csv` holds stage 0 in the crate's 0-based indexing).

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cib_core::belief::Belief;
use cib_core::bestresponse::BrTable;
use cib_core::model::GameModel;
use cib_core::prescriptions::Prescription;
use cib_core::solver::{CellRef, GridRefinement, SolverConfig, TablePoint, ValueTable};
use cib_core::Team;

/// Which dynamic program a policy directory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Upper,
    Lower,
}

impl SolveMode {
    pub fn team(self) -> Team {
        match self {
            SolveMode::Upper => Team::One,
            SolveMode::Lower => Team::Two,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::Upper => "upper",
            SolveMode::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredCell {
    x: String,
    p1: Vec<String>,
    p2: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredRefinement {
    cells: Vec<StoredCell>,
    m: usize,
}

/// Serialized solver configuration plus run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredConfig {
    pub mode: SolveMode,
    pub grid_m: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub eps_opt: f64,
    pub interp_k: Option<usize>,
    pub interp_power: i32,
    pub seed: u64,
    pub pure_cap: usize,
    pub grid_cap: usize,
    refinements: Vec<StoredRefinement>,
    pub refine_iters: usize,
    pub quick_iters: usize,
    pub inner_exact: bool,
}

impl StoredConfig {
    pub fn new(cfg: &SolverConfig, mode: SolveMode, inner_exact: bool) -> StoredConfig {
        StoredConfig {
            mode,
            grid_m: cfg.grid_m,
            restarts: cfg.restarts,
            max_iters: cfg.max_iters,
            step_init: cfg.step_init,
            eps_opt: cfg.eps_opt,
            interp_k: cfg.interp_k,
            interp_power: cfg.interp_power,
            seed: cfg.seed,
            pure_cap: cfg.pure_cap,
            grid_cap: cfg.grid_cap,
            refinements: cfg
                .refinements
                .iter()
                .map(|r| StoredRefinement {
                    m: r.m,
                    cells: r
                        .cells
                        .iter()
                        .map(|c| StoredCell { x: c.x.clone(), p1: c.p1.clone(), p2: c.p2.clone() })
                        .collect(),
                })
                .collect(),
            refine_iters: cfg.refine_iters,
            quick_iters: cfg.quick_iters,
            inner_exact,
        }
    }

    pub fn to_solver_config(&self) -> SolverConfig {
        SolverConfig {
            grid_m: self.grid_m,
            restarts: self.restarts,
            max_iters: self.max_iters,
            step_init: self.step_init,
            eps_opt: self.eps_opt,
            interp_k: self.interp_k,
            interp_power: self.interp_power,
            seed: self.seed,
            pure_cap: self.pure_cap,
            grid_cap: self.grid_cap,
            refinements: self
                .refinements
                .iter()
                .map(|r| GridRefinement {
                    m: r.m,
                    cells: r
                        .cells
                        .iter()
                        .map(|c| CellRef { x: c.x.clone(), p1: c.p1.clone(), p2: c.p2.clone() })
                        .collect(),
                })
                .collect(),
            refine_iters: self.refine_iters,
            quick_iters: self.quick_iters,
        }
    }
}

/// 17-significant-digit decimal, enough for bit-exact f64 round trips.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn belief_header(model: &GameModel, stage: usize) -> Vec<String> {
    let d = model.dims(stage);
    model
        .support(stage)
        .iter()
        .map(|&cell| {
            let (x, p1, p2) = d.split_cell(cell);
            format!(
                "belief:{}|{}|{}",
                model.states(stage).symbol(x),
                tuple_key(model.private_alphabets(stage, Team::One), p1),
                tuple_key(model.private_alphabets(stage, Team::Two), p2),
            )
        })
        .collect()
}

fn tuple_key(alphabets: &[cib_core::model::Alphabet], mut flat: usize) -> String {
    let mut parts = vec![""; alphabets.len()];
    for (j, a) in alphabets.iter().enumerate().rev() {
        parts[j] = a.symbol(flat % a.len());
        flat /= a.len();
    }
    parts.join("+")
}

fn belief_coords(model: &GameModel, belief: &Belief) -> Vec<f64> {
    model
        .support(belief.stage)
        .iter()
        .map(|&cell| belief.weights[cell])
        .collect()
}

/// Column labels for one team's prescription, in (player, private info,
/// action) order. Example: `g1_p2_none_alpha`.
fn prescription_header(model: &GameModel, stage: usize, team: Team) -> Vec<String> {
    let tn = if team == Team::One { 1 } else { 2 };
    let mut cols = Vec::new();
    for j in 0..model.num_players(team) {
        for p in model.private_info(stage, team, j).symbols() {
            for u in model.actions(stage, team, j).symbols() {
                cols.push(format!("g{tn}_p{}_{p}_{u}", j + 1));
            }
        }
    }
    cols
}

fn prescription_row(p: &Prescription) -> Vec<f64> {
    let mut out = Vec::new();
    for player in &p.rows {
        for row in player {
            out.extend_from_slice(row);
        }
    }
    out
}

/// Writes `values_{t}.csv`, `presc_{t}.csv`, `summary.txt`, and
/// `config.json` into `dir`; returns the game value at the initial belief.
pub fn write_solve_outputs(
    dir: &Path,
    model: &GameModel,
    tables: &[ValueTable],
    cfg: &SolverConfig,
    mode: SolveMode,
    game_ref: &str,
) -> Result<f64> {
    fs::create_dir_all(dir)?;
    for table in tables {
        let stage = table.stage;
        let mut values = String::new();
        let mut presc = String::new();
        let belief_cols = belief_header(model, stage).join(",");
        values.push_str(&belief_cols);
        values.push_str(",value\n");
        presc.push_str(&belief_cols);
        let presc_cols = prescription_header(model, stage, mode.team());
        if !presc_cols.is_empty() {
            presc.push(',');
            presc.push_str(&presc_cols.join(","));
        }
        presc.push('\n');
        for point in table.points() {
            let coords: Vec<String> =
                belief_coords(model, &point.belief).iter().map(|&w| fmt17(w)).collect();
            values.push_str(&coords.join(","));
            values.push(',');
            values.push_str(&fmt17(point.value));
            values.push('\n');
            presc.push_str(&coords.join(","));
            for v in prescription_row(&point.prescription) {
                presc.push(',');
                presc.push_str(&fmt17(v));
            }
            presc.push('\n');
        }
        fs::write(dir.join(format!("values_{}.csv", stage + 1)), values)?;
        fs::write(dir.join(format!("presc_{}.csv", stage + 1)), presc)?;
    }

    let initial = cib_core::belief::initial_belief(model);
    let value = cib_core::solver::game_value(tables, &initial)
        .context("reading the value at the initial belief")?;
    let inner_exact = tables.iter().all(|t| t.inner_exact);

    let mut summary = String::new();
    summary.push_str(&format!("game: {game_ref}\n"));
    summary.push_str(&format!("mode: {}\n", mode.as_str()));
    summary.push_str(&format!("stages: {}\n", tables.len()));
    summary.push_str(&format!("grid_m: {}\n", cfg.grid_m));
    summary.push_str(&format!("restarts: {}\n", cfg.restarts));
    summary.push_str(&format!("seed: {}\n", cfg.seed));
    summary.push_str(&format!("grid_points_stage_1: {}\n", tables[0].points().len()));
    summary.push_str(&format!("inner_max_exact: {inner_exact}\n"));
    summary.push_str(&format!("value: {}\n", fmt17(value)));
    fs::write(dir.join("summary.txt"), summary)?;

    let stored = StoredConfig::new(cfg, mode, inner_exact);
    let mut config = serde_json::to_string_pretty(&stored)?;
    config.push('\n');
    fs::write(dir.join("config.json"), config)?;
    Ok(value)
}

fn parse_csv(text: &str, path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .with_context(|| format!("{}: empty file", path.display()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        rows.push(line.split(',').map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn parse_f64(field: &str, path: &Path) -> Result<f64> {
    field
        .parse::<f64>()
        .with_context(|| format!("{}: bad number `{field}`", path.display()))
}

/// Reloads a solve written by [`write_solve_outputs`].
pub fn read_policy_dir(dir: &Path, model: &GameModel) -> Result<(Vec<ValueTable>, StoredConfig)> {
    let config_text = fs::read_to_string(dir.join("config.json"))
        .with_context(|| format!("{}: missing config.json", dir.display()))?;
    let stored: StoredConfig = serde_json::from_str(&config_text)
        .with_context(|| format!("{}: bad config.json", dir.display()))?;
    let cfg = stored.to_solver_config();
    let team = stored.mode.team();

    let mut tables = Vec::with_capacity(model.horizon());
    for stage in 0..model.horizon() {
        let values_path = dir.join(format!("values_{}.csv", stage + 1));
        let presc_path = dir.join(format!("presc_{}.csv", stage + 1));
        let (vh, vrows) = parse_csv(
            &fs::read_to_string(&values_path)
                .with_context(|| format!("{}: unreadable", values_path.display()))?,
            &values_path,
        )?;
        let expect_beliefs = belief_header(model, stage);
        let d_sup = expect_beliefs.len();
        if vh.len() != d_sup + 1 || vh[..d_sup] != expect_beliefs[..] || vh[d_sup] != "value" {
            bail!("{}: header does not match the model's stage-{} support", values_path.display(), stage + 1);
        }
        let (ph, prows) = parse_csv(
            &fs::read_to_string(&presc_path)
                .with_context(|| format!("{}: unreadable", presc_path.display()))?,
            &presc_path,
        )?;
        let presc_cols = prescription_header(model, stage, team);
        if ph.len() != d_sup + presc_cols.len() || ph[d_sup..] != presc_cols[..] {
            bail!("{}: prescription header does not match the model", presc_path.display());
        }
        if prows.len() != vrows.len() {
            bail!("{}: row count differs from values CSV", presc_path.display());
        }

        let support = model.support(stage).to_vec();
        let n_cells = model.dims(stage).n_cells;
        let mut points = Vec::with_capacity(vrows.len());
        for (vrow, prow) in vrows.iter().zip(&prows) {
            if vrow.len() != d_sup + 1 {
                bail!("{}: short row", values_path.display());
            }
            let mut weights = vec![0.0; n_cells];
            for (i, &cell) in support.iter().enumerate() {
                weights[cell] = parse_f64(&vrow[i], &values_path)?;
            }
            let value = parse_f64(&vrow[d_sup], &values_path)?;
            let mut flat = Vec::with_capacity(prow.len() - d_sup);
            for field in &prow[d_sup..] {
                flat.push(parse_f64(field, &presc_path)?);
            }
            let prescription = unflatten_prescription(model, stage, team, &flat)
                .with_context(|| format!("{}: bad prescription row", presc_path.display()))?;
            points.push(TablePoint {
                belief: Belief { stage, weights },
                value,
                prescription,
            });
        }
        let k = cfg.interp_k.unwrap_or(support.len() + 1);
        tables.push(ValueTable::from_points(
            model,
            stage,
            points,
            k,
            cfg.interp_power,
            stored.inner_exact,
        ));
    }
    Ok((tables, stored))
}

fn unflatten_prescription(
    model: &GameModel,
    stage: usize,
    team: Team,
    flat: &[f64],
) -> Result<Prescription> {
    let mut rows = Vec::new();
    let mut at = 0usize;
    for j in 0..model.num_players(team) {
        let n_p = model.private_info(stage, team, j).len();
        let n_u = model.actions(stage, team, j).len();
        let mut player = Vec::with_capacity(n_p);
        for _ in 0..n_p {
            if at + n_u > flat.len() {
                bail!("prescription row too short");
            }
            player.push(flat[at..at + n_u].to_vec());
            at += n_u;
        }
        rows.push(player);
    }
    if at != flat.len() {
        bail!("prescription row too long");
    }
    Ok(Prescription { team, stage, rows })
}

/// Writes best-response outputs: per-stage value CSV and the action map
/// (chosen Team-2 action symbol per player and private-info realization).
pub fn write_br_outputs(
    dir: &Path,
    model: &GameModel,
    tables: &[BrTable],
    exploitability: f64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for table in tables {
        let stage = table.stage();
        let belief_cols = belief_header(model, stage).join(",");
        let mut values = String::new();
        values.push_str(&belief_cols);
        values.push_str(",value\n");
        let mut actions = String::new();
        actions.push_str(&belief_cols);
        for j in 0..model.num_players(Team::Two) {
            for p in model.private_info(stage, Team::Two, j).symbols() {
                actions.push_str(&format!(",u2_p{}_{p}", j + 1));
            }
        }
        actions.push('\n');
        for (i, point) in table.values.points().iter().enumerate() {
            let coords: Vec<String> =
                belief_coords(model, &point.belief).iter().map(|&w| fmt17(w)).collect();
            values.push_str(&coords.join(","));
            values.push(',');
            values.push_str(&fmt17(point.value));
            values.push('\n');
            actions.push_str(&coords.join(","));
            let q = table.argmax_at(i);
            for (j, player) in q.choices.iter().enumerate() {
                for &u in player.iter() {
                    actions.push(',');
                    actions.push_str(model.actions(stage, Team::Two, j).symbol(u));
                }
            }
            actions.push('\n');
        }
        fs::write(dir.join(format!("br_values_{}.csv", stage + 1)), values)?;
        fs::write(dir.join(format!("br_actions_{}.csv", stage + 1)), actions)?;
    }
    let mut summary = String::new();
    summary.push_str(&format!("exploitability: {}\n", fmt17(exploitability)));
    fs::write(dir.join("br_summary.txt"), summary)?;
    Ok(())
}

/// Writes `rollouts.csv` with one row per rollout.
pub fn write_rollouts(path: &Path, seed: u64, costs: &[f64]) -> Result<()> {
    let mut out = String::from("rollout,seed,cost\n");
    for (i, &c) in costs.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, seed.wrapping_add(1 + i as u64), fmt17(c)));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
