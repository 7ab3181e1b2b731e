//! `cibgames`: validate, solve, evaluate, and simulate zero-sum team games
//! with common-information-belief dynamic programming.
//!
//! Exit codes: 0 success, 1 validation findings, 2 parse/IO failure,
//! 3 solver or simulation failure, 4 unsupported structure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cib_cli::format::{load_game, serialize_game, LoadError};
use cib_cli::runner::RayonRunner;
use cib_cli::tables_io::{
    fmt17, read_policy_dir, write_br_outputs, write_rollouts, write_solve_outputs, SolveMode,
};
use cib_core::bestresponse::{exploitability_from, solve_best_response_with};
use cib_core::model::{builtin_example, check_one_sided, validate, OneSidedDiagnosis, BUILTIN_NAMES};
use cib_core::prescriptions::PurePrescription;
use cib_core::sim::{rollout_costs_with, summarize, BrTeam2, ScriptedTeam2, Team2SimPolicy, UniformTeam2};
use cib_core::solver::{solve_lower_with, solve_upper_with, CellRef, GridRefinement, SolverConfig};
use cib_core::strategy::{LookupTeam1, Team1Policy};
use cib_core::{Error as CoreError, GameModel, Team};

#[derive(Parser)]
#[command(name = "cibgames", version, about = "Solver toolkit for zero-sum games between teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a game file's invariants and one-sided-control structure.
    Validate {
        /// Game file path, or `builtin:<name>`.
        game: String,
    },
    /// Write a built-in example game to a file.
    Export {
        /// One of: defender_attacker, zero_game, coin_signal.
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the upper (min-max) or lower (max-min) dynamic program and
    /// write per-stage value/prescription CSVs.
    Solve {
        game: String,
        /// Solve the min-max DP (default).
        #[arg(long, conflicts_with = "lower")]
        upper: bool,
        /// Solve the max-min DP instead.
        #[arg(long)]
        lower: bool,
        /// Simplex grid denominator.
        #[arg(long, default_value_t = 12)]
        grid: usize,
        /// Local-search restarts per belief.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra grid density on a face: "x|p1|p2,x|p1|p2:m" (player
        /// tuples joined with '+'). Repeatable.
        #[arg(long)]
        refine: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: CIBGAMES_THREADS or all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Best response of Team 2 against a solved Team-1 policy.
    BestResponse {
        game: String,
        /// Directory written by `solve --upper`.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Monte Carlo evaluation of the solved policy against an opponent.
    Simulate {
        game: String,
        #[arg(long)]
        policy: PathBuf,
        /// `br`, `uniform`, or `scripted:<file>`.
        #[arg(long, default_value = "br")]
        opponent: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for rollouts.csv (optional).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn core_failure(err: CoreError) -> Failure {
    match err {
        CoreError::UnsupportedStructure(_) => fail(4, err.to_string()),
        _ => fail(3, err.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { game } => cmd_validate(&game),
        Command::Export { name, out } => cmd_export(&name, &out),
        Command::Solve { game, upper, lower, grid, restarts, seed, refine, out, threads } => {
            let mode = if lower { SolveMode::Lower } else { SolveMode::Upper };
            let _ = upper;
            cmd_solve(&game, mode, grid, restarts, seed, &refine, &out, threads)
        }
        Command::BestResponse { game, policy, out, threads } => {
            cmd_best_response(&game, &policy, &out, threads)
        }
        Command::Simulate { game, policy, opponent, n, seed, out, threads } => {
            cmd_simulate(&game, &policy, &opponent, n, seed, out.as_deref(), threads)
        }
    }
}

/// Loads a game from a path or a `builtin:<name>` reference.
fn load_game_ref(game: &str) -> Result<GameModel, Failure> {
    if let Some(name) = game.strip_prefix("builtin:") {
        return builtin_example(name)
            .map_err(|e| fail(2, format!("{e} (available: {})", BUILTIN_NAMES.join(", "))));
    }
    let text = fs::read_to_string(game).map_err(|e| fail(2, format!("{game}: {e}")))?;
    load_game(&text).map_err(|e| match e {
        LoadError::Parse(_) => fail(2, format!("{game}: {e}")),
        LoadError::Validation(_) => fail(1, format!("{game}: {e}")),
    })
}

fn cmd_validate(game: &str) -> Result<(), Failure> {
    let text = if let Some(name) = game.strip_prefix("builtin:") {
        let model = builtin_example(name).map_err(|e| fail(2, e.to_string()))?;
        serialize_game(&model)
    } else {
        fs::read_to_string(game).map_err(|e| fail(2, format!("{game}: {e}")))?
    };
    let model = cib_cli::format::parse_game(&text)
        .map_err(|e| fail(2, format!("{game}: parse error: {e}")))?;
    let violations = validate(&model);
    match check_one_sided(&model) {
        OneSidedDiagnosis::Holds => println!("one_sided: holds"),
        other => println!("one_sided: fails ({other:?})"),
    }
    if violations.is_empty() {
        println!("ok: {} stage(s), {} state(s), model valid", model.horizon(), model.states(0).len());
        Ok(())
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Err(fail(1, format!("{} violation(s)", violations.len())))
    }
}

fn cmd_export(name: &str, out: &Path) -> Result<(), Failure> {
    let model = builtin_example(name)
        .map_err(|e| fail(2, format!("{e} (available: {})", BUILTIN_NAMES.join(", "))))?;
    let text = serialize_game(&model);
    fs::write(out, text).map_err(|e| fail(2, format!("{}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Parses "`cell,cell:m`" where each cell is "`x|p1|p2`" with `+`-joined
/// player tuples.
fn parse_refinement(spec: &str) -> Result<GridRefinement, Failure> {
    let (cells_part, m_part) = spec
        .rsplit_once(':')
        .ok_or_else(|| fail(2, format!("--refine `{spec}`: expected `cells:m`")))?;
    let m: usize = m_part
        .parse()
        .map_err(|_| fail(2, format!("--refine `{spec}`: bad denominator `{m_part}`")))?;
    if m == 0 {
        return Err(fail(2, format!("--refine `{spec}`: denominator must be positive")));
    }
    let mut cells = Vec::new();
    for cell in cells_part.split(',') {
        let parts: Vec<&str> = cell.split('|').collect();
        if parts.len() != 3 {
            return Err(fail(2, format!("--refine `{spec}`: cell `{cell}` must be `x|p1|p2`")));
        }
        cells.push(CellRef {
            x: parts[0].to_string(),
            p1: parts[1].split('+').map(str::to_string).collect(),
            p2: parts[2].split('+').map(str::to_string).collect(),
        });
    }
    if cells.is_empty() {
        return Err(fail(2, format!("--refine `{spec}`: no cells")));
    }
    Ok(GridRefinement { cells, m })
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    game: &str,
    mode: SolveMode,
    grid: usize,
    restarts: usize,
    seed: u64,
    refine: &[String],
    out: &Path,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let model = load_game_ref(game)?;
    let mut cfg = SolverConfig {
        grid_m: grid.max(1),
        restarts: restarts.max(1),
        seed,
        ..SolverConfig::default()
    };
    for spec in refine {
        cfg.refinements.push(parse_refinement(spec)?);
    }
    let runner = RayonRunner::new(threads).map_err(|e| fail(3, e.to_string()))?;
    let tables = match mode {
        SolveMode::Upper => solve_upper_with(&model, &cfg, &runner),
        SolveMode::Lower => solve_lower_with(&model, &cfg, &runner),
    }
    .map_err(core_failure)?;
    let value = write_solve_outputs(out, &model, &tables, &cfg, mode, game)
        .map_err(|e| fail(2, e.to_string()))?;
    println!("value: {}", fmt17(value));
    Ok(())
}

fn cmd_best_response(
    game: &str,
    policy_dir: &Path,
    out: &Path,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let model = load_game_ref(game)?;
    if model.cib_control() != cib_core::CibControl::Team1Only {
        return Err(fail(4, "exact best response needs cib_control = team1_only"));
    }
    let (tables, stored) =
        read_policy_dir(policy_dir, &model).map_err(|e| fail(2, e.to_string()))?;
    if stored.mode != SolveMode::Upper {
        return Err(fail(2, "best response expects a policy directory from `solve --upper`"));
    }
    let cfg = stored.to_solver_config();
    let policy = cib_core::strategy::ResolveTeam1 { tables: &tables, cfg: cfg.clone() };
    let runner = RayonRunner::new(threads).map_err(|e| fail(3, e.to_string()))?;
    let br = solve_best_response_with(&model, &policy, &cfg, &runner).map_err(core_failure)?;
    let expl = exploitability_from(&br, &model).map_err(core_failure)?;
    write_br_outputs(out, &model, &br, expl).map_err(|e| fail(2, e.to_string()))?;
    println!("exploitability: {}", fmt17(expl));
    Ok(())
}

/// Parses the Team-2 opponent spec: a scripted file holds
/// `{"stages": [["<action>", ...], ...]}`, one action symbol per Team-2
/// player per stage (applied for every private-info realization), cycled
/// when shorter than the horizon.
fn parse_opponent(
    spec: &str,
    model: &GameModel,
) -> Result<Option<ScriptedTeam2>, Failure> {
    match spec {
        "br" | "uniform" => Ok(None),
        other => {
            let Some(path) = other.strip_prefix("scripted:") else {
                return Err(fail(2, format!("--opponent `{other}`: expected br, uniform, or scripted:<file>")));
            };
            let text = fs::read_to_string(path).map_err(|e| fail(2, format!("{path}: {e}")))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| fail(2, format!("{path}: {e}")))?;
            let stages = value
                .get("stages")
                .and_then(|s| s.as_array())
                .ok_or_else(|| fail(2, format!("{path}: missing `stages` array")))?;
            if stages.is_empty() {
                return Err(fail(2, format!("{path}: empty script")));
            }
            let n2 = model.num_players(Team::Two);
            let mut script = Vec::with_capacity(stages.len());
            for (t, stage) in stages.iter().enumerate() {
                let players = stage
                    .as_array()
                    .ok_or_else(|| fail(2, format!("{path}: stage {t} is not an array")))?;
                if players.len() != n2 {
                    return Err(fail(2, format!("{path}: stage {t} needs {n2} action(s)")));
                }
                let mut choices = Vec::with_capacity(n2);
                let mut n_actions = Vec::with_capacity(n2);
                for (j, action) in players.iter().enumerate() {
                    let sym = action
                        .as_str()
                        .ok_or_else(|| fail(2, format!("{path}: stage {t} player {j}: expected a string")))?;
                    let alphabet = model.actions(t % model.horizon(), Team::Two, j);
                    let idx = alphabet.index_of(sym).ok_or_else(|| {
                        fail(2, format!("{path}: stage {t} player {j}: unknown action `{sym}`"))
                    })?;
                    let n_p = model.private_info(t % model.horizon(), Team::Two, j).len();
                    choices.push(vec![idx; n_p]);
                    n_actions.push(alphabet.len());
                }
                script.push(PurePrescription { team: Team::Two, stage: t, choices, n_actions });
            }
            Ok(Some(ScriptedTeam2 { script }))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    game: &str,
    policy_dir: &Path,
    opponent: &str,
    n: usize,
    seed: u64,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<(), Failure> {
    if n == 0 {
        return Err(fail(2, "--n must be at least 1"));
    }
    let model = load_game_ref(game)?;
    let (tables, stored) =
        read_policy_dir(policy_dir, &model).map_err(|e| fail(3, e.to_string()))?;
    if stored.mode != SolveMode::Upper {
        return Err(fail(3, "simulation expects a policy directory from `solve --upper`"));
    }
    let cfg = stored.to_solver_config();
    let team1 = LookupTeam1 { tables: &tables };
    let runner = RayonRunner::new(threads).map_err(|e| fail(3, e.to_string()))?;

    let scripted = parse_opponent(opponent, &model)?;
    let costs = match (opponent, &scripted) {
        ("br", _) => {
            if model.cib_control() != cib_core::CibControl::Team1Only {
                return Err(fail(4, "the br opponent needs cib_control = team1_only"));
            }
            let br = solve_best_response_with(&model, &team1, &cfg, &runner).map_err(core_failure)?;
            let policy2 = BrTeam2 { tables: &br, team1: &team1 };
            rollout_costs_with(&model, &team1, &policy2, n, seed, &runner)
        }
        ("uniform", _) => rollout_costs_with(&model, &team1, &UniformTeam2, n, seed, &runner),
        (_, Some(script)) => rollout_costs_with(&model, &team1, script, n, seed, &runner),
        _ => unreachable!("parse_opponent rejected the spec"),
    }
    .map_err(core_failure)?;

    let stats = summarize(&costs);
    println!(
        "mean: {} stderr: {} n: {}{}",
        fmt17(stats.mean),
        fmt17(stats.stderr),
        n,
        if stats.degenerate { " (single rollout: stderr degenerate)" } else { "" }
    );
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| fail(2, format!("{}: {e}", dir.display())))?;
        write_rollouts(&dir.join("rollouts.csv"), seed, &costs)
            .map_err(|e| fail(2, e.to_string()))?;
    }
    Ok(())
}

/// The team-2 policy trait objects above borrow locals; this shim keeps
/// the match arms' types aligned.
#[allow(dead_code)]
fn _assert_policy_traits(p: &dyn Team2SimPolicy, q: &dyn Team1Policy) {
    let _ = (p, q);
}
