//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measurements (visible with `--nocapture`; the harness line is
//! the pass/fail verdict either way).
//!
//! The flagship defender/attacker artifacts (grid m=20 on the reachable
//! simplex, slice refinement m=100 on the attacker-active edge, 8
//! restarts, fixed seed) are produced once through the real CLI and shared
//! by the criteria that read them.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use cib_core::belief::{
    cib_update, cib_update_one_sided, common_marginal, extended, initial_belief, joint_transform,
};
use cib_core::bestresponse::{exploitability_from, solve_best_response};
use cib_core::model::builtin_example;
use cib_core::oracle::{brute_force_upper, random_small_game};
use cib_core::prescriptions::{enumerate_pure, Prescription};
use cib_core::rng::SplitMix64;
use cib_core::sim::{rollout_costs_with, summarize, BrTeam2};
use cib_core::solver::{
    game_value, solve_lower, solve_upper, stage_surrogate, CellRef,
    GridRefinement, SolverConfig,
};
use cib_core::strategy::{LookupTeam1, UniformTeam1};
use cib_core::testing::{random_belief, random_prescription};
use cib_core::{GameModel, Team};

use cib_cli::runner::RayonRunner;
use cib_cli::tables_io::read_policy_dir;

const ACTIVE_EDGE_REFINE: &str = "0|0+none|none,1|1+none|none:100";
const FLAGSHIP_SEED: &str = "7";

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cibgames")
}

struct Flagship {
    root: PathBuf,
    solve_dir: PathBuf,
    br_dir: PathBuf,
    value: f64,
    solve_secs: f64,
    br_secs: f64,
}

static FLAGSHIP: OnceLock<Flagship> = OnceLock::new();

fn flagship() -> &'static Flagship {
    FLAGSHIP.get_or_init(|| {
        let root = std::env::temp_dir().join(format!("cibgames-acceptance-{}", std::process::id()));
        let solve_dir = root.join("solve");
        let br_dir = root.join("br");
        let t0 = Instant::now();
        let out = Command::new(bin())
            .args([
                "solve",
                "builtin:defender_attacker",
                "--upper",
                "--grid",
                "20",
                "--restarts",
                "8",
                "--seed",
                FLAGSHIP_SEED,
                "--refine",
                ACTIVE_EDGE_REFINE,
                "--out",
            ])
            .arg(&solve_dir)
            .output()
            .expect("cibgames solve runs");
        assert!(out.status.success(), "solve failed: {}", String::from_utf8_lossy(&out.stderr));
        let solve_secs = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let out = Command::new(bin())
            .args(["best-response", "builtin:defender_attacker", "--policy"])
            .arg(&solve_dir)
            .arg("--out")
            .arg(&br_dir)
            .output()
            .expect("cibgames best-response runs");
        assert!(out.status.success(), "best-response failed: {}", String::from_utf8_lossy(&out.stderr));
        let br_secs = t0.elapsed().as_secs_f64();

        let summary = std::fs::read_to_string(solve_dir.join("summary.txt")).unwrap();
        let value = summary
            .lines()
            .find_map(|l| l.strip_prefix("value: "))
            .expect("summary has a value line")
            .parse::<f64>()
            .expect("value parses");
        Flagship { root, solve_dir, br_dir, value, solve_secs, br_secs }
    })
}

fn defender() -> GameModel {
    builtin_example("defender_attacker").unwrap()
}

/// Active-edge rows of a stage-1 CSV: (pi(0), remaining fields).
fn active_edge_rows(path: &Path) -> Vec<(f64, Vec<String>)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "belief:0|0+none|none");
    assert_eq!(header[1], "belief:1|1+none|none");
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        let w0: f64 = fields[0].parse().unwrap();
        let w1: f64 = fields[1].parse().unwrap();
        if (w0 + w1 - 1.0).abs() < 1e-12 {
            rows.push((w0, fields[2..].to_vec()));
        }
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rows
}

#[test]
fn criterion_01_headline_value_in_band() {
    let f = flagship();
    assert!(
        (62.0..=69.0).contains(&f.value),
        "game value {} outside [62, 69]",
        f.value
    );
    // The 5-minute budget assumes 8 desktop cores; scale it to this
    // machine to keep the guard meaningful without flaking on small CI
    // boxes.
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let budget = 300.0 * 8.0 / cores as f64;
    assert!(
        f.solve_secs <= budget,
        "solve took {:.1}s, budget {budget:.0}s at {cores} cores",
        f.solve_secs
    );
    println!(
        "criterion 1 PASS: value {:.3} in [62, 69] (paper reports 65.2), solve {:.1}s on {cores} cores",
        f.value, f.solve_secs
    );
}

#[test]
fn criterion_02_attacker_threshold_structure() {
    let f = flagship();
    let rows = active_edge_rows(&f.br_dir.join("br_actions_1.csv"));
    assert!(rows.len() >= 101, "expected the m=100 edge refinement in the BR grid");
    let actions: Vec<(f64, String)> = rows.into_iter().map(|(p, f)| (p, f[0].clone())).collect();

    // Three contiguous regions: targeted / blanket / targeted.
    let mut regions: Vec<(String, f64, f64)> = Vec::new();
    for (p, a) in &actions {
        match regions.last_mut() {
            Some((name, _, hi)) if name == a => *hi = *p,
            _ => regions.push((a.clone(), *p, *p)),
        }
    }
    assert_eq!(
        regions.len(),
        3,
        "expected three contiguous regions, got {regions:?}"
    );
    assert_eq!(regions[1].0, "mu", "middle region must be the blanket attack");
    assert_ne!(regions[0].0, "mu");
    assert_ne!(regions[2].0, "mu");
    assert_ne!(regions[0].0, regions[2].0, "the two targeted regions must differ");
    // Table 1/2 dynamics put the targeted attack on the entity more likely
    // vulnerable: beta (target r) at low pi(0), alpha (target l) at high.
    assert_eq!(regions[0].0, "beta");
    assert_eq!(regions[2].0, "alpha");

    let switch_lo = 0.5 * (regions[0].2 + regions[1].1);
    let switch_hi = 0.5 * (regions[1].2 + regions[2].1);
    assert!(
        (switch_lo - 0.28).abs() <= 0.05,
        "low switch at {switch_lo}, expected 0.28 +- 0.05"
    );
    assert!(
        (switch_hi - 0.72).abs() <= 0.05,
        "high switch at {switch_hi}, expected 0.72 +- 0.05"
    );
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let budget = 120.0 * 8.0 / cores as f64;
    assert!(f.br_secs <= budget, "best response took {:.1}s", f.br_secs);
    println!(
        "criterion 2 PASS: targeted/blanket/targeted with switches at {switch_lo:.3} and {switch_hi:.3} ({:.1}s)",
        f.br_secs
    );
}

#[test]
fn criterion_03_signaling_secrecy_value_shape() {
    let f = flagship();
    let rows = active_edge_rows(&f.solve_dir.join("values_1.csv"));
    let value_at = |p: f64| -> f64 {
        rows.iter()
            .find(|(w, _)| (w - p).abs() < 1e-9)
            .unwrap_or_else(|| panic!("no grid point at pi(0) = {p}"))
            .1[0]
            .parse()
            .unwrap()
    };
    let v = [0.05, 0.28, 0.5, 0.72, 0.95].map(value_at);
    assert!(v[1] < v[2], "V(0.28) = {} not below V(0.5) = {}", v[1], v[2]);
    assert!(v[1] < v[0], "V(0.28) = {} not below V(0.05) = {}", v[1], v[0]);
    assert!(v[3] < v[2], "V(0.72) = {} not below V(0.5) = {}", v[3], v[2]);
    assert!(v[3] < v[4], "V(0.72) = {} not below V(0.95) = {}", v[3], v[4]);
    println!(
        "criterion 3 PASS: V(0.05)={:.2} V(0.28)={:.2} V(0.5)={:.2} V(0.72)={:.2} V(0.95)={:.2}",
        v[0], v[1], v[2], v[3], v[4]
    );
}

#[test]
fn criterion_04_oracle_equivalence_on_random_games() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..25u64 {
        let model = random_small_game(seed);
        let d = model.support(0).len().max(model.support(model.horizon()).len());
        let cfg = SolverConfig {
            grid_m: if d <= 2 { 64 } else { 32 },
            restarts: 6,
            seed: 100 + seed,
            ..SolverConfig::default()
        };
        let tables = solve_upper(&model, &cfg).unwrap();
        let solver_value = game_value(&tables, &initial_belief(&model)).unwrap();
        let oracle_value = brute_force_upper(&model, 100).unwrap();
        let range = cost_range(&model);
        let err = (solver_value - oracle_value).abs();
        worst = worst.max(err / range);
        assert!(
            err <= 0.05 * range,
            "seed {seed}: solver {solver_value} vs oracle {oracle_value} (range {range})"
        );
    }
    let secs = t0.elapsed().as_secs_f64();
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    assert!(secs <= 180.0 * 8.0 / cores as f64, "took {secs:.1}s");
    println!(
        "criterion 4 PASS: 25 games within 0.05*range of the oracle (worst {:.4} of range, {secs:.1}s)",
        worst
    );
}

fn cost_range(model: &GameModel) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in 0..model.horizon() {
        let d = model.dims(s);
        let ad = model.action_dims(s);
        for x in 0..d.n_states {
            for u1 in 0..ad.n_u1 {
                for u2 in 0..ad.n_u2 {
                    lo = lo.min(model.cost(s, x, u1, u2));
                    hi = hi.max(model.cost(s, x, u1, u2));
                }
            }
        }
    }
    hi - lo
}

#[test]
fn criterion_05_pure_prescription_sufficiency() {
    // For fixed (pi, gamma1) the surrogate is linear in Team 2's product
    // form, so no behavioral prescription may beat the pure maximum.
    let model = defender();
    let f = flagship();
    let (tables, _) = read_policy_dir(&f.solve_dir, &model).unwrap();
    let next = &tables[2];
    let pures = enumerate_pure(&model, Team::Two, 1).unwrap();
    let mut rng = SplitMix64::new(505);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let pi = random_belief(&model, 1, &mut rng);
        let g1 = random_prescription(&model, Team::One, 1, &mut rng);
        let pure_max = pures
            .iter()
            .map(|q| stage_surrogate(&model, &pi, &g1, &q.lift(), Some(next)).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..8 {
            let g2 = random_prescription(&model, Team::Two, 1, &mut rng);
            let v = stage_surrogate(&model, &pi, &g1, &g2, Some(next)).unwrap();
            worst = worst.max(v - pure_max);
            assert!(
                v <= pure_max + 1e-9,
                "behavioral {v} beats pure max {pure_max}"
            );
        }
    }
    println!("criterion 5 PASS: 1000 random (pi, gamma1), worst behavioral excess {worst:.2e}");
}

#[test]
fn criterion_06_belief_update_invariants() {
    let defender = defender();
    let mut rng = SplitMix64::new(606);
    let mut updates = 0usize;
    let mut worst_gap: f64 = 0.0;
    while updates < 10_000 {
        let (model, stage) = if updates.is_multiple_of(3) {
            let m = random_small_game(updates as u64 % 40);
            (m, 0usize)
        } else {
            let s = updates % defender.horizon();
            (defender.clone(), s)
        };
        let pi = random_belief(&model, stage, &mut rng);
        let g1 = random_prescription(&model, Team::One, stage, &mut rng);
        let g2 = random_prescription(&model, Team::Two, stage, &mut rng);
        let z = (rng.next_u64() as usize) % model.increments(stage).len();
        let post = cib_update(&model, &pi, &g1, &g2, z).unwrap();
        assert!((post.mass() - 1.0).abs() <= 1e-9);
        assert!(post.weights.iter().all(|&w| w >= 0.0));

        // One-sided agreement at a realized increment.
        let joint = joint_transform(&model, &pi, &g1, &g2).unwrap();
        let marg = common_marginal(&joint);
        if let Some(zr) = marg.iter().position(|&p| p > 1e-6) {
            let two = cib_update(&model, &pi, &g1, &g2, zr).unwrap();
            let one = cib_update_one_sided(&model, &pi, &g1, zr).unwrap();
            for (a, b) in one.weights.iter().zip(&two.weights) {
                worst_gap = worst_gap.max((a - b).abs());
                assert!((a - b).abs() <= 1e-10);
            }
        }

        // Homogeneity on the extended-domain hooks.
        if updates.is_multiple_of(100) {
            let alpha = rng.next_range(0.0, 1.0);
            let scaled: Vec<f64> = pi.weights.iter().map(|w| alpha * w).collect();
            let jf = extended::joint_transform_scaled(&model, stage, &pi.weights, &g1, &g2);
            let js = extended::joint_transform_scaled(&model, stage, &scaled, &g1, &g2);
            for (a, b) in js.weights.iter().zip(&jf.weights) {
                assert!((a - alpha * b).abs() <= 1e-12);
            }
            let cf = extended::stage_cost_scaled(&model, stage, &pi.weights, &g1, &g2);
            let cs = extended::stage_cost_scaled(&model, stage, &scaled, &g1, &g2);
            assert!((cs - alpha * cf).abs() <= 1e-12);
        }
        updates += 1;
    }
    println!("criterion 6 PASS: 10000 updates normalized; one/two-sided max gap {worst_gap:.2e}");
}

#[test]
fn criterion_07_dp_simulation_consistency() {
    let model = defender();
    let f = flagship();
    let (tables, stored) = read_policy_dir(&f.solve_dir, &model).unwrap();
    let cfg = stored.to_solver_config();
    let team1 = LookupTeam1 { tables: &tables };
    let runner = RayonRunner::new(None).unwrap();
    let br = cib_core::bestresponse::solve_best_response_with(&model, &team1, &cfg, &runner).unwrap();
    let dp_value = exploitability_from(&br, &model).unwrap();
    let team2 = BrTeam2 { tables: &br, team1: &team1 };
    let costs = rollout_costs_with(&model, &team1, &team2, 10_000, 2024, &runner).unwrap();
    let stats = summarize(&costs);
    let gap = (stats.mean - dp_value).abs();
    assert!(
        gap <= 3.0 * stats.stderr,
        "MC mean {} vs DP value {dp_value} (3 stderr = {})",
        stats.mean,
        3.0 * stats.stderr
    );
    println!(
        "criterion 7 PASS: MC {:.3} +- {:.3} vs BR DP {:.3} (gap {:.3} <= 3 stderr)",
        stats.mean, stats.stderr, dp_value, gap
    );
}

#[test]
fn criterion_08_exploitability_ordering() {
    let model = defender();
    let f = flagship();
    let (tables, stored) = read_policy_dir(&f.solve_dir, &model).unwrap();
    let cfg = stored.to_solver_config();
    let solved_expl = {
        let text = std::fs::read_to_string(f.br_dir.join("br_summary.txt")).unwrap();
        text.lines()
            .find_map(|l| l.strip_prefix("exploitability: "))
            .unwrap()
            .parse::<f64>()
            .unwrap()
    };
    let uniform = solve_best_response(&model, &UniformTeam1, &cfg).unwrap();
    let uniform_expl = exploitability_from(&uniform, &model).unwrap();
    assert!(
        uniform_expl >= solved_expl - 1e-6,
        "uniform policy exploitability {uniform_expl} below solved {solved_expl}"
    );
    let _ = tables;
    println!(
        "criterion 8 PASS: exploitability(uniform) = {uniform_expl:.3} >= exploitability(solved) = {solved_expl:.3} - 1e-6"
    );
}

#[test]
fn criterion_09_minimax_sandwich() {
    // Flagship game at a modest shared grid.
    let model = defender();
    let cfg = SolverConfig {
        grid_m: 5,
        restarts: 4,
        seed: 909,
        refinements: vec![GridRefinement {
            cells: vec![
                CellRef { x: "0".into(), p1: vec!["0".into(), "none".into()], p2: vec!["none".into()] },
                CellRef { x: "1".into(), p1: vec!["1".into(), "none".into()], p2: vec!["none".into()] },
            ],
            m: 20,
        }],
        ..SolverConfig::default()
    };
    let init = initial_belief(&model);
    let vu = game_value(&solve_upper(&model, &cfg).unwrap(), &init).unwrap();
    let vl = game_value(&solve_lower(&model, &cfg).unwrap(), &init).unwrap();
    assert!(
        vl <= vu + 2.0 * cfg.eps_opt,
        "defender_attacker: lower {vl} above upper {vu} + 2 eps"
    );

    let mut gaps = vec![vu - vl];
    for seed in 30..40u64 {
        let small = random_small_game(seed);
        let cfg = SolverConfig { grid_m: 24, restarts: 4, seed, ..SolverConfig::default() };
        let init = initial_belief(&small);
        let vu = game_value(&solve_upper(&small, &cfg).unwrap(), &init).unwrap();
        let vl = game_value(&solve_lower(&small, &cfg).unwrap(), &init).unwrap();
        assert!(
            vl <= vu + 2.0 * cfg.eps_opt,
            "seed {seed}: lower {vl} above upper {vu} + 2 eps"
        );
        gaps.push(vu - vl);
    }
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    println!(
        "criterion 9 PASS: lower <= upper + 2e-4 on defender_attacker and 10 random games (min gap {min_gap:.2e})"
    );
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let root = std::env::temp_dir().join(format!("cibgames-determinism-{}", std::process::id()));
    let run = |tag: &str| -> PathBuf {
        let solve_dir = root.join(format!("solve-{tag}"));
        let out = Command::new(bin())
            .args([
                "solve",
                "builtin:defender_attacker",
                "--grid",
                "5",
                "--restarts",
                "4",
                "--seed",
                "11",
                "--refine",
                "0|0+none|none,1|1+none|none:20",
                "--out",
            ])
            .arg(&solve_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        let br_dir = root.join(format!("br-{tag}"));
        let out = Command::new(bin())
            .args(["best-response", "builtin:defender_attacker", "--policy"])
            .arg(&solve_dir)
            .arg("--out")
            .arg(&br_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        let sim_dir = root.join(format!("sim-{tag}"));
        let out = Command::new(bin())
            .args([
                "simulate",
                "builtin:defender_attacker",
                "--opponent",
                "br",
                "--n",
                "200",
                "--seed",
                "5",
                "--policy",
            ])
            .arg(&solve_dir)
            .arg("--out")
            .arg(&sim_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        solve_dir
    };
    let a = run("a");
    let b = run("b");
    let mut compared = 0usize;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        let left = std::fs::read(a.join(&name)).unwrap();
        let right = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(left, right, "{name:?} differs between reruns");
        compared += 1;
    }
    for pair in [("br-a", "br-b"), ("sim-a", "sim-b")] {
        for entry in std::fs::read_dir(root.join(pair.0)).unwrap() {
            let name = entry.unwrap().file_name();
            let left = std::fs::read(root.join(pair.0).join(&name)).unwrap();
            let right = std::fs::read(root.join(pair.1).join(&name)).unwrap();
            assert_eq!(left, right, "{name:?} differs between reruns");
            compared += 1;
        }
    }
    assert!(compared >= 30, "compared only {compared} files");
    println!("criterion 10 PASS: {compared} output files byte-identical across reruns");
}

#[test]
fn flagship_outputs_parse_back_and_sum_to_one() {
    // Emitted CSVs parse back; belief coordinates in every row sum to 1.
    let f = flagship();
    let model = defender();
    let (tables, _) = read_policy_dir(&f.solve_dir, &model).unwrap();
    assert_eq!(tables.len(), model.horizon());
    for t in &tables {
        for p in t.points() {
            assert!((p.belief.mass() - 1.0).abs() <= 1e-9);
            assert!(p.prescription.is_valid(1e-9));
        }
    }
    // The headline value is a stored-point read.
    let v = game_value(&tables, &initial_belief(&model)).unwrap();
    assert_eq!(v, f.value);
    let _ = Prescription::uniform(&model, Team::One, 0);
    println!("flagship outputs reload cleanly; value {v:.3}");
}

#[test]
fn flagship_cleanup_marker() {
    // Touch the shared fixture so it is built even when individual
    // criteria are filtered; nothing to clean (temp dirs are per-PID).
    let f = flagship();
    assert!(f.root.exists());
}
