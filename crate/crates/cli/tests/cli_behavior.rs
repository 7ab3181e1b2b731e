//! Command-line behavior: exit codes, output files, and opponent specs.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cibgames")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cibgames-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn export_then_validate_is_clean() {
    let dir = tmp("roundtrip");
    let game = dir.join("da.json");
    let out = run(&["export", "defender_attacker", "--out", game.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["validate", game.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("one_sided: holds"));
    assert!(stdout.contains("model valid"));
}

#[test]
fn corrupted_kernel_fails_validation_naming_the_row() {
    let dir = tmp("corrupt");
    let game = dir.join("da.json");
    run(&["export", "defender_attacker", "--out", game.to_str().unwrap()]);
    let text = fs::read_to_string(&game).unwrap();
    // Break one kernel probability; the row no longer sums to 1.
    let broken = text.replacen(": 0.7", ": 0.6", 1);
    assert_ne!(text, broken);
    fs::write(&game, broken).unwrap();
    let out = run(&["validate", game.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("kernel[t="), "report must name the row: {stdout}");
}

#[test]
fn missing_file_is_a_parse_failure() {
    let out = run(&["validate", "/nonexistent/game.json"]);
    assert_eq!(code(&out), 2);
    let out = run(&["solve", "/nonexistent/game.json", "--out", "/tmp/unused"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_json_is_a_parse_failure_with_locus() {
    let dir = tmp("badjson");
    let game = dir.join("bad.json");
    fs::write(&game, "{\n  \"horizon\": 2,\n").unwrap();
    let out = run(&["validate", game.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn unknown_builtin_is_rejected() {
    let out = run(&["export", "nope", "--out", "/tmp/unused.json"]);
    assert_eq!(code(&out), 2);
    let out = run(&["solve", "builtin:nope", "--out", "/tmp/unused"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_refine_spec_is_rejected() {
    let out = run(&[
        "solve",
        "builtin:zero_game",
        "--refine",
        "oops",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn zero_game_solves_to_zero_and_simulates_clean() {
    let dir = tmp("zero");
    let solve = dir.join("solve");
    let out = run(&[
        "solve",
        "builtin:zero_game",
        "--grid",
        "2",
        "--restarts",
        "2",
        "--out",
        solve.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(solve.join("summary.txt")).unwrap();
    let value: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("value: "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(value, 0.0);

    let sim = dir.join("sim");
    let out = run(&[
        "simulate",
        "builtin:zero_game",
        "--policy",
        solve.to_str().unwrap(),
        "--opponent",
        "uniform",
        "--n",
        "25",
        "--seed",
        "3",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean: 0.0000000000000000e0"));
    assert!(stdout.contains("stderr: 0.0000000000000000e0"));
    let rollouts = fs::read_to_string(sim.join("rollouts.csv")).unwrap();
    assert_eq!(rollouts.lines().count(), 26); // header + 25 rows
    assert!(rollouts.starts_with("rollout,seed,cost\n"));
}

#[test]
fn scripted_opponent_runs() {
    let dir = tmp("scripted");
    let solve = dir.join("solve");
    run(&[
        "solve",
        "builtin:coin_signal",
        "--grid",
        "4",
        "--restarts",
        "2",
        "--out",
        solve.to_str().unwrap(),
    ]);
    let script = dir.join("script.json");
    fs::write(&script, "{\"stages\": [[\"h\"]]}").unwrap();
    let out = run(&[
        "simulate",
        "builtin:coin_signal",
        "--policy",
        solve.to_str().unwrap(),
        "--opponent",
        &format!("scripted:{}", script.display()),
        "--n",
        "64",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // A constant opponent in matching pennies against the mixing policy
    // loses about half the time; just require a sane mean.
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mean: f64 = stdout
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&mean));

    // Unknown action symbols are parse failures.
    fs::write(&script, "{\"stages\": [[\"zap\"]]}").unwrap();
    let out = run(&[
        "simulate",
        "builtin:coin_signal",
        "--policy",
        solve.to_str().unwrap(),
        "--opponent",
        &format!("scripted:{}", script.display()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn best_response_on_two_sided_model_exits_4() {
    let dir = tmp("twosided");
    let game = dir.join("both.json");
    // Single state, two actions each, one opaque increment: z hides u2, so
    // the model cannot declare one-sided control.
    fs::write(
        &game,
        r#"{
  "horizon": 1,
  "discount": 1.0,
  "players": {"team1": 1, "team2": 1},
  "states": ["s"],
  "actions": {"team1": [["a", "b"]], "team2": [["a", "b"]]},
  "private_info": {"team1": [["none"]], "team2": [["none"]]},
  "common_increments": ["z"],
  "kernel": {"s": {"none": {"none": {
    "a": {"a": {"s|none|none|z": 1.0}, "b": {"s|none|none|z": 1.0}},
    "b": {"a": {"s|none|none|z": 1.0}, "b": {"s|none|none|z": 1.0}}
  }}}},
  "cost": {"s": {"a": {"a": 1.0, "b": 0.0}, "b": {"a": 0.0, "b": 1.0}}},
  "initial_belief": {"s": {"none": {"none": 1.0}}},
  "cib_control": "both"
}"#,
    )
    .unwrap();
    let out = run(&["validate", game.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let solve = dir.join("solve");
    let out = run(&[
        "solve",
        game.to_str().unwrap(),
        "--grid",
        "1",
        "--restarts",
        "2",
        "--out",
        solve.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // Matching pennies: the heuristic inner max still reaches 0.5.
    let summary = fs::read_to_string(solve.join("summary.txt")).unwrap();
    assert!(summary.contains("inner_max_exact: false"));

    let out = run(&[
        "best-response",
        game.to_str().unwrap(),
        "--policy",
        solve.to_str().unwrap(),
        "--out",
        dir.join("br").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn br_outputs_parse_and_beliefs_sum_to_one() {
    let dir = tmp("brcsv");
    let solve = dir.join("solve");
    run(&[
        "solve",
        "builtin:defender_attacker",
        "--grid",
        "3",
        "--restarts",
        "2",
        "--out",
        solve.to_str().unwrap(),
    ]);
    let br = dir.join("br");
    let out = run(&[
        "best-response",
        "builtin:defender_attacker",
        "--policy",
        solve.to_str().unwrap(),
        "--out",
        br.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for t in 1..=15 {
        let text = fs::read_to_string(br.join(format!("br_values_{t}.csv"))).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let n_belief = header.iter().filter(|h| h.starts_with("belief:")).count();
        assert!(n_belief >= 2);
        for line in lines {
            let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            let mass: f64 = fields[..n_belief].iter().sum();
            assert!((mass - 1.0).abs() <= 1e-9);
        }
    }
}
