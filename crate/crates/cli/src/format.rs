//! The game-file format: a JSON document holding alphabets, the joint
//! stage kernel, costs, and the initial belief, keyed by symbol names.
//!
//! Stage data may be declared once (time-homogeneous, repeated across the
//! horizon) or per stage under a `per_stage` wrapper. Team tuples in keys
//! join player symbols with `+`; kernel outcome keys join the four outcome
//! components with `|` as `x|p1|p2|z`. Serialization preserves key order
//! (alphabet order), and probabilities are printed in shortest round-trip
//! form, so load-serialize-load is bit-exact.

use std::fmt;

use serde_json::{Map, Value};

use cib_core::model::{
    Alphabet, CibControl, GameModel, KernelTerm, ModelParts, Violation,
};
use cib_core::Team;

/// Failure to turn text into a validated model.
#[derive(Debug)]
pub enum LoadError {
    /// Malformed JSON or schema (with a field locus where known).
    Parse(String),
    /// Structurally sound but invariant-violating model; every violation
    /// is listed.
    Validation(Vec<Violation>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Parse(msg) => write!(f, "parse error: {msg}"),
            LoadError::Validation(violations) => {
                writeln!(f, "validation failed with {} finding(s):", violations.len())?;
                for v in violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LoadError {}

/// Parses and validates a game file.
pub fn load_game(text: &str) -> Result<GameModel, LoadError> {
    let model = parse_game(text).map_err(LoadError::Parse)?;
    let violations = cib_core::model::validate(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(LoadError::Validation(violations))
    }
}

/// Parses a game file without checking the numeric invariants; callers that
/// want to report violations themselves (like `cibgames validate`) start
/// here.
pub fn parse_game(text: &str) -> Result<GameModel, String> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| format!("line {} column {}: {e}", e.line(), e.column()))?;
    build_model(&value)
}

fn err(path: &str, what: impl fmt::Display) -> String {
    format!("`{path}`: {what}")
}

fn as_obj<'v>(v: &'v Value, path: &str) -> Result<&'v Map<String, Value>, String> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn as_array<'v>(v: &'v Value, path: &str) -> Result<&'v Vec<Value>, String> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn get<'v>(map: &'v Map<String, Value>, key: &str, path: &str) -> Result<&'v Value, String> {
    map.get(key).ok_or_else(|| err(path, format_args!("missing field `{key}`")))
}

fn symbol_list(v: &Value, path: &str) -> Result<Vec<String>, String> {
    let arr = as_array(v, path)?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, s) in arr.iter().enumerate() {
        let s = s
            .as_str()
            .ok_or_else(|| err(&format!("{path}[{i}]"), "expected a string symbol"))?;
        if s.is_empty() || s.contains(['|', '+', ',']) || s.contains(char::is_whitespace) {
            return Err(err(
                &format!("{path}[{i}]"),
                "symbols must be non-empty and free of '|', '+', ',' and whitespace",
            ));
        }
        out.push(s.to_string());
    }
    Ok(out)
}

/// Either a single declaration repeated across stages or explicit
/// `per_stage` entries.
fn per_stage<'v>(v: &'v Value, path: &str, n: usize) -> Result<Vec<&'v Value>, String> {
    if let Some(obj) = v.as_object() {
        if let Some(stages) = obj.get("per_stage") {
            let arr = as_array(stages, &format!("{path}.per_stage"))?;
            if arr.len() != n {
                return Err(err(
                    &format!("{path}.per_stage"),
                    format_args!("expected {n} entries, found {}", arr.len()),
                ));
            }
            return Ok(arr.iter().collect());
        }
    }
    Ok(std::iter::repeat_n(v, n).collect())
}

fn team_alphabets(v: &Value, path: &str, n_players: [usize; 2]) -> Result<[Vec<Alphabet>; 2], String> {
    let obj = as_obj(v, path)?;
    let mut out: [Vec<Alphabet>; 2] = [Vec::new(), Vec::new()];
    for (i, team) in ["team1", "team2"].iter().enumerate() {
        let lists = as_array(get(obj, team, path)?, &format!("{path}.{team}"))?;
        if lists.len() != n_players[i] {
            return Err(err(
                &format!("{path}.{team}"),
                format_args!("expected {} player alphabets", n_players[i]),
            ));
        }
        for (j, list) in lists.iter().enumerate() {
            out[i].push(Alphabet::new(symbol_list(list, &format!("{path}.{team}[{j}]"))?));
        }
    }
    Ok(out)
}

fn tuple_index(alphabets: &[Alphabet], key: &str, path: &str) -> Result<usize, String> {
    let parts: Vec<&str> = key.split('+').collect();
    if parts.len() != alphabets.len() {
        return Err(err(
            path,
            format_args!("tuple `{key}` needs {} `+`-joined symbols", alphabets.len()),
        ));
    }
    let mut flat = 0usize;
    for (a, part) in alphabets.iter().zip(parts) {
        let idx = a
            .index_of(part)
            .ok_or_else(|| err(path, format_args!("unknown symbol `{part}` in `{key}`")))?;
        flat = flat * a.len() + idx;
    }
    Ok(flat)
}

fn tuple_key(alphabets: &[Alphabet], mut flat: usize) -> String {
    let mut parts = vec![""; alphabets.len()];
    for (j, a) in alphabets.iter().enumerate().rev() {
        parts[j] = a.symbol(flat % a.len());
        flat /= a.len();
    }
    parts.join("+")
}

fn number(v: &Value, path: &str) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| err(path, "expected a number"))
}

struct StageAlphabets<'m> {
    states: &'m Alphabet,
    p1: &'m [Alphabet],
    p2: &'m [Alphabet],
}

fn build_model(root: &Value) -> Result<GameModel, String> {
    let obj = as_obj(root, "$")?;
    let horizon = get(obj, "horizon", "$")?
        .as_u64()
        .ok_or_else(|| err("horizon", "expected a positive integer"))? as usize;
    if horizon == 0 {
        return Err(err("horizon", "must be at least 1"));
    }
    let discount = number(get(obj, "discount", "$")?, "discount")?;

    let players = as_obj(get(obj, "players", "$")?, "players")?;
    let n1 = get(players, "team1", "players")?
        .as_u64()
        .ok_or_else(|| err("players.team1", "expected a positive integer"))? as usize;
    let n2 = get(players, "team2", "players")?
        .as_u64()
        .ok_or_else(|| err("players.team2", "expected a positive integer"))? as usize;
    if n1 == 0 || n2 == 0 {
        return Err(err("players", "both teams need at least one player"));
    }

    let states: Vec<Alphabet> = per_stage(get(obj, "states", "$")?, "states", horizon + 1)?
        .iter()
        .enumerate()
        .map(|(t, v)| Ok(Alphabet::new(symbol_list(v, &format!("states[t={t}]"))?)))
        .collect::<Result<_, String>>()?;

    let mut private1 = Vec::with_capacity(horizon + 1);
    let mut private2 = Vec::with_capacity(horizon + 1);
    for (t, v) in per_stage(get(obj, "private_info", "$")?, "private_info", horizon + 1)?
        .iter()
        .enumerate()
    {
        let [a1, a2] = team_alphabets(v, &format!("private_info[t={t}]"), [n1, n2])?;
        private1.push(a1);
        private2.push(a2);
    }

    let mut actions1 = Vec::with_capacity(horizon);
    let mut actions2 = Vec::with_capacity(horizon);
    for (t, v) in per_stage(get(obj, "actions", "$")?, "actions", horizon)?.iter().enumerate() {
        let [a1, a2] = team_alphabets(v, &format!("actions[t={t}]"), [n1, n2])?;
        actions1.push(a1);
        actions2.push(a2);
    }

    let increments: Vec<Alphabet> =
        per_stage(get(obj, "common_increments", "$")?, "common_increments", horizon)?
            .iter()
            .enumerate()
            .map(|(t, v)| {
                Ok(Alphabet::new(symbol_list(v, &format!("common_increments[t={t}]"))?))
            })
            .collect::<Result<_, String>>()?;

    let homogeneous = !["states", "actions", "private_info", "common_increments", "kernel", "cost"]
        .iter()
        .any(|k| {
            obj.get(*k)
                .and_then(Value::as_object)
                .is_some_and(|o| o.contains_key("per_stage"))
        });

    // Kernel rows.
    let mut kernel = Vec::with_capacity(horizon);
    for (t, v) in per_stage(get(obj, "kernel", "$")?, "kernel", horizon)?.iter().enumerate() {
        let here = StageAlphabets { states: &states[t], p1: &private1[t], p2: &private2[t] };
        let next = StageAlphabets {
            states: &states[t + 1],
            p1: &private1[t + 1],
            p2: &private2[t + 1],
        };
        kernel.push(parse_kernel_stage(
            v,
            &format!("kernel[t={t}]"),
            &here,
            &next,
            &actions1[t],
            &actions2[t],
            &increments[t],
        )?);
    }

    // Costs.
    let mut cost = Vec::with_capacity(horizon);
    for (t, v) in per_stage(get(obj, "cost", "$")?, "cost", horizon)?.iter().enumerate() {
        cost.push(parse_cost_stage(
            v,
            &format!("cost[t={t}]"),
            &states[t],
            &actions1[t],
            &actions2[t],
        )?);
    }

    // Initial belief over stage-0 cells.
    let d0_p1: usize = private1[0].iter().map(Alphabet::len).product::<usize>().max(1);
    let d0_p2: usize = private2[0].iter().map(Alphabet::len).product::<usize>().max(1);
    let mut initial = vec![0.0; states[0].len() * d0_p1 * d0_p2];
    {
        let path = "initial_belief";
        let map = as_obj(get(obj, "initial_belief", "$")?, path)?;
        for (xk, inner) in map {
            let x = states[0]
                .index_of(xk)
                .ok_or_else(|| err(path, format_args!("unknown state `{xk}`")))?;
            for (p1k, inner2) in as_obj(inner, path)? {
                let p1 = tuple_index(&private1[0], p1k, path)?;
                for (p2k, w) in as_obj(inner2, path)? {
                    let p2 = tuple_index(&private2[0], p2k, path)?;
                    initial[(x * d0_p1 + p1) * d0_p2 + p2] = number(w, path)?;
                }
            }
        }
    }

    let cib_control = match get(obj, "cib_control", "$")?.as_str() {
        Some("team1_only") => CibControl::Team1Only,
        Some("both") => CibControl::Both,
        _ => return Err(err("cib_control", "expected \"team1_only\" or \"both\"")),
    };

    let u2_projection = match obj.get("u2_projection") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let mut stages = Vec::with_capacity(horizon);
            for (t, vv) in per_stage(v, "u2_projection", horizon)?.iter().enumerate() {
                let path = format!("u2_projection[t={t}]");
                let map = as_obj(vv, &path)?;
                let n_z = increments[t].len();
                let mut proj = vec![usize::MAX; n_z];
                for (zk, uk) in map {
                    let z = increments[t]
                        .index_of(zk)
                        .ok_or_else(|| err(&path, format_args!("unknown increment `{zk}`")))?;
                    let us = uk
                        .as_str()
                        .ok_or_else(|| err(&path, "expected an action tuple string"))?;
                    proj[z] = tuple_index(&actions2[t], us, &path)?;
                }
                if let Some(z) = proj.iter().position(|&u| u == usize::MAX) {
                    return Err(err(
                        &path,
                        format_args!("missing entry for increment `{}`", increments[t].symbol(z)),
                    ));
                }
                stages.push(proj);
            }
            Some(stages)
        }
    };

    let parts = ModelParts {
        horizon,
        discount,
        states,
        private1,
        private2,
        actions1,
        actions2,
        increments,
        kernel,
        cost,
        initial_belief: initial,
        cib_control,
        u2_projection,
        homogeneous,
    };
    GameModel::from_parts(parts).map_err(|e| format!("inconsistent model: {e}"))
}

#[allow(clippy::too_many_arguments)]
fn parse_kernel_stage(
    v: &Value,
    path: &str,
    here: &StageAlphabets,
    next: &StageAlphabets,
    actions1: &[Alphabet],
    actions2: &[Alphabet],
    increments: &Alphabet,
) -> Result<Vec<Vec<KernelTerm>>, String> {
    let n_p1: usize = here.p1.iter().map(Alphabet::len).product::<usize>().max(1);
    let n_p2: usize = here.p2.iter().map(Alphabet::len).product::<usize>().max(1);
    let n_u1: usize = actions1.iter().map(Alphabet::len).product::<usize>().max(1);
    let n_u2: usize = actions2.iter().map(Alphabet::len).product::<usize>().max(1);
    let np1_next: usize = next.p1.iter().map(Alphabet::len).product::<usize>().max(1);
    let np2_next: usize = next.p2.iter().map(Alphabet::len).product::<usize>().max(1);
    let n_inputs = here.states.len() * n_p1 * n_p2 * n_u1 * n_u2;
    let mut rows = vec![Vec::new(); n_inputs];

    let map = as_obj(v, path)?;
    for (xk, v1) in map {
        let x = here
            .states
            .index_of(xk)
            .ok_or_else(|| err(path, format_args!("unknown state `{xk}`")))?;
        for (p1k, v2) in as_obj(v1, path)? {
            let p1 = tuple_index(here.p1, p1k, path)?;
            for (p2k, v3) in as_obj(v2, path)? {
                let p2 = tuple_index(here.p2, p2k, path)?;
                for (u1k, v4) in as_obj(v3, path)? {
                    let u1 = tuple_index(actions1, u1k, path)?;
                    for (u2k, v5) in as_obj(v4, path)? {
                        let u2 = tuple_index(actions2, u2k, path)?;
                        let row_path =
                            format!("{path}.{xk}.{p1k}.{p2k}.{u1k}.{u2k}");
                        let outcomes = as_obj(v5, &row_path)?;
                        let mut terms = Vec::with_capacity(outcomes.len());
                        for (ok, pv) in outcomes {
                            let parts: Vec<&str> = ok.split('|').collect();
                            if parts.len() != 4 {
                                return Err(err(
                                    &row_path,
                                    format_args!("outcome key `{ok}` must be `x|p1|p2|z`"),
                                ));
                            }
                            let xn = next.states.index_of(parts[0]).ok_or_else(|| {
                                err(&row_path, format_args!("unknown next state `{}`", parts[0]))
                            })?;
                            let p1n = tuple_index(next.p1, parts[1], &row_path)?;
                            let p2n = tuple_index(next.p2, parts[2], &row_path)?;
                            let z = increments.index_of(parts[3]).ok_or_else(|| {
                                err(&row_path, format_args!("unknown increment `{}`", parts[3]))
                            })?;
                            terms.push(KernelTerm {
                                z: z as u32,
                                cell: ((xn * np1_next + p1n) * np2_next + p2n) as u32,
                                p: number(pv, &row_path)?,
                            });
                        }
                        let cell = (x * n_p1 + p1) * n_p2 + p2;
                        rows[(cell * n_u1 + u1) * n_u2 + u2] = terms;
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn parse_cost_stage(
    v: &Value,
    path: &str,
    states: &Alphabet,
    actions1: &[Alphabet],
    actions2: &[Alphabet],
) -> Result<Vec<f64>, String> {
    let n_u1: usize = actions1.iter().map(Alphabet::len).product::<usize>().max(1);
    let n_u2: usize = actions2.iter().map(Alphabet::len).product::<usize>().max(1);
    let mut table = vec![0.0; states.len() * n_u1 * n_u2];
    let map = as_obj(v, path)?;
    for (xk, v1) in map {
        let x = states
            .index_of(xk)
            .ok_or_else(|| err(path, format_args!("unknown state `{xk}`")))?;
        for (u1k, v2) in as_obj(v1, path)? {
            let u1 = tuple_index(actions1, u1k, path)?;
            for (u2k, c) in as_obj(v2, path)? {
                let u2 = tuple_index(actions2, u2k, path)?;
                table[(x * n_u1 + u1) * n_u2 + u2] =
                    number(c, &format!("{path}.{xk}.{u1k}.{u2k}"))?;
            }
        }
    }
    Ok(table)
}

/// Serializes a model back into the game-file format (canonical key order).
/// Loading the output reproduces the model bit for bit.
pub fn serialize_game(model: &GameModel) -> String {
    let t = model.horizon();
    let stages: Vec<usize> = if model.is_homogeneous() { vec![0] } else { (0..t).collect() };

    let mut root = Map::new();
    root.insert("horizon".into(), Value::from(t as u64));
    root.insert("discount".into(), Value::from(model.discount()));
    let mut players = Map::new();
    players.insert("team1".into(), Value::from(model.num_players(Team::One) as u64));
    players.insert("team2".into(), Value::from(model.num_players(Team::Two) as u64));
    root.insert("players".into(), Value::Object(players));

    let alphabet_value =
        |a: &Alphabet| Value::from(a.symbols().iter().map(|s| Value::from(s.as_str())).collect::<Vec<_>>());

    root.insert(
        "states".into(),
        wrap_stages(model.is_homogeneous(), (0..=t).map(|s| alphabet_value(model.states(s)))),
    );

    let team_obj = |f: &dyn Fn(Team, usize) -> Value| -> Value {
        let mut obj = Map::new();
        obj.insert("team1".into(), f(Team::One, model.num_players(Team::One)));
        obj.insert("team2".into(), f(Team::Two, model.num_players(Team::Two)));
        Value::Object(obj)
    };
    root.insert(
        "actions".into(),
        wrap_stages(
            model.is_homogeneous(),
            (0..t).map(|s| {
                team_obj(&|team, n| {
                    Value::from(
                        (0..n)
                            .map(|j| alphabet_value(model.actions(s, team, j)))
                            .collect::<Vec<_>>(),
                    )
                })
            }),
        ),
    );
    root.insert(
        "private_info".into(),
        wrap_stages(
            model.is_homogeneous(),
            (0..=t).map(|s| {
                team_obj(&|team, n| {
                    Value::from(
                        (0..n)
                            .map(|j| alphabet_value(model.private_info(s, team, j)))
                            .collect::<Vec<_>>(),
                    )
                })
            }),
        ),
    );
    root.insert(
        "common_increments".into(),
        wrap_stages(model.is_homogeneous(), (0..t).map(|s| alphabet_value(model.increments(s)))),
    );

    root.insert(
        "kernel".into(),
        wrap_stages(model.is_homogeneous(), stages.iter().map(|&s| kernel_value(model, s))),
    );
    root.insert(
        "cost".into(),
        wrap_stages(model.is_homogeneous(), stages.iter().map(|&s| cost_value(model, s))),
    );

    // Initial belief: positive entries only, nested by (x, p1, p2).
    let d = model.dims(0);
    let mut init = Map::new();
    for x in 0..d.n_states {
        let mut by_p1 = Map::new();
        for p1 in 0..d.n_p1 {
            let mut by_p2 = Map::new();
            for p2 in 0..d.n_p2 {
                let w = model.initial_weights()[d.cell(x, p1, p2)];
                if w != 0.0 {
                    by_p2.insert(
                        tuple_key(private_alphabets(model, 0, Team::Two), p2),
                        Value::from(w),
                    );
                }
            }
            if !by_p2.is_empty() {
                by_p1.insert(tuple_key(private_alphabets(model, 0, Team::One), p1), Value::Object(by_p2));
            }
        }
        if !by_p1.is_empty() {
            init.insert(model.states(0).symbol(x).to_string(), Value::Object(by_p1));
        }
    }
    root.insert("initial_belief".into(), Value::Object(init));

    root.insert(
        "cib_control".into(),
        Value::from(match model.cib_control() {
            CibControl::Team1Only => "team1_only",
            CibControl::Both => "both",
        }),
    );

    if model.u2_projection(0).is_some() {
        root.insert(
            "u2_projection".into(),
            wrap_stages(
                model.is_homogeneous(),
                stages.iter().map(|&s| {
                    let proj = model.u2_projection(s).expect("projection exists");
                    let mut obj = Map::new();
                    for (z, &u2) in proj.iter().enumerate() {
                        obj.insert(
                            model.increments(s).symbol(z).to_string(),
                            Value::from(tuple_key(action_alphabets(model, s, Team::Two), u2)),
                        );
                    }
                    Value::Object(obj)
                }),
            ),
        );
    }

    serde_json::to_string_pretty(&Value::Object(root)).expect("model serializes")
}

fn wrap_stages(homogeneous: bool, mut values: impl Iterator<Item = Value>) -> Value {
    if homogeneous {
        values.next().expect("at least one stage")
    } else {
        let mut obj = Map::new();
        obj.insert("per_stage".into(), Value::from(values.collect::<Vec<_>>()));
        Value::Object(obj)
    }
}

fn private_alphabets(model: &GameModel, stage: usize, team: Team) -> &[Alphabet] {
    model.private_alphabets(stage, team)
}

fn action_alphabets(model: &GameModel, stage: usize, team: Team) -> &[Alphabet] {
    model.action_alphabets(stage, team)
}

fn kernel_value(model: &GameModel, stage: usize) -> Value {
    let d = model.dims(stage);
    let dn = model.dims(stage + 1);
    let ad = model.action_dims(stage);
    let mut by_x = Map::new();
    for x in 0..d.n_states {
        let mut by_p1 = Map::new();
        for p1 in 0..d.n_p1 {
            let mut by_p2 = Map::new();
            for p2 in 0..d.n_p2 {
                let mut by_u1 = Map::new();
                for u1 in 0..ad.n_u1 {
                    let mut by_u2 = Map::new();
                    for u2 in 0..ad.n_u2 {
                        let mut outcomes = Map::new();
                        for term in model.kernel_terms(stage, d.cell(x, p1, p2), u1, u2) {
                            if term.p == 0.0 {
                                continue;
                            }
                            let (xn, p1n, p2n) = dn.split_cell(term.cell as usize);
                            let key = format!(
                                "{}|{}|{}|{}",
                                model.states(stage + 1).symbol(xn),
                                tuple_key(private_alphabets(model, stage + 1, Team::One), p1n),
                                tuple_key(private_alphabets(model, stage + 1, Team::Two), p2n),
                                model.increments(stage).symbol(term.z as usize),
                            );
                            outcomes.insert(key, Value::from(term.p));
                        }
                        by_u2.insert(
                            tuple_key(action_alphabets(model, stage, Team::Two), u2),
                            Value::Object(outcomes),
                        );
                    }
                    by_u1.insert(
                        tuple_key(action_alphabets(model, stage, Team::One), u1),
                        Value::Object(by_u2),
                    );
                }
                by_p2.insert(
                    tuple_key(private_alphabets(model, stage, Team::Two), p2),
                    Value::Object(by_u1),
                );
            }
            by_p1.insert(
                tuple_key(private_alphabets(model, stage, Team::One), p1),
                Value::Object(by_p2),
            );
        }
        by_x.insert(model.states(stage).symbol(x).to_string(), Value::Object(by_p1));
    }
    Value::Object(by_x)
}

fn cost_value(model: &GameModel, stage: usize) -> Value {
    let d = model.dims(stage);
    let ad = model.action_dims(stage);
    let mut by_x = Map::new();
    for x in 0..d.n_states {
        let mut by_u1 = Map::new();
        for u1 in 0..ad.n_u1 {
            let mut by_u2 = Map::new();
            for u2 in 0..ad.n_u2 {
                by_u2.insert(
                    tuple_key(action_alphabets(model, stage, Team::Two), u2),
                    Value::from(model.cost(stage, x, u1, u2)),
                );
            }
            by_u1.insert(
                tuple_key(action_alphabets(model, stage, Team::One), u1),
                Value::Object(by_u2),
            );
        }
        by_x.insert(model.states(stage).symbol(x).to_string(), Value::Object(by_u1));
    }
    Value::Object(by_x)
}
