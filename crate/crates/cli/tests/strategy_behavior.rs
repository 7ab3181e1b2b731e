//! Behavioral checks of the executed min-max strategy on the
//! defender/attacker game: signaling strength by belief region, and
//! end-to-end executor determinism.

use std::sync::OnceLock;

use cib_core::belief::{initial_belief, Belief};
use cib_core::model::builtin_example;
use cib_core::solver::{solve_upper, CellRef, GridRefinement, SolverConfig, ValueTable};
use cib_core::strategy::{ExecMode, PolicyExecutor};
use cib_core::GameModel;

fn cfg() -> SolverConfig {
    SolverConfig {
        grid_m: 6,
        restarts: 6,
        seed: 7,
        refinements: vec![GridRefinement {
            cells: vec![
                CellRef {
                    x: "0".into(),
                    p1: vec!["0".into(), "none".into()],
                    p2: vec!["none".into()],
                },
                CellRef {
                    x: "1".into(),
                    p1: vec!["1".into(), "none".into()],
                    p2: vec!["none".into()],
                },
            ],
            m: 25,
        }],
        ..SolverConfig::default()
    }
}

fn solved() -> &'static (GameModel, Vec<ValueTable>) {
    static SOLVED: OnceLock<(GameModel, Vec<ValueTable>)> = OnceLock::new();
    SOLVED.get_or_init(|| {
        let model = builtin_example("defender_attacker").unwrap();
        let tables = solve_upper(&model, &cfg()).unwrap();
        (model, tables)
    })
}

fn edge_belief(model: &GameModel, p0: f64) -> Belief {
    let mut w = vec![0.0; model.dims(0).n_cells];
    w[0] = p0;
    w[5] = 1.0 - p0;
    Belief::new(0, w).unwrap()
}

/// L1 distance between the signaling player's action rows for hidden
/// states 0 and 1.
fn signaling_gap(model: &GameModel, tables: &[ValueTable], p0: f64) -> f64 {
    let exec = PolicyExecutor::start(model, tables, edge_belief(model, p0), cfg())
        .unwrap()
        .with_mode(ExecMode::Resolve);
    let g = exec.prescription_now().unwrap();
    g.rows[0][0]
        .iter()
        .zip(&g.rows[0][1])
        .map(|(a, b)| (a - b).abs())
        .sum()
}

#[test]
fn signaling_is_strong_at_center_and_negligible_at_the_threshold() {
    let (model, tables) = solved();
    // At pi(0) = 0.5 the hidden-state rows are far apart (the signaling
    // player talks to the defender); at 0.72 they are nearly identical
    // (any signal would tip the attacker into a targeted attack).
    let center = signaling_gap(model, tables, 0.5);
    assert!(center > 0.2, "signaling gap at 0.5 is only {center}");
    let threshold = signaling_gap(model, tables, 0.72);
    assert!(threshold < 0.1, "signaling gap at 0.72 is {threshold}");
}

#[test]
fn executors_with_equal_inputs_match_bitwise() {
    let (model, tables) = solved();
    let mk = || {
        PolicyExecutor::start(model, tables, initial_belief(model), cfg())
            .unwrap()
            .with_mode(ExecMode::TableLookup)
    };
    let mut a = mk();
    let mut b = mk();
    let inputs = [
        ([0usize, 0usize], [0.3, 0.9], 2usize),
        ([1, 0], [0.7, 0.2], 14),
        ([2, 0], [0.5, 0.5], 20),
        ([0, 0], [0.99, 0.01], 8),
    ];
    for (private, ks, z) in inputs {
        let ua = a.step(&private, &ks, z).unwrap();
        let ub = b.step(&private, &ks, z).unwrap();
        assert_eq!(ua, ub);
        assert_eq!(a.belief().weights, b.belief().weights);
        assert!((a.belief().mass() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn resolve_value_never_beats_table_by_much() {
    // Re-solving at an off-grid belief cannot be much worse than the
    // nearest stored solve (reported as a sanity band, not a hard bound).
    let (model, tables) = solved();
    let pi = edge_belief(model, 0.515);
    let exec = PolicyExecutor::start(model, tables, pi.clone(), cfg()).unwrap();
    let g1 = exec.prescription_now().unwrap();
    let pures = cib_core::prescriptions::enumerate_pure(model, cib_core::Team::Two, 0).unwrap();
    let resolve_value = pures
        .iter()
        .map(|q| {
            cib_core::solver::stage_surrogate(model, &pi, &g1, &q.lift(), Some(&tables[1])).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let (idx, _) = tables[0].nearest(&pi).unwrap();
    let stored = tables[0].points()[idx].value;
    assert!(
        resolve_value <= stored + 1.0,
        "resolve {resolve_value} far above stored {stored}"
    );
}
