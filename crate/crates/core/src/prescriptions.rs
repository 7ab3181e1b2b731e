//! Prescriptions: per-player maps from private information to action
//! distributions, chosen by a team's virtual coordinator.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::model::{Dims, GameModel, Team};

/// Cap on [`enumerate_pure`] output size.
pub const DEFAULT_PURE_CAP: usize = 1_000_000;

/// A behavioral prescription: for each player of one team, a table mapping
/// each private-information realization to a distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prescription {
    pub team: Team,
    pub stage: usize,
    /// `rows[player][p][u]` = probability of action `u` given private info `p`.
    pub rows: Vec<Vec<Vec<f64>>>,
}

/// A pure prescription: each row is a single action.
#[derive(Debug, Clone, PartialEq)]
pub struct PurePrescription {
    pub team: Team,
    pub stage: usize,
    /// `choices[player][p]` = chosen action index.
    pub choices: Vec<Vec<usize>>,
    /// Action-alphabet size per player, kept so [`PurePrescription::lift`]
    /// needs no model.
    pub n_actions: Vec<usize>,
}

impl Prescription {
    /// Uniform prescription for one team at one stage.
    pub fn uniform(model: &GameModel, team: Team, stage: usize) -> Prescription {
        let n = model.num_players(team);
        let rows = (0..n)
            .map(|j| {
                let n_p = model.private_info(stage, team, j).len();
                let n_u = model.actions(stage, team, j).len();
                vec![vec![1.0 / n_u as f64; n_u]; n_p]
            })
            .collect();
        Prescription { team, stage, rows }
    }

    /// Probability `prod_j rows[j][p_j][u_j]` assigned to the joint team
    /// action `u` when the team's joint private information is `p`.
    pub fn product_form(&self, p: &[usize], u: &[usize]) -> f64 {
        let mut prob = 1.0;
        for (j, row) in self.rows.iter().enumerate() {
            prob *= row[p[j]][u[j]];
        }
        prob
    }

    /// Same as [`Self::product_form`] with flat mixed-radix indices.
    #[inline]
    pub fn product_form_flat(&self, p_dims: &[usize], u_dims: &[usize], p_flat: usize, u_flat: usize) -> f64 {
        let mut prob = 1.0;
        let mut p_rest = p_flat;
        let mut u_rest = u_flat;
        // Walk players from least significant (last) to first.
        for j in (0..self.rows.len()).rev() {
            let pj = p_rest % p_dims[j];
            p_rest /= p_dims[j];
            let uj = u_rest % u_dims[j];
            u_rest /= u_dims[j];
            prob *= self.rows[j][pj][uj];
        }
        prob
    }

    /// True when every row is a probability vector within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.rows.iter().all(|player| {
            player.iter().all(|row| {
                let sum: f64 = row.iter().sum();
                row.iter().all(|&p| p >= 0.0) && (sum - 1.0).abs() <= tol
            })
        })
    }

    /// Row-count/width consistency against the model.
    pub fn matches_model(&self, model: &GameModel) -> bool {
        if self.stage >= model.horizon() || self.rows.len() != model.num_players(self.team) {
            return false;
        }
        self.rows.iter().enumerate().all(|(j, player)| {
            player.len() == model.private_info(self.stage, self.team, j).len()
                && player
                    .iter()
                    .all(|row| row.len() == model.actions(self.stage, self.team, j).len())
        })
    }
}

impl PurePrescription {
    /// Lifts each chosen action to a point-mass distribution.
    pub fn lift(&self) -> Prescription {
        let rows = self
            .choices
            .iter()
            .zip(&self.n_actions)
            .map(|(player, &n_u)| {
                player
                    .iter()
                    .map(|&u| {
                        let mut row = vec![0.0; n_u];
                        row[u] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Prescription {
            team: self.team,
            stage: self.stage,
            rows,
        }
    }

    /// Joint action (flat index) for a flat joint private-info index.
    #[inline]
    pub fn joint_action_flat(&self, p_dims: &[usize], p_flat: usize) -> usize {
        let parts = Dims::split_tuple(p_dims, p_flat);
        let mut u_flat = 0usize;
        for (j, &n_u) in self.n_actions.iter().enumerate() {
            u_flat = u_flat * n_u + self.choices[j][parts[j]];
        }
        u_flat
    }
}

/// Number of pure prescriptions for one team at one stage.
pub fn pure_count(model: &GameModel, team: Team, stage: usize) -> u128 {
    let mut count: u128 = 1;
    for j in 0..model.num_players(team) {
        let n_p = model.private_info(stage, team, j).len() as u32;
        let n_u = model.actions(stage, team, j).len() as u128;
        count = count.saturating_mul(n_u.saturating_pow(n_p));
    }
    count
}

/// Enumerates all pure prescriptions in lexicographic order over the
/// concatenated choice vector (player-major, private-info-minor, action
/// order from the game file), using [`DEFAULT_PURE_CAP`].
pub fn enumerate_pure(model: &GameModel, team: Team, stage: usize) -> Result<Vec<PurePrescription>, Error> {
    enumerate_pure_capped(model, team, stage, DEFAULT_PURE_CAP)
}

/// [`enumerate_pure`] with an explicit size cap.
pub fn enumerate_pure_capped(
    model: &GameModel,
    team: Team,
    stage: usize,
    cap: usize,
) -> Result<Vec<PurePrescription>, Error> {
    let count = pure_count(model, team, stage);
    if count > cap as u128 {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let n_players = model.num_players(team);
    let n_actions: Vec<usize> = (0..n_players)
        .map(|j| model.actions(stage, team, j).len())
        .collect();
    // Row layout of the flattened choice vector: (player, p) pairs.
    let mut slots: Vec<usize> = Vec::new();
    for (j, &n_u) in n_actions.iter().enumerate() {
        let n_p = model.private_info(stage, team, j).len();
        slots.extend(core::iter::repeat_n(n_u, n_p));
    }

    let mut out = Vec::with_capacity(count as usize);
    let mut odometer = vec![0usize; slots.len()];
    loop {
        let mut choices = Vec::with_capacity(n_players);
        let mut at = 0usize;
        for j in 0..n_players {
            let n_p = model.private_info(stage, team, j).len();
            choices.push(odometer[at..at + n_p].to_vec());
            at += n_p;
        }
        out.push(PurePrescription {
            team,
            stage,
            choices,
            n_actions: n_actions.clone(),
        });
        // Advance, last slot fastest.
        let mut i = slots.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            odometer[i] += 1;
            if odometer[i] < slots[i] {
                break;
            }
            odometer[i] = 0;
        }
    }
}
