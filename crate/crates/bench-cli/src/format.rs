//! JSON game and policy files.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so a save/load cycle is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sgplan::game_model::Transition;
use sgplan::{Matrix, MatrixGame, MixedStrategy, StochasticGame, TimeDependentPolicy};

use crate::CliError;

pub const GAME_FILE_VERSION: u32 = 1;

/// Per-entry slack accepted on load before a distribution is rejected.
/// Sums off by more than the model's own tolerance are renormalized.
pub const LOAD_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub version: u32,
    pub n_states: usize,
    pub n_row_actions: usize,
    pub n_col_actions: usize,
    pub start_state: usize,
    pub r_max: f64,
    pub payoffs1: Vec<Vec<Vec<f64>>>,
    pub payoffs2: Vec<Vec<Vec<f64>>>,
    pub transitions: Vec<Vec<Vec<Vec<TransitionEntry>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub horizon: usize,
    pub entries: Vec<PolicyEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub state: usize,
    pub t: usize,
    pub row_probs: Vec<f64>,
    pub col_probs: Vec<f64>,
}

fn shape_error(path: &Path, message: String) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        message,
    }
}

fn check_len(path: &Path, field: &str, found: usize, expected: usize) -> Result<(), CliError> {
    if found != expected {
        return Err(shape_error(path, format!("{field}: expected {expected} entries, found {found}")));
    }
    Ok(())
}

impl GameFile {
    pub fn from_game(game: &StochasticGame) -> Self {
        let (n_rows, n_cols) = (game.n_rows(), game.n_cols());
        let tensor = |m: &Matrix| m.to_rows();
        let transitions = (0..game.n_states())
            .map(|s| {
                (0..n_rows)
                    .map(|i| {
                        (0..n_cols)
                            .map(|j| {
                                game.transition(s, i, j)
                                    .iter()
                                    .filter(|&&(_, p)| p != 0.0)
                                    .map(|&(to, p)| TransitionEntry { to, p })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            version: GAME_FILE_VERSION,
            n_states: game.n_states(),
            n_row_actions: n_rows,
            n_col_actions: n_cols,
            start_state: game.start_state(),
            r_max: game.r_max(),
            payoffs1: game.stages().iter().map(|g| tensor(g.payoff1())).collect(),
            payoffs2: game.stages().iter().map(|g| tensor(g.payoff2())).collect(),
            transitions,
        }
    }

    /// Checks the declared shapes and builds a validated game. `path` only
    /// labels error messages.
    pub fn into_game(self, path: &Path) -> Result<StochasticGame, CliError> {
        if self.version != GAME_FILE_VERSION {
            return Err(shape_error(
                path,
                format!("version: unsupported version {}, expected {GAME_FILE_VERSION}", self.version),
            ));
        }
        let (n, rows, cols) = (self.n_states, self.n_row_actions, self.n_col_actions);
        if n == 0 || rows == 0 || cols == 0 {
            return Err(shape_error(path, "n_states, n_row_actions and n_col_actions must be positive".into()));
        }
        for (field, tensor) in [("payoffs1", &self.payoffs1), ("payoffs2", &self.payoffs2)] {
            check_len(path, field, tensor.len(), n)?;
            for (s, matrix) in tensor.iter().enumerate() {
                check_len(path, &format!("{field}[{s}]"), matrix.len(), rows)?;
                for (i, row) in matrix.iter().enumerate() {
                    check_len(path, &format!("{field}[{s}][{i}]"), row.len(), cols)?;
                }
            }
        }
        check_len(path, "transitions", self.transitions.len(), n)?;
        for (s, per_state) in self.transitions.iter().enumerate() {
            check_len(path, &format!("transitions[{s}]"), per_state.len(), rows)?;
            for (i, per_row) in per_state.iter().enumerate() {
                check_len(path, &format!("transitions[{s}][{i}]"), per_row.len(), cols)?;
            }
        }

        let stages = self
            .payoffs1
            .iter()
            .zip(&self.payoffs2)
            .map(|(a, b)| MatrixGame::from_rows(a, b))
            .collect::<sgplan::Result<Vec<_>>>()?;
        let transitions: Vec<Vec<Vec<Transition>>> = self
            .transitions
            .into_iter()
            .map(|per_state| {
                per_state
                    .into_iter()
                    .map(|per_row| per_row.into_iter().map(load_distribution).collect())
                    .collect()
            })
            .collect();
        Ok(StochasticGame::new(stages, transitions, self.start_state, Some(self.r_max))?)
    }
}

/// Drops zero entries and renormalizes sums within [`LOAD_SUM_TOLERANCE`]
/// of 1. Anything further off is left for validation to report.
fn load_distribution(entries: Vec<TransitionEntry>) -> Transition {
    let dist: Transition = entries.into_iter().filter(|e| e.p != 0.0).map(|e| (e.to, e.p)).collect();
    let sum: f64 = dist.iter().map(|(_, p)| p).sum();
    let off = (sum - 1.0).abs();
    if off > 1e-12 && off <= LOAD_SUM_TOLERANCE && dist.iter().all(|&(_, p)| p > 0.0) {
        return dist.into_iter().map(|(s, p)| (s, p / sum)).collect();
    }
    dist
}

impl PolicyFile {
    pub fn from_policies(policy1: &TimeDependentPolicy, policy2: &TimeDependentPolicy) -> Self {
        let entries = policy1
            .iter()
            .map(|(state, t, row)| PolicyEntry {
                state,
                t,
                row_probs: row.probs().to_vec(),
                col_probs: policy2.get(state, t).map(|c| c.probs().to_vec()).unwrap_or_default(),
            })
            .collect();
        Self {
            horizon: policy1.horizon(),
            entries,
        }
    }

    pub fn into_policies(self, path: &Path) -> Result<(TimeDependentPolicy, TimeDependentPolicy), CliError> {
        let first = self
            .entries
            .first()
            .ok_or_else(|| shape_error(path, "entries: policy has no entries".into()))?;
        let mut policy1 = TimeDependentPolicy::new(self.horizon, first.row_probs.len());
        let mut policy2 = TimeDependentPolicy::new(self.horizon, first.col_probs.len());
        for (k, e) in self.entries.into_iter().enumerate() {
            let context = |err: sgplan::Error| shape_error(path, format!("entries[{k}]: {err}"));
            policy1
                .insert(e.state, e.t, MixedStrategy::new(e.row_probs).map_err(context)?)
                .map_err(context)?;
            policy2
                .insert(e.state, e.t, MixedStrategy::new(e.col_probs).map_err(context)?)
                .map_err(context)?;
        }
        Ok((policy1, policy2))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let message = if field == "." {
            inner.to_string()
        } else {
            format!("{field}: {inner}")
        };
        shape_error(path, message)
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_game(path: &Path) -> Result<StochasticGame, CliError> {
    read_json::<GameFile>(path)?.into_game(path)
}

pub fn save_game(game: &StochasticGame, path: &Path) -> Result<(), CliError> {
    write_json(path, &GameFile::from_game(game))
}

pub fn game_to_json(game: &StochasticGame) -> String {
    serde_json::to_string_pretty(&GameFile::from_game(game)).expect("plain data serializes")
}

pub fn load_policy(path: &Path) -> Result<(TimeDependentPolicy, TimeDependentPolicy), CliError> {
    read_json::<PolicyFile>(path)?.into_policies(path)
}

pub fn save_policy(policy1: &TimeDependentPolicy, policy2: &TimeDependentPolicy, path: &Path) -> Result<(), CliError> {
    write_json(path, &PolicyFile::from_policies(policy1, policy2))
}
