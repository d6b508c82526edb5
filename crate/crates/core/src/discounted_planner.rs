//! Discounted value iteration over backup matrices with a stationary
//! policy pair, plus post-hoc checks: the Shapley contraction bound, a
//! worst-case security certificate and a probe for the Nash-selection
//! variant.
//!
//! Values are discounted sums `r₀ + γr₁ + γ²r₂ + …`, not averages.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite_planner::backup_game;
use crate::game_model::{StateId, StochasticGame};
use crate::matrix_games::{MatrixGame, MixedStrategy, Player, Selection, StrategyProfile};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
/// Slack allowed in `delta_{t+1} ≤ γ·delta_t`.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iterations: usize,
    /// Converged once the sup-norm change of the value tables is at most this.
    pub tolerance: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// One sweep's worth of state: backup games, selected profiles and values.
#[derive(Debug, Clone)]
pub struct DiscountedIterate {
    pub iteration: usize,
    pub games: Vec<MatrixGame>,
    pub profiles: Vec<StrategyProfile>,
    /// Sup-norm change from the previous iterate (0 for the first).
    pub delta: f64,
}

impl DiscountedIterate {
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.profiles.iter().map(|p| (p.value1, p.value2)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DiscountedSolution {
    pub gamma: f64,
    pub policy1: Vec<MixedStrategy>,
    pub policy2: Vec<MixedStrategy>,
    /// Per-state `(v_1[s], v_2[s])` from the last sweep.
    pub values: Vec<(f64, f64)>,
    pub last: DiscountedIterate,
    /// `deltas[k]` is the change produced by sweep `k + 1`.
    pub deltas: Vec<f64>,
    pub converged: bool,
}

impl DiscountedSolution {
    pub fn iterations(&self) -> usize {
        self.last.iteration
    }

    pub fn policy(&self, player: Player) -> &[MixedStrategy] {
        match player {
            Player::Row => &self.policy1,
            Player::Col => &self.policy2,
        }
    }

    pub fn value(&self, player: Player, state: StateId) -> f64 {
        match player {
            Player::Row => self.values[state].0,
            Player::Col => self.values[state].1,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("discount factor must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

fn sweep<S: Selection + ?Sized>(
    game: &StochasticGame,
    gamma: f64,
    selection: &S,
    previous: Option<&DiscountedIterate>,
) -> Result<DiscountedIterate> {
    let iteration = previous.map_or(0, |p| p.iteration + 1);
    let continuation = previous.map(DiscountedIterate::values);
    let level: Vec<(MatrixGame, StrategyProfile)> = (0..game.n_states())
        .into_par_iter()
        .map(|s| {
            let q = match &continuation {
                None => game.stage(s).clone(),
                Some(values) => backup_game(game, s, gamma, values)?,
            };
            let profile = selection.select(&q).map_err(|e| Error::SelectionFailed {
                state: s,
                t: iteration,
                source: Box::new(e),
            })?;
            Ok((q, profile))
        })
        .collect::<Result<_>>()?;
    let (games, profiles): (Vec<_>, Vec<_>) = level.into_iter().unzip();
    let delta = match previous {
        None => 0.0,
        Some(p) => sup_change(&p.profiles, &profiles),
    };
    Ok(DiscountedIterate {
        iteration,
        games,
        profiles,
        delta,
    })
}

fn sup_change(a: &[StrategyProfile], b: &[StrategyProfile]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.value1 - y.value1).abs().max((x.value2 - y.value2).abs()))
        .fold(0.0, f64::max)
}

/// Discounted value iteration. A run that hits the iteration cap is
/// returned with `converged == false`.
pub fn infinite_vi<S: Selection + ?Sized>(
    game: &StochasticGame,
    gamma: f64,
    selection: &S,
    stop: StopRule,
) -> Result<DiscountedSolution> {
    infinite_vi_observed(game, gamma, selection, stop, |_| {})
}

/// [`infinite_vi`] calling `observe` on every iterate, starting with the
/// first sweep (iteration 0, delta 0).
pub fn infinite_vi_observed<S: Selection + ?Sized>(
    game: &StochasticGame,
    gamma: f64,
    selection: &S,
    stop: StopRule,
    mut observe: impl FnMut(&DiscountedIterate),
) -> Result<DiscountedSolution> {
    check_gamma(gamma)?;
    let mut current = sweep(game, gamma, selection, None)?;
    observe(&current);
    let mut deltas = Vec::new();
    let mut converged = false;
    while current.iteration < stop.max_iterations {
        let next = sweep(game, gamma, selection, Some(&current))?;
        observe(&next);
        deltas.push(next.delta);
        current = next;
        if current.delta <= stop.tolerance {
            converged = true;
            break;
        }
    }
    Ok(DiscountedSolution {
        gamma,
        policy1: current.profiles.iter().map(|p| p.row.clone()).collect(),
        policy2: current.profiles.iter().map(|p| p.col.clone()).collect(),
        values: current.values(),
        last: current,
        deltas,
        converged,
    })
}

/// Applies one more backup to a solution and returns the sup-norm change.
pub fn fixed_point_residual<S: Selection + ?Sized>(
    game: &StochasticGame,
    solution: &DiscountedSolution,
    selection: &S,
) -> Result<f64> {
    let next = sweep(game, solution.gamma, selection, Some(&solution.last))?;
    Ok(next.delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionViolation {
    /// Index into the delta trace of the offending `delta_{t+1}`.
    pub index: usize,
    pub delta: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContractionReport {
    pub violations: Vec<ContractionViolation>,
}

impl ContractionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `delta_{t+1} ≤ γ·delta_t + 1e-9` along a delta trace.
pub fn contraction_check(deltas: &[f64], gamma: f64) -> ContractionReport {
    let violations = deltas
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| {
            let bound = gamma * w[0] + CONTRACTION_SLACK;
            (w[1] > bound).then_some(ContractionViolation {
                index: k + 1,
                delta: w[1],
                bound,
            })
        })
        .collect();
    ContractionReport { violations }
}

/// Worst-case discounted value for `player` of a stationary strategy from
/// every state, the opponent minimizing by value iteration to `tolerance`.
pub fn worst_case_values(
    game: &StochasticGame,
    policy: &[MixedStrategy],
    player: Player,
    gamma: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if policy.len() != game.n_states() {
        return Err(Error::DimensionMismatch {
            what: "stationary policy states",
            expected: game.n_states(),
            found: policy.len(),
        });
    }
    let (own, other) = match player {
        Player::Row => (game.n_rows(), game.n_cols()),
        Player::Col => (game.n_cols(), game.n_rows()),
    };
    if let Some(bad) = policy.iter().find(|p| p.len() != own) {
        return Err(Error::DimensionMismatch {
            what: "stationary policy strategy",
            expected: own,
            found: bad.len(),
        });
    }
    let mut values = vec![0.0; game.n_states()];
    loop {
        let next: Vec<f64> = (0..game.n_states())
            .map(|s| {
                let payoff = game.stage(s).payoff(player);
                (0..other)
                    .map(|b| {
                        policy[s]
                            .probs()
                            .iter()
                            .enumerate()
                            .filter(|(_, &p)| p > 0.0)
                            .map(|(a, &p)| {
                                let (i, j) = match player {
                                    Player::Row => (a, b),
                                    Player::Col => (b, a),
                                };
                                let cont: f64 = game.transition(s, i, j).iter().map(|&(n, q)| q * values[n]).sum();
                                p * (payoff[(i, j)] + gamma * cont)
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let change = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if change <= tolerance {
            return Ok(values);
        }
    }
}

/// Claimed security value minus the worst-case value actually guaranteed
/// by each player's stationary policy, from `start`.
pub fn security_certificate(game: &StochasticGame, solution: &DiscountedSolution, start: StateId) -> Result<(f64, f64)> {
    if start >= game.n_states() {
        return Err(Error::UnknownState(start));
    }
    let w1 = worst_case_values(game, &solution.policy1, Player::Row, solution.gamma, 1e-9)?;
    let w2 = worst_case_values(game, &solution.policy2, Player::Col, solution.gamma, 1e-9)?;
    Ok((solution.values[start].0 - w1[start], solution.values[start].1 - w2[start]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    Converged { iteration: usize },
    /// The value table at `iteration` repeats the one `period` sweeps earlier.
    Cyclic { iteration: usize, period: usize },
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub outcome: ProbeOutcome,
    pub deltas: Vec<f64>,
    /// Selected profile per state for every sweep.
    pub profiles: Vec<Vec<StrategyProfile>>,
}

/// Value table rounded to 9 decimals.
fn fingerprint(profiles: &[StrategyProfile]) -> Vec<i64> {
    profiles
        .iter()
        .flat_map(|p| [p.value1, p.value2])
        .map(|v| (v * 1e9).round() as i64)
        .collect()
}

/// Runs discounted value iteration with a Nash selection function and
/// classifies the trajectory as converged, cyclic or undetermined within
/// `max_iterations` sweeps.
pub fn nash_mode_probe<S: Selection + ?Sized>(
    game: &StochasticGame,
    gamma: f64,
    selection: &S,
    max_iterations: usize,
    tolerance: f64,
) -> Result<ProbeReport> {
    check_gamma(gamma)?;
    let mut current = sweep(game, gamma, selection, None)?;
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    seen.insert(fingerprint(&current.profiles), 0);
    let mut deltas = Vec::new();
    let mut profiles = vec![current.profiles.clone()];
    let mut outcome = ProbeOutcome::Undetermined;
    while current.iteration < max_iterations {
        current = sweep(game, gamma, selection, Some(&current))?;
        deltas.push(current.delta);
        profiles.push(current.profiles.clone());
        if current.delta <= tolerance {
            outcome = ProbeOutcome::Converged {
                iteration: current.iteration,
            };
            break;
        }
        let key = fingerprint(&current.profiles);
        if let Some(&earlier) = seen.get(&key) {
            let period = current.iteration - earlier;
            if period >= 2 {
                outcome = ProbeOutcome::Cyclic {
                    iteration: current.iteration,
                    period,
                };
                break;
            }
        }
        seen.insert(key, current.iteration);
    }
    Ok(ProbeReport {
        outcome,
        deltas,
        profiles,
    })
}
