//! Finite-horizon value iteration over backup matrices, exact evaluation of
//! time-dependent policy pairs, and best-response dynamic programming.
//!
//! Horizon convention: `H` stages are played and time remaining runs over
//! `0..H`, with `t = 0` the final stage. Backups hold undiscounted sums of
//! the remaining `t + 1` stage payoffs; every externally reported return is
//! the per-stage average (sum divided by `H`).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game_model::{StateId, StochasticGame, TimeDependentPolicy};
use crate::matrix_games::{Matrix, MatrixGame, MixedStrategy, Player, Selection, StrategyProfile};

/// Gaps below zero by less than this are rounding, not a better deviation.
pub const GAP_FLOOR: f64 = -1e-10;

/// Backup matrices `Q_k[s, t]` and the selected profile for every
/// `(state, t)`.
#[derive(Debug, Clone)]
pub struct BackupTable {
    horizon: usize,
    n_states: usize,
    // indexed [t * n_states + s]
    games: Vec<MatrixGame>,
    profiles: Vec<StrategyProfile>,
}

impl BackupTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn game(&self, state: StateId, t: usize) -> &MatrixGame {
        &self.games[t * self.n_states + state]
    }

    pub fn q(&self, state: StateId, t: usize, player: Player) -> &Matrix {
        self.game(state, t).payoff(player)
    }

    pub fn profile(&self, state: StateId, t: usize) -> &StrategyProfile {
        &self.profiles[t * self.n_states + state]
    }
}

#[derive(Debug, Clone)]
pub struct FiniteSolution {
    pub policy1: TimeDependentPolicy,
    pub policy2: TimeDependentPolicy,
    pub table: BackupTable,
}

impl FiniteSolution {
    pub fn policy(&self, player: Player) -> &TimeDependentPolicy {
        match player {
            Player::Row => &self.policy1,
            Player::Col => &self.policy2,
        }
    }
}

/// `M_k[s](i, j) + Σ_{s'} P(s'|s,i,j) · continuation_k[s']` for both players.
pub(crate) fn backup_game(
    game: &StochasticGame,
    state: StateId,
    discount: f64,
    continuation: &[(f64, f64)],
) -> Result<MatrixGame> {
    let stage = game.stage(state);
    let (n_rows, n_cols) = (game.n_rows(), game.n_cols());
    let mut q1 = Matrix::zeros(n_rows, n_cols);
    let mut q2 = Matrix::zeros(n_rows, n_cols);
    for i in 0..n_rows {
        for j in 0..n_cols {
            let (mut e1, mut e2) = (0.0, 0.0);
            for &(next, p) in game.transition(state, i, j) {
                e1 += p * continuation[next].0;
                e2 += p * continuation[next].1;
            }
            q1[(i, j)] = stage.payoff1()[(i, j)] + discount * e1;
            q2[(i, j)] = stage.payoff2()[(i, j)] + discount * e2;
        }
    }
    MatrixGame::new(q1, q2)
}

/// Finite-horizon value iteration: selects a profile of every backup game
/// and returns the resulting time-dependent policy pair.
pub fn finite_vi<S: Selection + ?Sized>(game: &StochasticGame, horizon: usize, selection: &S) -> Result<FiniteSolution> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let n_states = game.n_states();
    let mut games: Vec<MatrixGame> = Vec::with_capacity(horizon * n_states);
    let mut profiles: Vec<StrategyProfile> = Vec::with_capacity(horizon * n_states);

    for t in 0..horizon {
        let continuation: Vec<(f64, f64)> = if t == 0 {
            Vec::new()
        } else {
            profiles[(t - 1) * n_states..].iter().map(|p| (p.value1, p.value2)).collect()
        };
        let level: Vec<(MatrixGame, StrategyProfile)> = (0..n_states)
            .into_par_iter()
            .map(|s| {
                let q = if t == 0 {
                    game.stage(s).clone()
                } else {
                    backup_game(game, s, 1.0, &continuation)?
                };
                let profile = selection.select(&q).map_err(|e| Error::SelectionFailed {
                    state: s,
                    t,
                    source: Box::new(e),
                })?;
                Ok((q, profile))
            })
            .collect::<Result<_>>()?;
        for (q, profile) in level {
            games.push(q);
            profiles.push(profile);
        }
    }

    let mut policy1 = TimeDependentPolicy::new(horizon, game.n_rows());
    let mut policy2 = TimeDependentPolicy::new(horizon, game.n_cols());
    for t in 0..horizon {
        for s in 0..n_states {
            let p = &profiles[t * n_states + s];
            policy1.insert(s, t, p.row.clone())?;
            policy2.insert(s, t, p.col.clone())?;
        }
    }
    Ok(FiniteSolution {
        policy1,
        policy2,
        table: BackupTable {
            horizon,
            n_states,
            games,
            profiles,
        },
    })
}

fn check_start(game: &StochasticGame, start: StateId) -> Result<()> {
    if start >= game.n_states() {
        return Err(Error::UnknownState(start));
    }
    Ok(())
}

fn check_horizon(policy: &TimeDependentPolicy, horizon: usize) -> Result<()> {
    if horizon == 0 || horizon > policy.horizon() {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} not covered by policy of horizon {}",
            policy.horizon()
        )));
    }
    Ok(())
}

/// Expected total payoffs `(V_1[s, t], V_2[s, t])` for all states and
/// `t < horizon`, indexed `[t][s]`.
pub fn policy_totals(
    game: &StochasticGame,
    policy1: &TimeDependentPolicy,
    policy2: &TimeDependentPolicy,
    horizon: usize,
) -> Result<Vec<Vec<(f64, f64)>>> {
    check_horizon(policy1, horizon)?;
    check_horizon(policy2, horizon)?;
    let n_states = game.n_states();
    let mut totals: Vec<Vec<(f64, f64)>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut level = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let alpha = policy1.get(s, t)?;
            let beta = policy2.get(s, t)?;
            let stage = game.stage(s);
            let (mut v1, mut v2) = (0.0, 0.0);
            for (i, &a) in alpha.probs().iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, &b) in beta.probs().iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    let (mut c1, mut c2) = (0.0, 0.0);
                    if t > 0 {
                        for &(next, p) in game.transition(s, i, j) {
                            c1 += p * totals[t - 1][next].0;
                            c2 += p * totals[t - 1][next].1;
                        }
                    }
                    v1 += a * b * (stage.payoff1()[(i, j)] + c1);
                    v2 += a * b * (stage.payoff2()[(i, j)] + c2);
                }
            }
            level.push((v1, v2));
        }
        totals.push(level);
    }
    Ok(totals)
}

/// Per-stage average returns of both players over `horizon` stages from
/// `start`.
pub fn policy_value(
    game: &StochasticGame,
    policy1: &TimeDependentPolicy,
    policy2: &TimeDependentPolicy,
    horizon: usize,
    start: StateId,
) -> Result<(f64, f64)> {
    check_start(game, start)?;
    let totals = policy_totals(game, policy1, policy2, horizon)?;
    let (v1, v2) = totals[horizon - 1][start];
    Ok((v1 / horizon as f64, v2 / horizon as f64))
}

/// Optimal deterministic policy of `player` against a fixed opponent, and
/// its per-stage average value from `start`. Ties go to the lowest action.
pub fn best_response_dp(
    game: &StochasticGame,
    opponent: &TimeDependentPolicy,
    horizon: usize,
    player: Player,
    start: StateId,
) -> Result<(TimeDependentPolicy, f64)> {
    check_start(game, start)?;
    check_horizon(opponent, horizon)?;
    let n_states = game.n_states();
    let own_actions = match player {
        Player::Row => game.n_rows(),
        Player::Col => game.n_cols(),
    };
    let mut policy = TimeDependentPolicy::new(horizon, own_actions);
    let mut previous: Vec<f64> = Vec::new();
    for t in 0..horizon {
        let mut current = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let other = opponent.get(s, t)?;
            let payoff = game.stage(s).payoff(player);
            let mut best: Option<(usize, f64)> = None;
            for a in 0..own_actions {
                let mut value = 0.0;
                for (b, &q) in other.probs().iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    let (i, j) = match player {
                        Player::Row => (a, b),
                        Player::Col => (b, a),
                    };
                    let mut cont = 0.0;
                    if t > 0 {
                        for &(next, p) in game.transition(s, i, j) {
                            cont += p * previous[next];
                        }
                    }
                    value += q * (payoff[(i, j)] + cont);
                }
                if best.is_none_or(|(_, v)| value > v) {
                    best = Some((a, value));
                }
            }
            let (action, value) = best.expect("at least one action");
            policy.insert(s, t, MixedStrategy::pure(own_actions, action))?;
            current.push(value);
        }
        previous = current;
    }
    Ok((policy, previous[start] / horizon as f64))
}

/// Per-player exploitability of a policy pair: best-response value minus
/// the pair's value, per-stage average units, floored at [`GAP_FLOOR`].
pub fn nash_certificate(
    game: &StochasticGame,
    policy1: &TimeDependentPolicy,
    policy2: &TimeDependentPolicy,
    horizon: usize,
    start: StateId,
) -> Result<(f64, f64)> {
    let (v1, v2) = policy_value(game, policy1, policy2, horizon, start)?;
    let (_, b1) = best_response_dp(game, policy2, horizon, Player::Row, start)?;
    let (_, b2) = best_response_dp(game, policy1, horizon, Player::Col, start)?;
    Ok(((b1 - v1).max(GAP_FLOOR), (b2 - v2).max(GAP_FLOOR)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::single_state_game;
    use crate::matrix_games::{nash_select, SupportEnumeration};

    fn pd() -> StochasticGame {
        single_state_game(MatrixGame::from_rows(&[[3.0, 0.0], [5.0, 1.0]], &[[3.0, 5.0], [0.0, 1.0]]).unwrap())
    }

    fn pennies() -> StochasticGame {
        single_state_game(MatrixGame::zero_sum(Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap()).unwrap())
    }

    #[test]
    fn repeated_prisoners_dilemma() {
        let sol = finite_vi(&pd(), 3, &SupportEnumeration::default()).unwrap();
        for t in 0..3 {
            assert_eq!(sol.policy1.get(0, t).unwrap().probs(), &[0.0, 1.0]);
            assert_eq!(sol.policy2.get(0, t).unwrap().probs(), &[0.0, 1.0]);
        }
        assert_eq!(sol.table.profile(0, 2).value1, 3.0);
        let (v1, v2) = policy_value(&pd(), &sol.policy1, &sol.policy2, 3, 0).unwrap();
        assert_eq!((v1, v2), (1.0, 1.0));
    }

    #[test]
    fn repeated_matching_pennies() {
        let sol = finite_vi(&pennies(), 4, &SupportEnumeration::default()).unwrap();
        for t in 0..4 {
            assert!(sol.policy1.get(0, t).unwrap().max_abs_diff(&MixedStrategy::uniform(2)) < 1e-12);
            assert!(sol.table.profile(0, t).value1.abs() < 1e-12);
        }
    }

    #[test]
    fn first_table_is_stage_game() {
        let g = pd();
        let sol = finite_vi(&g, 2, &SupportEnumeration::default()).unwrap();
        assert_eq!(sol.table.game(0, 0), g.stage(0));
        assert_eq!(sol.table.profile(0, 0), &nash_select(g.stage(0)).unwrap());
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(finite_vi(&pd(), 0, &SupportEnumeration::default()).is_err());
    }

    #[test]
    fn constant_policies_on_pd() {
        let g = pd();
        let defect = TimeDependentPolicy::constant(1, 5, &MixedStrategy::pure(2, 1));
        let coop = TimeDependentPolicy::constant(1, 5, &MixedStrategy::pure(2, 0));
        assert_eq!(policy_value(&g, &defect, &defect, 5, 0).unwrap(), (1.0, 1.0));
        assert_eq!(policy_value(&g, &coop, &coop, 5, 0).unwrap(), (3.0, 3.0));
    }

    #[test]
    fn best_response_to_cooperation_is_defection() {
        let g = pd();
        let coop = TimeDependentPolicy::constant(1, 4, &MixedStrategy::pure(2, 0));
        let (policy, value) = best_response_dp(&g, &coop, 4, Player::Row, 0).unwrap();
        assert_eq!(value, 5.0);
        for t in 0..4 {
            assert_eq!(policy.get(0, t).unwrap().probs(), &[0.0, 1.0]);
        }
    }

    #[test]
    fn best_response_to_uniform_pennies() {
        let g = pennies();
        for h in 1..5 {
            let uniform = TimeDependentPolicy::constant(1, h, &MixedStrategy::uniform(2));
            let (_, value) = best_response_dp(&g, &uniform, h, Player::Col, 0).unwrap();
            assert!(value.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_play_on_pd_is_exploitable() {
        let g = pd();
        let uniform = TimeDependentPolicy::constant(1, 3, &MixedStrategy::uniform(2));
        let (g1, g2) = nash_certificate(&g, &uniform, &uniform, 3, 0).unwrap();
        // defecting against uniform earns 3 per stage versus 2.25
        assert!((g1 - 0.75).abs() < 1e-12);
        assert!((g2 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn missing_entry_reported() {
        let g = pd();
        let short = TimeDependentPolicy::constant(1, 2, &MixedStrategy::uniform(2));
        let mut partial = TimeDependentPolicy::new(3, 2);
        partial.insert(0, 0, MixedStrategy::uniform(2)).unwrap();
        assert!(policy_value(&g, &short, &short, 3, 0).is_err());
        let full = TimeDependentPolicy::constant(1, 3, &MixedStrategy::uniform(2));
        assert!(matches!(
            policy_value(&g, &partial, &full, 3, 0),
            Err(Error::MissingPolicyEntry { state: 0, t: 1 })
        ));
    }

    #[test]
    fn selection_failure_names_node() {
        let failing = |_: &MatrixGame| -> Result<StrategyProfile> { Err(Error::DegenerateGame { tolerance: 1e-8 }) };
        let err = finite_vi(&pd(), 2, &failing).unwrap_err();
        assert!(matches!(err, Error::SelectionFailed { state: 0, t: 0, .. }));
    }
}
