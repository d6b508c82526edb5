//! Stochastic games with explicit transition kernels, the generative-model
//! capability used by the sparse planner, and instance generators.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix_games::{Matrix, MatrixGame, MixedStrategy};
use crate::seed::{derive, unit_f64};

pub type StateId = usize;

const TRANSITION_SUM_TOLERANCE: f64 = 1e-12;

/// Sparse successor distribution: `(next state, probability)` pairs.
pub type Transition = Vec<(StateId, f64)>;

/// Two-player stochastic game with a finite state space.
///
/// States are `0..n_states`; every stage game shares the same action
/// counts. Transitions are indexed by `(state, row action, col action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticGame {
    n_rows: usize,
    n_cols: usize,
    start_state: StateId,
    r_max: f64,
    stages: Vec<MatrixGame>,
    transitions: Vec<Transition>,
}

impl StochasticGame {
    /// Builds and validates a game. `r_max` defaults to the largest observed
    /// payoff magnitude.
    pub fn new(
        stages: Vec<MatrixGame>,
        transitions: Vec<Vec<Vec<Transition>>>,
        start_state: StateId,
        r_max: Option<f64>,
    ) -> Result<Self> {
        let game = Self::from_parts(stages, transitions, start_state, r_max)?;
        let report = game.validate();
        if report.is_empty() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(report))
        }
    }

    /// Builds a game checking only shapes. Use [`StochasticGame::validate`]
    /// for the numeric invariants.
    pub fn from_parts(
        stages: Vec<MatrixGame>,
        transitions: Vec<Vec<Vec<Transition>>>,
        start_state: StateId,
        r_max: Option<f64>,
    ) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::InvalidParameter("a stochastic game needs at least one state".into()))?;
        let (n_rows, n_cols) = (first.rows(), first.cols());
        for stage in &stages {
            if stage.rows() != n_rows {
                return Err(Error::DimensionMismatch {
                    what: "stage game rows",
                    expected: n_rows,
                    found: stage.rows(),
                });
            }
            if stage.cols() != n_cols {
                return Err(Error::DimensionMismatch {
                    what: "stage game columns",
                    expected: n_cols,
                    found: stage.cols(),
                });
            }
        }
        if transitions.len() != stages.len() {
            return Err(Error::DimensionMismatch {
                what: "transition states",
                expected: stages.len(),
                found: transitions.len(),
            });
        }
        let mut flat = Vec::with_capacity(stages.len() * n_rows * n_cols);
        for per_state in transitions {
            if per_state.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    what: "transition rows",
                    expected: n_rows,
                    found: per_state.len(),
                });
            }
            for per_row in per_state {
                if per_row.len() != n_cols {
                    return Err(Error::DimensionMismatch {
                        what: "transition columns",
                        expected: n_cols,
                        found: per_row.len(),
                    });
                }
                flat.extend(per_row);
            }
        }
        let r_max = r_max.unwrap_or_else(|| stages.iter().map(MatrixGame::max_abs).fold(0.0, f64::max));
        Ok(Self {
            n_rows,
            n_cols,
            start_state,
            r_max,
            stages,
            transitions: flat,
        })
    }

    pub fn n_states(&self) -> usize {
        self.stages.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn start_state(&self) -> StateId {
        self.start_state
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn stage(&self, state: StateId) -> &MatrixGame {
        &self.stages[state]
    }

    pub fn stages(&self) -> &[MatrixGame] {
        &self.stages
    }

    pub fn transition(&self, state: StateId, i: usize, j: usize) -> &[(StateId, f64)] {
        &self.transitions[(state * self.n_rows + i) * self.n_cols + j]
    }

    pub fn with_start_state(mut self, start: StateId) -> Result<Self> {
        if start >= self.n_states() {
            return Err(Error::UnknownState(start));
        }
        self.start_state = start;
        Ok(self)
    }

    pub fn is_zero_sum(&self) -> bool {
        self.stages.iter().all(MatrixGame::is_zero_sum)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.start_state >= self.n_states() {
            violations.push(Violation::StartState {
                start: self.start_state,
                n_states: self.n_states(),
            });
        }
        if !(self.r_max.is_finite() && self.r_max >= 0.0) {
            violations.push(Violation::RMax { r_max: self.r_max });
        }
        for (s, stage) in self.stages.iter().enumerate() {
            for (player, m) in [(1, stage.payoff1()), (2, stage.payoff2())] {
                for i in 0..m.rows() {
                    for j in 0..m.cols() {
                        let v = m[(i, j)];
                        if !v.is_finite() || v.abs() > self.r_max {
                            violations.push(Violation::Payoff {
                                state: s,
                                player,
                                row: i,
                                col: j,
                                value: v,
                                r_max: self.r_max,
                            });
                        }
                    }
                }
            }
            for i in 0..self.n_rows {
                for j in 0..self.n_cols {
                    let dist = self.transition(s, i, j);
                    let mut total = 0.0;
                    for &(to, p) in dist {
                        if to >= self.n_states() {
                            violations.push(Violation::UnknownSuccessor {
                                state: s,
                                row: i,
                                col: j,
                                to,
                            });
                        }
                        if !(p.is_finite() && p >= 0.0) {
                            violations.push(Violation::NegativeProbability {
                                state: s,
                                row: i,
                                col: j,
                                to,
                                p,
                            });
                        }
                        total += p;
                    }
                    if total.is_nan() || (total - 1.0).abs() > TRANSITION_SUM_TOLERANCE {
                        violations.push(Violation::TransitionSum {
                            state: s,
                            row: i,
                            col: j,
                            sum: total,
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    StartState { start: StateId, n_states: usize },
    RMax { r_max: f64 },
    Payoff { state: StateId, player: u8, row: usize, col: usize, value: f64, r_max: f64 },
    TransitionSum { state: StateId, row: usize, col: usize, sum: f64 },
    NegativeProbability { state: StateId, row: usize, col: usize, to: StateId, p: f64 },
    UnknownSuccessor { state: StateId, row: usize, col: usize, to: StateId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartState { start, n_states } => {
                write!(f, "start state {start} is not one of the {n_states} states")
            }
            Violation::RMax { r_max } => write!(f, "r_max {r_max} is not a finite nonnegative number"),
            Violation::Payoff { state, player, row, col, value, r_max } => write!(
                f,
                "payoff{player} at (s={state}, i={row}, j={col}) is {value}, outside [-{r_max}, {r_max}]"
            ),
            Violation::TransitionSum { state, row, col, sum } => {
                write!(f, "transition (s={state}, i={row}, j={col}) sums to {sum}")
            }
            Violation::NegativeProbability { state, row, col, to, p } => {
                write!(f, "transition (s={state}, i={row}, j={col}) -> {to} has probability {p}")
            }
            Violation::UnknownSuccessor { state, row, col, to } => {
                write!(f, "transition (s={state}, i={row}, j={col}) targets unknown state {to}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Black-box access to a stochastic game: payoffs per state and the
/// ability to sample successors.
///
/// Sampling is a pure function of its arguments and the supplied stream.
pub trait GenerativeModel: Sync {
    fn n_rows(&self) -> usize;

    fn n_cols(&self) -> usize;

    fn payoffs(&self, state: StateId) -> Cow<'_, MatrixGame>;

    fn sample(&self, state: StateId, i: usize, j: usize, rng: &mut dyn RngCore) -> StateId;

    /// Exact successor distribution, when the model has one.
    fn exact_transition(&self, _state: StateId, _i: usize, _j: usize) -> Option<&[(StateId, f64)]> {
        None
    }

    /// Number of states when the state space is `0..n`.
    fn state_count(&self) -> Option<usize> {
        None
    }

    fn r_max(&self) -> f64;
}

/// Adapter exposing an explicit game through the generative interface.
/// Sampling inverts the stored CDF.
#[derive(Debug, Clone, Copy)]
pub struct ExplicitModel<'a> {
    game: &'a StochasticGame,
}

pub fn as_generative(game: &StochasticGame) -> ExplicitModel<'_> {
    ExplicitModel { game }
}

impl ExplicitModel<'_> {
    pub fn game(&self) -> &StochasticGame {
        self.game
    }
}

impl GenerativeModel for ExplicitModel<'_> {
    fn n_rows(&self) -> usize {
        self.game.n_rows
    }

    fn n_cols(&self) -> usize {
        self.game.n_cols
    }

    fn payoffs(&self, state: StateId) -> Cow<'_, MatrixGame> {
        Cow::Borrowed(self.game.stage(state))
    }

    fn sample(&self, state: StateId, i: usize, j: usize, rng: &mut dyn RngCore) -> StateId {
        let dist = self.game.transition(state, i, j);
        let u = unit_f64(rng);
        let mut cumulative = 0.0;
        for &(to, p) in dist {
            cumulative += p;
            if u < cumulative {
                return to;
            }
        }
        // u landed in the rounding slack above the last cumulative sum
        dist.iter().rev().find(|(_, p)| *p > 0.0).map_or(dist[0].0, |(to, _)| *to)
    }

    fn exact_transition(&self, state: StateId, i: usize, j: usize) -> Option<&[(StateId, f64)]> {
        Some(self.game.transition(state, i, j))
    }

    fn state_count(&self) -> Option<usize> {
        Some(self.game.n_states())
    }

    fn r_max(&self) -> f64 {
        self.game.r_max
    }
}

/// A generative model over an unbounded state space whose payoffs and
/// successors are pseudo-random functions of `(seed, state, ...)`.
///
/// Each `(state, i, j)` moves uniformly to one of `branching` hashed
/// successors. Payoffs are uniform in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedModel {
    pub n_rows: usize,
    pub n_cols: usize,
    pub branching: usize,
    pub seed: u64,
}

impl HashedModel {
    fn unit(&self, words: &[u64]) -> f64 {
        (derive(self.seed, words) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl GenerativeModel for HashedModel {
    fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn payoffs(&self, state: StateId) -> Cow<'_, MatrixGame> {
        let s = state as u64;
        let m1 = Matrix::from_fn(self.n_rows, self.n_cols, |i, j| 2.0 * self.unit(&[1, s, i as u64, j as u64]) - 1.0);
        let m2 = Matrix::from_fn(self.n_rows, self.n_cols, |i, j| 2.0 * self.unit(&[2, s, i as u64, j as u64]) - 1.0);
        Cow::Owned(MatrixGame::new(m1, m2).expect("hashed payoffs are finite"))
    }

    fn sample(&self, state: StateId, i: usize, j: usize, rng: &mut dyn RngCore) -> StateId {
        let k = (unit_f64(rng) * self.branching as f64) as u64;
        derive(self.seed, &[3, state as u64, i as u64, j as u64, k]) as StateId
    }

    fn r_max(&self) -> f64 {
        1.0
    }
}

/// Parameters of [`random_game`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGameSpec {
    pub n_states: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub branching: usize,
    pub payoff_scale: f64,
    pub seed: u64,
    pub zero_sum: bool,
}

/// Random instance: payoffs uniform in `[-scale, scale]`, each `(s, i, j)`
/// moving to `branching` distinct uniformly chosen successors with
/// normalized positive weights. Deterministic in the seed.
pub fn random_game(spec: RandomGameSpec) -> Result<StochasticGame> {
    let RandomGameSpec {
        n_states,
        n_rows,
        n_cols,
        branching,
        payoff_scale,
        seed,
        zero_sum,
    } = spec;
    if n_states == 0 || n_rows == 0 || n_cols == 0 || branching == 0 {
        return Err(Error::InvalidParameter("counts must be at least 1".into()));
    }
    if branching > n_states {
        return Err(Error::InvalidParameter(format!(
            "branching {branching} exceeds the number of states {n_states}"
        )));
    }
    if !(payoff_scale.is_finite() && payoff_scale >= 0.0) {
        return Err(Error::InvalidParameter(format!("payoff scale {payoff_scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| Matrix::from_fn(n_rows, n_cols, |_, _| rng.gen_range(-1.0..=1.0) * payoff_scale);
    let mut stages = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let m1 = draw(&mut rng);
        let stage = if zero_sum {
            MatrixGame::zero_sum(m1)?
        } else {
            let m2 = draw(&mut rng);
            MatrixGame::new(m1, m2)?
        };
        stages.push(stage);
    }
    let mut transitions = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let mut per_state = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let mut per_row = Vec::with_capacity(n_cols);
            for _ in 0..n_cols {
                let mut successors = index::sample(&mut rng, n_states, branching).into_vec();
                successors.sort_unstable();
                let weights: Vec<f64> = successors.iter().map(|_| 1.0 - rng.gen::<f64>()).collect();
                per_row.push(normalized(successors, weights));
            }
            per_state.push(per_row);
        }
        transitions.push(per_state);
    }
    StochasticGame::new(stages, transitions, 0, Some(payoff_scale))
}

fn normalized(successors: Vec<StateId>, weights: Vec<f64>) -> Transition {
    let total: f64 = weights.iter().sum();
    let mut dist: Transition = successors.into_iter().zip(weights).map(|(s, w)| (s, w / total)).collect();
    // push the rounding residue onto the last entry
    let head: f64 = dist[..dist.len() - 1].iter().map(|(_, p)| p).sum();
    if let Some(last) = dist.last_mut() {
        last.1 = (1.0 - head).max(0.0);
    }
    dist
}

/// The repeated matrix game: one state with a probability-1 self-loop.
pub fn single_state_game(stage: MatrixGame) -> StochasticGame {
    let transitions = vec![vec![vec![vec![(0, 1.0)]; stage.cols()]; stage.rows()]];
    let r_max = stage.r_max();
    StochasticGame::new(vec![stage], transitions, 0, r_max).expect("self-loop game is valid")
}

/// Per-player map from `(state, time remaining)` to a mixed strategy.
///
/// Time remaining `t` ranges over `0..horizon`; `t = 0` is the last stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentPolicy {
    horizon: usize,
    actions: usize,
    entries: BTreeMap<(StateId, usize), MixedStrategy>,
}

impl TimeDependentPolicy {
    pub fn new(horizon: usize, actions: usize) -> Self {
        Self {
            horizon,
            actions,
            entries: BTreeMap::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn insert(&mut self, state: StateId, t: usize, strategy: MixedStrategy) -> Result<()> {
        if t >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "time remaining {t} outside horizon {}",
                self.horizon
            )));
        }
        if strategy.len() != self.actions {
            return Err(Error::DimensionMismatch {
                what: "policy strategy",
                expected: self.actions,
                found: strategy.len(),
            });
        }
        self.entries.insert((state, t), strategy);
        Ok(())
    }

    pub fn get(&self, state: StateId, t: usize) -> Result<&MixedStrategy> {
        self.entries
            .get(&(state, t))
            .ok_or(Error::MissingPolicyEntry { state, t })
    }

    /// Entries ordered by `(state, t)`.
    pub fn iter(&self) -> impl Iterator<Item = (StateId, usize, &MixedStrategy)> {
        self.entries.iter().map(|(&(s, t), m)| (s, t, m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The same strategy at every `(state, t)` for `n_states` states.
    pub fn constant(n_states: usize, horizon: usize, strategy: &MixedStrategy) -> Self {
        let mut policy = Self::new(horizon, strategy.len());
        for s in 0..n_states {
            for t in 0..horizon {
                policy.entries.insert((s, t), strategy.clone());
            }
        }
        policy
    }
}
