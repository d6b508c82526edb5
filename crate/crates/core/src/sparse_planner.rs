//! On-line sparse-sampling planning from a generative model.
//!
//! At `(s, t)` with `t > 0` the planner draws `m` successors for every pure
//! action pair, plans recursively at `t - 1` from each, and applies the
//! Nash selection function to the averaged backup matrices. Each draw uses
//! a stream derived from `(parent seed, s, t, i, j, ℓ)`, so results do not
//! depend on the order in which branches are evaluated.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite_planner::{backup_game, nash_certificate};
use crate::game_model::{as_generative, GenerativeModel, StateId, StochasticGame, TimeDependentPolicy};
use crate::matrix_games::{Matrix, MatrixGame, MixedStrategy, Selection, StrategyProfile};
use crate::seed::SeedSpec;

/// Default cap on the number of recursive calls in one plan.
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;

/// Output of one planning call at `(state, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePlanResult {
    pub profile: StrategyProfile,
    /// `(Q̂_1, Q̂_2)`: backup matrices evaluated at the profile (sum units).
    pub q_hats: (f64, f64),
    /// The backup matrices `Q̂_k[s, t]`.
    pub q_matrices: MatrixGame,
    pub nodes_expanded: u64,
}

/// Total calls made by a sampled plan at depth `t`:
/// `Σ_{d=0}^{t} (n₁·n₂·m)^d`, saturating.
pub fn tree_size(n_rows: usize, n_cols: usize, samples: usize, t: usize) -> u128 {
    let width = (n_rows as u128) * (n_cols as u128) * (samples as u128);
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=t {
        total = total.saturating_add(level);
        level = level.saturating_mul(width);
    }
    total
}

fn evaluate(q: MatrixGame, profile: StrategyProfile, nodes_expanded: u64) -> SparsePlanResult {
    let q1 = q.payoff1().bilinear(profile.row.probs(), profile.col.probs());
    let q2 = q.payoff2().bilinear(profile.row.probs(), profile.col.probs());
    SparsePlanResult {
        profile,
        q_hats: (q1, q2),
        q_matrices: q,
        nodes_expanded,
    }
}

/// Sparse-sampling planner bound to a model, a selection function and a
/// sample size.
pub struct SparsePlanner<'a, M: ?Sized, S: ?Sized> {
    model: &'a M,
    selection: &'a S,
    samples: usize,
    node_budget: u64,
    // base-case results depend only on the state
    leaves: RwLock<HashMap<StateId, (f64, f64)>>,
}

impl<'a, M, S> SparsePlanner<'a, M, S>
where
    M: GenerativeModel + ?Sized,
    S: Selection + ?Sized,
{
    pub fn new(model: &'a M, selection: &'a S, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("sample size m must be at least 1".into()));
        }
        Ok(Self {
            model,
            selection,
            samples,
            node_budget: DEFAULT_NODE_BUDGET,
            leaves: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_node_budget(mut self, budget: u64) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn plan(&self, state: StateId, t: usize, seed: SeedSpec) -> Result<SparsePlanResult> {
        let required = tree_size(self.model.n_rows(), self.model.n_cols(), self.samples, t);
        if required > self.node_budget as u128 {
            return Err(Error::NodeBudgetExceeded {
                required,
                budget: self.node_budget,
            });
        }
        if t == 0 {
            let stage = self.model.payoffs(state).into_owned();
            let profile = self.select(&stage, state, 0)?;
            return Ok(evaluate(stage, profile, 1));
        }
        let (q, nodes) = self.backup(state, t, seed)?;
        let profile = self.select(&q, state, t)?;
        Ok(evaluate(q, profile, nodes))
    }

    fn select(&self, game: &MatrixGame, state: StateId, t: usize) -> Result<StrategyProfile> {
        self.selection.select(game).map_err(|e| Error::SelectionFailed {
            state,
            t,
            source: Box::new(e),
        })
    }

    /// `(Q̂_1, Q̂_2)` and node count of the subtree rooted at `(state, t)`.
    fn node_value(&self, state: StateId, t: usize, seed: SeedSpec) -> Result<((f64, f64), u64)> {
        if t == 0 {
            return Ok((self.leaf_value(state)?, 1));
        }
        let (q, nodes) = self.backup(state, t, seed)?;
        let profile = self.select(&q, state, t)?;
        let result = evaluate(q, profile, nodes);
        Ok((result.q_hats, nodes))
    }

    fn leaf_value(&self, state: StateId) -> Result<(f64, f64)> {
        if let Some(v) = self.leaves.read().expect("leaf cache poisoned").get(&state) {
            return Ok(*v);
        }
        let stage = self.model.payoffs(state);
        let profile = self.select(&stage, state, 0)?;
        let value = (
            stage.payoff1().bilinear(profile.row.probs(), profile.col.probs()),
            stage.payoff2().bilinear(profile.row.probs(), profile.col.probs()),
        );
        self.leaves.write().expect("leaf cache poisoned").insert(state, value);
        Ok(value)
    }

    fn backup(&self, state: StateId, t: usize, seed: SeedSpec) -> Result<(MatrixGame, u64)> {
        let (n_rows, n_cols, m) = (self.model.n_rows(), self.model.n_cols(), self.samples);
        let branch = |k: usize| -> Result<((f64, f64), u64)> {
            let (i, j, ell) = (k / (n_cols * m), (k / m) % n_cols, k % m);
            let child_seed = seed.branch(state, t, i, j, ell);
            let next = self.model.sample(state, i, j, &mut child_seed.stream());
            self.node_value(next, t - 1, child_seed)
        };
        let count = n_rows * n_cols * m;
        let children: Vec<((f64, f64), u64)> = if t >= 2 {
            (0..count).into_par_iter().map(branch).collect::<Result<_>>()?
        } else {
            (0..count).map(branch).collect::<Result<_>>()?
        };

        let stage = self.model.payoffs(state);
        let mut q1 = Matrix::zeros(n_rows, n_cols);
        let mut q2 = Matrix::zeros(n_rows, n_cols);
        let mut nodes = 1u64;
        for i in 0..n_rows {
            for j in 0..n_cols {
                let start = (i * n_cols + j) * m;
                let samples = &children[start..start + m];
                nodes += samples.iter().map(|(_, n)| n).sum::<u64>();
                let (mean1, mean2) = shifted_mean(samples.iter().map(|(v, _)| *v), m);
                q1[(i, j)] = stage.payoff1()[(i, j)] + mean1;
                q2[(i, j)] = stage.payoff2()[(i, j)] + mean2;
            }
        }
        Ok((MatrixGame::new(q1, q2)?, nodes))
    }
}

/// Mean computed as `x₀ + Σ(x_ℓ − x₀)/m`; exact when all samples agree.
fn shifted_mean(values: impl Iterator<Item = (f64, f64)>, m: usize) -> (f64, f64) {
    let mut values = values.peekable();
    let Some(&(base1, base2)) = values.peek() else {
        return (0.0, 0.0);
    };
    let (mut d1, mut d2) = (0.0, 0.0);
    for (a, b) in values {
        d1 += a - base1;
        d2 += b - base2;
    }
    (base1 + d1 / m as f64, base2 + d2 / m as f64)
}

/// One planning call with the default node budget.
pub fn sparse_game<M, S>(
    model: &M,
    state: StateId,
    t: usize,
    samples: usize,
    seed: SeedSpec,
    selection: &S,
) -> Result<SparsePlanResult>
where
    M: GenerativeModel + ?Sized,
    S: Selection + ?Sized,
{
    SparsePlanner::new(model, selection, samples)?.plan(state, t, seed)
}

/// The planning recursion with sampled averages replaced by exact
/// expectations over the stored transition kernel.
pub fn exact_sparse_game<S: Selection + ?Sized>(
    game: &StochasticGame,
    state: StateId,
    t: usize,
    selection: &S,
) -> Result<SparsePlanResult> {
    if state >= game.n_states() {
        return Err(Error::UnknownState(state));
    }
    let mut memo: HashMap<(StateId, usize), SparsePlanResult> = HashMap::new();
    exact_node(game, state, t, selection, &mut memo)?;
    let mut result = memo.remove(&(state, t)).expect("root was evaluated");
    result.nodes_expanded = memo.len() as u64 + 1;
    Ok(result)
}

fn exact_node<S: Selection + ?Sized>(
    game: &StochasticGame,
    state: StateId,
    t: usize,
    selection: &S,
    memo: &mut HashMap<(StateId, usize), SparsePlanResult>,
) -> Result<(f64, f64)> {
    if let Some(r) = memo.get(&(state, t)) {
        return Ok(r.q_hats);
    }
    let q = if t == 0 {
        game.stage(state).clone()
    } else {
        let mut continuation = vec![(0.0, 0.0); game.n_states()];
        let mut successors: Vec<StateId> = Vec::new();
        for i in 0..game.n_rows() {
            for j in 0..game.n_cols() {
                successors.extend(game.transition(state, i, j).iter().map(|(s, _)| *s));
            }
        }
        successors.sort_unstable();
        successors.dedup();
        for next in successors {
            continuation[next] = exact_node(game, next, t - 1, selection, memo)?;
        }
        backup_game(game, state, 1.0, &continuation)?
    };
    let profile = selection.select(&q).map_err(|e| Error::SelectionFailed {
        state,
        t,
        source: Box::new(e),
    })?;
    let result = evaluate(q, profile, 1);
    let value = result.q_hats;
    memo.insert((state, t), result);
    Ok(value)
}

/// Sample size sufficient for a `2tε`-Nash guarantee:
/// `⌈c·((t³/ε²)·ln(t/ε) + t·ln(n/ε))⌉ + 1`, each logarithm clamped at 0.
pub fn sample_size(t: usize, epsilon: f64, n: usize, c: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if t == 0 || n == 0 {
        return Err(Error::InvalidParameter("t and n must be at least 1".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let t = t as f64;
    let n = n as f64;
    let depth_term = (t.powi(3) / (epsilon * epsilon)) * (t / epsilon).ln().max(0.0);
    let width_term = t * (n / epsilon).ln().max(0.0);
    let bound = (c * (depth_term + width_term)).ceil();
    if bound >= u64::MAX as f64 {
        return Err(Error::InvalidParameter("sample size overflows u64".into()));
    }
    Ok(bound as u64 + 1)
}

/// The global policy pair defined by planning afresh at every visited
/// `(state, t)` with seed `root.visit(state, t)`. Both players read their
/// halves from the same call. Each `(state, t)` is planned at most once.
pub struct InducedPolicy<'a, M: ?Sized, S: ?Sized> {
    planner: SparsePlanner<'a, M, S>,
    horizon: usize,
    root: SeedSpec,
    memo: Mutex<HashMap<(StateId, usize), Arc<SparsePlanResult>>>,
}

impl<'a, M, S> InducedPolicy<'a, M, S>
where
    M: GenerativeModel + ?Sized,
    S: Selection + ?Sized,
{
    pub fn new(model: &'a M, selection: &'a S, samples: usize, horizon: usize, root: SeedSpec) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        Ok(Self {
            planner: SparsePlanner::new(model, selection, samples)?,
            horizon,
            root,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Planning result at `(state, t)`, `t` in `0..horizon`.
    pub fn plan_at(&self, state: StateId, t: usize) -> Result<Arc<SparsePlanResult>> {
        if t >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "time remaining {t} outside horizon {}",
                self.horizon
            )));
        }
        if let Some(hit) = self.memo.lock().expect("policy memo poisoned").get(&(state, t)) {
            return Ok(Arc::clone(hit));
        }
        let result = Arc::new(self.planner.plan(state, t, self.root.visit(state, t))?);
        // concurrent planners of the same key compute identical results
        let mut memo = self.memo.lock().expect("policy memo poisoned");
        Ok(Arc::clone(memo.entry((state, t)).or_insert(result)))
    }

    pub fn strategies(&self, state: StateId, t: usize) -> Result<(MixedStrategy, MixedStrategy)> {
        let r = self.plan_at(state, t)?;
        Ok((r.profile.row.clone(), r.profile.col.clone()))
    }

    /// Tabulates the policy pair over `0..n_states`. Needs a model that
    /// enumerates its states.
    pub fn materialize(&self) -> Result<(TimeDependentPolicy, TimeDependentPolicy)> {
        let n_states = self.planner.model.state_count().ok_or_else(|| {
            Error::InvalidParameter("the model does not enumerate its states; only on-line use is possible".into())
        })?;
        let keys: Vec<(StateId, usize)> = (0..self.horizon)
            .flat_map(|t| (0..n_states).map(move |s| (s, t)))
            .collect();
        let plans: Vec<Arc<SparsePlanResult>> = keys
            .par_iter()
            .map(|&(s, t)| self.plan_at(s, t))
            .collect::<Result<_>>()?;
        let mut policy1 = TimeDependentPolicy::new(self.horizon, self.planner.model.n_rows());
        let mut policy2 = TimeDependentPolicy::new(self.horizon, self.planner.model.n_cols());
        for (&(s, t), plan) in keys.iter().zip(&plans) {
            policy1.insert(s, t, plan.profile.row.clone())?;
            policy2.insert(s, t, plan.profile.col.clone())?;
        }
        Ok((policy1, policy2))
    }
}

/// How the two players obtain their halves of the induced policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CopyMode {
    /// Both players read one shared run of the planner.
    #[default]
    Shared,
    /// Each player runs an independently seeded copy.
    Independent,
}

/// Sample count used by one experiment row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Samples(usize),
    /// Exact expectations in place of sampling.
    Exact,
}

impl std::fmt::Display for SampleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleMode::Samples(m) => write!(f, "{m}"),
            SampleMode::Exact => f.write_str("exact"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub m: SampleMode,
    pub seed: u64,
    /// Certificate gaps of the induced pair, per-stage average units.
    pub gap1: f64,
    pub gap2: f64,
    /// `|Q̂_k − V_k|` at the root, sum units.
    pub qerr1: f64,
    pub qerr2: f64,
    pub nodes: u64,
}

/// Seed of the second player's copy in [`CopyMode::Independent`].
pub fn independent_seed(seed: u64) -> SeedSpec {
    SeedSpec::new(crate::seed::derive(seed, &[0x1D_E9E4_DE47]))
}

/// For each sample mode and seed: materializes the induced policy pair,
/// certifies it from the start state, and measures the root estimation
/// error against the exact recursion.
pub fn gap_experiment<S: Selection + ?Sized>(
    game: &StochasticGame,
    horizon: usize,
    modes: &[SampleMode],
    seeds: &[u64],
    selection: &S,
    copy: CopyMode,
) -> Result<Vec<GapRow>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let start = game.start_state();
    let exact_root = exact_sparse_game(game, start, horizon - 1, selection)?;
    let exact_policy = exact_policies(game, horizon, selection)?;
    let model = as_generative(game);

    let mut rows = Vec::with_capacity(modes.len() * seeds.len());
    for &mode in modes {
        let batch: Vec<GapRow> = seeds
            .par_iter()
            .map(|&seed| {
                let (policy1, policy2, root) = match mode {
                    SampleMode::Exact => {
                        let (p1, p2) = exact_policy.clone();
                        (p1, p2, exact_root.clone())
                    }
                    SampleMode::Samples(m) => {
                        let shared = InducedPolicy::new(&model, selection, m, horizon, SeedSpec::new(seed))?;
                        let (p1, p2) = shared.materialize()?;
                        let root = (*shared.plan_at(start, horizon - 1)?).clone();
                        match copy {
                            CopyMode::Shared => (p1, p2, root),
                            CopyMode::Independent => {
                                let other = InducedPolicy::new(&model, selection, m, horizon, independent_seed(seed))?;
                                let (_, q2) = other.materialize()?;
                                (p1, q2, root)
                            }
                        }
                    }
                };
                let (gap1, gap2) = nash_certificate(game, &policy1, &policy2, horizon, start)?;
                Ok(GapRow {
                    m: mode,
                    seed,
                    gap1,
                    gap2,
                    qerr1: (root.q_hats.0 - exact_root.q_hats.0).abs(),
                    qerr2: (root.q_hats.1 - exact_root.q_hats.1).abs(),
                    nodes: root.nodes_expanded,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(batch);
    }
    Ok(rows)
}

/// Policy pair read off the exact recursion at every `(state, t)`.
pub fn exact_policies<S: Selection + ?Sized>(
    game: &StochasticGame,
    horizon: usize,
    selection: &S,
) -> Result<(TimeDependentPolicy, TimeDependentPolicy)> {
    let mut policy1 = TimeDependentPolicy::new(horizon, game.n_rows());
    let mut policy2 = TimeDependentPolicy::new(horizon, game.n_cols());
    for s in 0..game.n_states() {
        for t in 0..horizon {
            let r = exact_sparse_game(game, s, t, selection)?;
            policy1.insert(s, t, r.profile.row)?;
            policy2.insert(s, t, r.profile.col)?;
        }
    }
    Ok((policy1, policy2))
}
