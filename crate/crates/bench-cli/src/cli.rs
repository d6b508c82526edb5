//! Argument definitions and command handlers.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgplan::discounted_planner::{infinite_vi_observed, nash_mode_probe, ProbeOutcome, StopRule};
use sgplan::finite_planner::{finite_vi, nash_certificate, policy_value};
use sgplan::game_model::{as_generative, random_game, GenerativeModel, HashedModel, RandomGameSpec};
use sgplan::matrix_games::{SecuritySelection, SupportEnumeration};
use sgplan::sparse_planner::{gap_experiment, sample_size, CopyMode, GapRow, SampleMode, SparsePlanner};
use sgplan::{MixedStrategy, Player, SeedSpec, Selection};

use crate::format::{game_to_json, load_game, load_policy, save_game, save_policy};
use crate::trace::{TraceWriter, DISCOUNTED_HEADER, FINITE_HEADER, GAP_EXPERIMENT_HEADER};
use crate::{suite, CliError, EXIT_NOT_CONVERGED, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "sg-bench", version, about = "Planning experiments on two-player stochastic games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random stochastic game.
    Generate(GenerateArgs),
    /// Finite-horizon value iteration; writes the policy pair.
    SolveFinite(SolveFiniteArgs),
    /// Exploitability of a policy pair from one state.
    Certify(CertifyArgs),
    /// One sparse-sampling planning call.
    SparsePlan(SparsePlanArgs),
    /// Certificate gap and estimation error of induced policies across sample sizes and seeds.
    GapExperiment(GapExperimentArgs),
    /// Discounted value iteration with security selection.
    SolveDiscounted(SolveDiscountedArgs),
    /// Discounted value iteration with Nash selection, classified as converged or cyclic.
    ProbeNashMode(ProbeArgs),
    /// Sufficient sample count for a given accuracy.
    SampleSize(SampleSizeArgs),
    /// Run the experiments listed in a JSON config, in order.
    RunSuite(RunSuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectionKind {
    Nash,
    Security,
}

impl SelectionKind {
    fn get(self) -> &'static dyn Selection {
        static NASH: SupportEnumeration = SupportEnumeration { cap: sgplan::matrix_games::DEFAULT_ENUMERATION_CAP };
        match self {
            SelectionKind::Nash => &NASH,
            SelectionKind::Security => &SecuritySelection,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub states: usize,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub branching: usize,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub zero_sum: bool,
    /// Output path; the game is printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveFiniteArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long)]
    pub out_policy: Option<PathBuf>,
    /// CSV of (t, state, value1, value2) backed-up values.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SelectionKind::Nash)]
    pub selection: SelectionKind,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long)]
    pub policy: PathBuf,
    /// Defaults to the game's start state.
    #[arg(long)]
    pub start: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SparsePlanArgs {
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub game: Option<PathBuf>,
    /// Procedural model `hashed:<rows>x<cols>:<branching>:<seed>`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub state: usize,
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = sgplan::sparse_planner::DEFAULT_NODE_BUDGET)]
    pub node_budget: u64,
    #[arg(long, value_enum, default_value_t = SelectionKind::Nash)]
    pub selection: SelectionKind,
}

#[derive(Debug, Args)]
pub struct GapExperimentArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    /// Comma-separated sample sizes; `exact` uses the exact recursion.
    #[arg(long, default_value = "1,4,16,64")]
    pub m_list: String,
    /// Seed range `a..b` (end exclusive) or comma-separated list.
    #[arg(long, default_value = "0..20")]
    pub seeds: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Player 2 reads its policy from a second, independent planner run.
    #[arg(long)]
    pub independent: bool,
    #[arg(long, value_enum, default_value_t = SelectionKind::Nash)]
    pub selection: SelectionKind,
}

#[derive(Debug, Args)]
pub struct SolveDiscountedArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = sgplan::discounted_planner::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = sgplan::discounted_planner::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    /// CSV of (iter, delta, v1_s0, v2_s0) per sweep.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = sgplan::discounted_planner::DEFAULT_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SampleSizeArgs {
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct RunSuiteArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn stdout_error(source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(stdout_error)?
    };
}

fn join(probs: &MixedStrategy) -> String {
    probs.probs().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Generate(a) => generate(a, out),
        Command::SolveFinite(a) => solve_finite(a, out),
        Command::Certify(a) => certify(a, out),
        Command::SparsePlan(a) => sparse_plan(a, out),
        Command::GapExperiment(a) => gap(a, out),
        Command::SolveDiscounted(a) => solve_discounted(a, out),
        Command::ProbeNashMode(a) => probe(a, out),
        Command::SampleSize(a) => {
            say!(out, "{}", sample_size(a.t, a.epsilon, a.n, a.c)?);
            Ok(EXIT_OK)
        }
        Command::RunSuite(a) => suite::run_suite(&a.config, out),
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let game = random_game(RandomGameSpec {
        n_states: a.states,
        n_rows: a.rows,
        n_cols: a.cols,
        branching: a.branching,
        payoff_scale: a.scale,
        seed: a.seed,
        zero_sum: a.zero_sum,
    })?;
    match a.out {
        Some(path) => {
            save_game(&game, &path)?;
            say!(out, "wrote {}", path.display());
        }
        None => say!(out, "{}", game_to_json(&game)),
    }
    Ok(EXIT_OK)
}

fn solve_finite(a: SolveFiniteArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let game = load_game(&a.game)?;
    let solution = finite_vi(&game, a.horizon, a.selection.get())?;
    if let Some(path) = &a.out_policy {
        save_policy(&solution.policy1, &solution.policy2, path)?;
    }
    if let Some(path) = &a.trace {
        let mut trace = TraceWriter::create(path, &FINITE_HEADER)?;
        for t in 0..a.horizon {
            for s in 0..game.n_states() {
                let p = solution.table.profile(s, t);
                trace.row(vec![t.into(), s.into(), p.value1.into(), p.value2.into()])?;
            }
        }
        trace.finish()?;
    }
    let start = game.start_state();
    let (v1, v2) = policy_value(&game, &solution.policy1, &solution.policy2, a.horizon, start)?;
    say!(out, "start_state {start}");
    say!(out, "value1 {v1}");
    say!(out, "value2 {v2}");
    Ok(EXIT_OK)
}

fn certify(a: CertifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let game = load_game(&a.game)?;
    let (policy1, policy2) = load_policy(&a.policy)?;
    let start = a.start.unwrap_or(game.start_state());
    let (g1, g2) = nash_certificate(&game, &policy1, &policy2, a.horizon, start)?;
    say!(out, "gap1 {g1}");
    say!(out, "gap2 {g2}");
    Ok(EXIT_OK)
}

fn parse_model(spec: &str) -> Result<HashedModel, CliError> {
    let bad = || CliError::Usage(format!("model `{spec}` is not of the form hashed:<rows>x<cols>:<branching>:<seed>"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [kind, dims, branching, seed] = parts[..] else {
        return Err(bad());
    };
    if kind != "hashed" {
        return Err(bad());
    }
    let (rows, cols) = dims.split_once('x').ok_or_else(bad)?;
    let model = HashedModel {
        n_rows: rows.parse().map_err(|_| bad())?,
        n_cols: cols.parse().map_err(|_| bad())?,
        branching: branching.parse().map_err(|_| bad())?,
        seed: seed.parse().map_err(|_| bad())?,
    };
    if model.n_rows == 0 || model.n_cols == 0 || model.branching == 0 {
        return Err(bad());
    }
    Ok(model)
}

fn sparse_plan(a: SparsePlanArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded;
    let explicit;
    let hashed;
    let model: &dyn GenerativeModel = match (&a.game, &a.model) {
        (Some(path), _) => {
            loaded = load_game(path)?;
            if a.state >= loaded.n_states() {
                return Err(sgplan::Error::UnknownState(a.state).into());
            }
            explicit = as_generative(&loaded);
            &explicit
        }
        (None, Some(spec)) => {
            hashed = parse_model(spec)?;
            &hashed
        }
        (None, None) => return Err(CliError::Usage("one of --game or --model is required".into())),
    };
    let result = SparsePlanner::new(model, a.selection.get(), a.m)?
        .with_node_budget(a.node_budget)
        .plan(a.state, a.t, SeedSpec::new(a.seed))?;
    say!(out, "q_hat1 {}", result.q_hats.0);
    say!(out, "q_hat2 {}", result.q_hats.1);
    say!(out, "row_strategy {}", join(&result.profile.row));
    say!(out, "col_strategy {}", join(&result.profile.col));
    say!(out, "nodes {}", result.nodes_expanded);
    Ok(EXIT_OK)
}

pub fn parse_modes(list: &str) -> Result<Vec<SampleMode>, CliError> {
    list.split(',')
        .map(str::trim)
        .map(|item| match item {
            "exact" => Ok(SampleMode::Exact),
            _ => match item.parse::<usize>() {
                Ok(m) if m > 0 => Ok(SampleMode::Samples(m)),
                _ => Err(CliError::Usage(format!("bad sample size `{item}` in --m-list"))),
            },
        })
        .collect()
}

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("--seeds `{spec}` is neither a range a..b nor a comma list"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        if hi <= lo {
            return Err(bad());
        }
        return Ok((lo..hi).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn gap(a: GapExperimentArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let game = load_game(&a.game)?;
    let modes = parse_modes(&a.m_list)?;
    let seeds = parse_seeds(&a.seeds)?;
    let copy = if a.independent {
        CopyMode::Independent
    } else {
        CopyMode::Shared
    };
    let rows = gap_experiment(&game, a.horizon, &modes, &seeds, a.selection.get(), copy)?;
    let mut trace = TraceWriter::create(&a.out, &GAP_EXPERIMENT_HEADER)?;
    for r in &rows {
        trace.row(vec![
            r.m.to_string().into(),
            r.seed.into(),
            r.gap1.into(),
            r.gap2.into(),
            r.qerr1.into(),
            r.qerr2.into(),
            r.nodes.into(),
        ])?;
    }
    trace.finish()?;
    for mode in modes {
        let batch: Vec<&GapRow> = rows.iter().filter(|r| r.m == mode).collect();
        let pick = |f: fn(&GapRow) -> f64| median(batch.iter().map(|r| f(r)).collect());
        say!(
            out,
            "m={mode} median_gap1={} median_gap2={} median_qerr1={} median_qerr2={}",
            pick(|r| r.gap1),
            pick(|r| r.gap2),
            pick(|r| r.qerr1),
            pick(|r| r.qerr2)
        );
    }
    Ok(EXIT_OK)
}

fn solve_discounted(a: SolveDiscountedArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let game = load_game(&a.game)?;
    let stop = StopRule {
        max_iterations: a.max_iter,
        tolerance: a.tol,
    };
    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new();
    let solution = infinite_vi_observed(&game, a.gamma, &SecuritySelection, stop, |it| {
        let p = &it.profiles[0];
        rows.push((it.iteration, it.delta, p.value1, p.value2));
    })?;
    if let Some(path) = &a.trace {
        let mut trace = TraceWriter::create(path, &DISCOUNTED_HEADER)?;
        for (iter, delta, v1, v2) in rows {
            trace.row(vec![iter.into(), delta.into(), v1.into(), v2.into()])?;
        }
        trace.finish()?;
    }
    let start = game.start_state();
    say!(out, "converged {}", solution.converged);
    say!(out, "iterations {}", solution.iterations());
    say!(out, "value1 {}", solution.value(Player::Row, start));
    say!(out, "value2 {}", solution.value(Player::Col, start));
    Ok(if solution.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn probe(a: ProbeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let game = load_game(&a.game)?;
    let report = nash_mode_probe(&game, a.gamma, SelectionKind::Nash.get(), a.max_iter, a.tol)?;
    match report.outcome {
        ProbeOutcome::Converged { iteration } => say!(out, "converged at iteration {iteration}"),
        ProbeOutcome::Cyclic { iteration, period } => {
            say!(out, "cyclic with period {period} detected at iteration {iteration}")
        }
        ProbeOutcome::Undetermined => say!(out, "undetermined after {} iterations", report.deltas.len()),
    }
    if let Some(last) = report.deltas.last() {
        say!(out, "last_delta {last}");
    }
    Ok(EXIT_OK)
}
