//! Argument parsing, validated run configuration and mode dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use trp_core::mdp::{
    expected_robustness, forward_probabilities, memoryless_projection, occupancy_from_strategy, occupancy_gap, plan_mdp,
    sample_leaf, Evaluation, HistoryTree, LabeledMdp, MdpError, OccupancyLp, OccupancySolution, RewardConfig, Strategy,
};
use trp_core::milp::{build_problem1, decode, DecodedSolution, EncodeError, EncodingConfig, MilpModel};
use trp_core::mitl::{score_to_f64, task_robustness};
use trp_core::oracle::{shift_scan_robustness, weighted_scan};
use trp_core::random::rng;
use trp_core::receding::{execute_with_replanning, plan_receding, RecedingConfig, RecedingContext, RecedingError, RewardCache, Sequential};
use trp_core::solver::{solve_milp, SolveOptions, SolveResult, SolveStatus};
use trp_core::vwts::Path as VwtsPath;
use trp_core::{RobustnessVariant, TaskSet, Time, UntilMode, Vwts};

use crate::bench::{self, BenchConfig, BenchKind};
use crate::clock::StdClock;
use crate::formats::{
    load_env, load_mdp, load_tasks, score_text, trace_text, FormatError, HistoryOut, ReplanOut, StrategyOut, TaskOut,
    TraceOut, VwtsPlanOut, WordEntryOut,
};
use crate::mps::{read_mps, write_mps, MpsFlavor};
use crate::parallel::{pool, run_seed, Parallel};
use crate::plot::{scaling_svg, Metric};
use crate::suite::{self, MdpCaps, MilpCaps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Optimal path of a deterministic environment (MILP).
    PlanVwts,
    /// Optimal history-dependent strategy of an MDP (occupancy LP).
    PlanMdp,
    /// First receding-horizon plan of an MDP and its worst-case bound.
    PlanReceding,
    /// Sampled executions, with replanning when `--receding` is given.
    Simulate,
    /// Scaling sweep written as CSV.
    Bench,
    /// Optimizers against brute-force oracles on seeded instances.
    OracleCheck,
    /// SVG charts of a benchmark CSV.
    Plot,
    /// Solve a model read from an MPS file.
    SolveMps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Left,
    Right,
    Combined,
}

impl From<VariantArg> for RobustnessVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Left => RobustnessVariant::Left,
            VariantArg::Right => RobustnessVariant::Right,
            VariantArg::Combined => RobustnessVariant::Combined,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UntilArg {
    /// Left operand required up to one step before the right one holds.
    Strict,
    /// Left operand required up to and including that step.
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Vwts,
    Mdp,
    Both,
}

#[derive(Clone, Debug, Parser)]
#[command(name = "trp", version, about = "Temporal-robustness planning for MITL tasks")]
pub struct Cli {
    #[arg(value_enum)]
    pub mode: Mode,
    /// Environment JSON with deterministic durations.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// MDP JSON with stochastic durations.
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Task file, one `priority ; formula` per line.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Planning horizon `T`.
    #[arg(long)]
    pub horizon: Option<Time>,
    /// Receding horizon `T_r`.
    #[arg(long)]
    pub receding: Option<Time>,
    /// Pre-history length `T′`; defaults to `T`.
    #[arg(long)]
    pub tprime: Option<Time>,
    #[arg(long, value_enum, default_value = "right")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "strict")]
    pub until: UntilArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Executions to simulate.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Also write the optimization model as `model.mps`.
    #[arg(long)]
    pub mps: bool,
    /// History cap for MDP planning.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: usize,
    /// Bench: state counts.
    #[arg(long, value_delimiter = ',')]
    pub states: Vec<usize>,
    /// Bench: task counts.
    #[arg(long, value_delimiter = ',')]
    pub task_counts: Vec<usize>,
    /// Bench: horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Vec<Time>,
    /// Bench: receding horizons of MDP cells.
    #[arg(long, value_delimiter = ',')]
    pub recedings: Vec<Time>,
    #[arg(long, value_enum, default_value = "both")]
    pub kind: KindArg,
    /// Bench: encode VWTS cells without solving.
    #[arg(long)]
    pub no_solve: bool,
    /// Oracle check: number of MILP and MDP instances.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Oracle check: largest state count of the MILP cases.
    #[arg(long, default_value_t = 6)]
    pub max_states: usize,
    /// Oracle check: largest horizon of the MILP cases.
    #[arg(long, default_value_t = 15)]
    pub max_horizon: Time,
    /// Plot and solve-mps: input file.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchGrid {
    pub kinds: Vec<BenchKind>,
    pub states: Vec<usize>,
    pub tasks: Vec<usize>,
    pub horizons: Vec<Time>,
    pub recedings: Vec<Time>,
    pub solve: bool,
}

/// Validated configuration of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub env: Option<PathBuf>,
    pub mdp: Option<PathBuf>,
    pub tasks: Option<PathBuf>,
    pub horizon: Option<Time>,
    pub receding: Option<Time>,
    pub tprime: Option<Time>,
    pub variant: RobustnessVariant,
    pub until_mode: UntilMode,
    pub seed: u64,
    pub time_limit: Option<f64>,
    pub out: PathBuf,
    pub runs: usize,
    pub export_mps: bool,
    pub cap: usize,
    pub bench: BenchGrid,
    pub count: usize,
    pub milp_caps: MilpCaps,
    pub input: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Format { .. } => 1,
            CliError::Infeasible(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

/// What a successful run produced. `code` is 3 when a time or node limit
/// stopped the solver but an incumbent was still written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let kinds = match cli.kind {
            KindArg::Vwts => vec![BenchKind::Vwts],
            KindArg::Mdp => vec![BenchKind::Mdp],
            KindArg::Both => vec![BenchKind::Vwts, BenchKind::Mdp],
        };
        let or = |v: Vec<usize>, d: &[usize]| if v.is_empty() { d.to_vec() } else { v };
        let or_t = |v: Vec<Time>, d: &[Time]| if v.is_empty() { d.to_vec() } else { v };
        let cfg = RunConfig {
            mode: cli.mode,
            env: cli.env,
            mdp: cli.mdp,
            tasks: cli.tasks,
            horizon: cli.horizon,
            receding: cli.receding,
            tprime: cli.tprime,
            variant: cli.variant.into(),
            until_mode: match cli.until {
                UntilArg::Strict => UntilMode::Strict,
                UntilArg::Closed => UntilMode::Closed,
            },
            seed: cli.seed,
            time_limit: cli.time_limit,
            out: cli.out,
            runs: cli.runs,
            export_mps: cli.mps,
            cap: cli.cap,
            bench: BenchGrid {
                kinds,
                states: or(cli.states, &[10, 46]),
                tasks: or(cli.task_counts, &[2, 5]),
                horizons: or_t(cli.horizons, &[25, 50, 100]),
                recedings: or_t(cli.recedings, &[5, 7]),
                solve: !cli.no_solve,
            },
            count: cli.count,
            milp_caps: MilpCaps { max_states: cli.max_states, max_horizon: cli.max_horizon, ..MilpCaps::default() },
            input: cli.input,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Mode-required inputs are present and numbers are in range.
    pub fn validate(&self) -> Result<(), CliError> {
        let need = |v: bool, flag: &str| if v { Ok(()) } else { Err(config(format!("{:?} needs {flag}", self.mode))) };
        match self.mode {
            Mode::PlanVwts => {
                need(self.env.is_some(), "--env")?;
                need(self.tasks.is_some(), "--tasks")?;
                need(self.horizon.is_some(), "--horizon")?;
            }
            Mode::PlanMdp | Mode::Simulate => {
                need(self.mdp.is_some(), "--mdp")?;
                need(self.tasks.is_some(), "--tasks")?;
            }
            Mode::PlanReceding => {
                need(self.mdp.is_some(), "--mdp")?;
                need(self.tasks.is_some(), "--tasks")?;
                need(self.receding.is_some(), "--receding")?;
            }
            Mode::Plot | Mode::SolveMps => need(self.input.is_some(), "--input")?,
            Mode::Bench | Mode::OracleCheck => {}
        }
        if let Some(t) = self.horizon {
            if t < 1 {
                return Err(config("--horizon must be at least 1"));
            }
        }
        if let Some(tr) = self.receding {
            if tr < 1 {
                return Err(config("--receding must be at least 1"));
            }
            if let Some(t) = self.horizon {
                if tr > t {
                    return Err(config(format!("--receding {tr} exceeds --horizon {t}")));
                }
            }
            if self.variant != RobustnessVariant::Right {
                return Err(config("receding-horizon planning supports --variant right only"));
            }
        }
        if self.tprime.is_some_and(|t| t < 0) {
            return Err(config("--tprime must be nonnegative"));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(config("--time-limit must be positive"));
        }
        if self.runs == 0 {
            return Err(config("--runs must be at least 1"));
        }
        if self.mode == Mode::Bench {
            let b = &self.bench;
            if b.states.contains(&0) || b.tasks.contains(&0) || b.horizons.iter().any(|&t| t < 2) {
                return Err(config("bench sizes must be positive"));
            }
            if b.kinds.contains(&BenchKind::Mdp) && b.recedings.iter().any(|&r| r < 1) {
                return Err(config("bench receding horizons must be positive"));
            }
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: PathBuf, text: &str, report: &mut Report) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    report.artifacts.push(path);
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

fn with_path<T>(path: &Path, r: Result<T, FormatError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Format { path: path.to_path_buf(), source })
}

fn load_task_file(cfg: &RunConfig) -> Result<TaskSet, CliError> {
    let p = cfg.tasks.as_deref().expect("validated");
    with_path(p, load_tasks(&read(p)?))
}

fn load_mdp_file(cfg: &RunConfig) -> Result<LabeledMdp, CliError> {
    let p = cfg.mdp.as_deref().expect("validated");
    let mdp = with_path(p, load_mdp(&read(p)?, cfg.horizon))?;
    if let Some(tr) = cfg.receding {
        if tr > mdp.horizon() {
            return Err(config(format!("--receding {tr} exceeds the horizon {}", mdp.horizon())));
        }
    }
    Ok(mdp)
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions { time_limit_secs: cfg.time_limit, ..SolveOptions::default() }
}

fn mdp_error(e: MdpError) -> CliError {
    match e {
        MdpError::TooManyHistories { .. } => CliError::Resource(e.to_string()),
        MdpError::Solve(SolveStatus::Infeasible) => CliError::Infeasible(e.to_string()),
        MdpError::Solve(_) => CliError::Resource(e.to_string()),
        MdpError::StrategyShape => CliError::Verification(e.to_string()),
        other => config(other.to_string()),
    }
}

fn receding_error(e: RecedingError) -> CliError {
    match e {
        RecedingError::Mdp(m) => mdp_error(m),
        RecedingError::SolverLimit(_) => CliError::Resource(e.to_string()),
        RecedingError::Decode(_) => CliError::Verification(e.to_string()),
        other => config(other.to_string()),
    }
}

/// Runs one invocation; artifacts are written only after they pass replay.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    match cfg.mode {
        Mode::PlanVwts => plan_vwts(cfg),
        Mode::PlanMdp => plan_mdp_mode(cfg),
        Mode::PlanReceding => plan_receding_mode(cfg),
        Mode::Simulate => simulate(cfg),
        Mode::Bench => bench_mode(cfg),
        Mode::OracleCheck => oracle_check(cfg),
        Mode::Plot => plot_mode(cfg),
        Mode::SolveMps => solve_mps(cfg),
    }
}

fn status_code(res: &SolveResult) -> Result<i32, CliError> {
    match res.status {
        SolveStatus::Optimal => Ok(0),
        SolveStatus::Infeasible => Err(CliError::Infeasible("the planning problem has no feasible path".into())),
        SolveStatus::Unbounded => Err(CliError::Verification("objective reported unbounded".into())),
        SolveStatus::TimeLimit | SolveStatus::NodeLimit if res.has_solution() => Ok(3),
        s => Err(CliError::Resource(format!("solver stopped with {s:?} and no solution"))),
    }
}

/// Rebuilds the decoded path's timing and word from the system and scores
/// it with the shift-scan oracle.
pub fn replay_vwts(ts: &Vwts, tasks: &TaskSet, ecfg: &EncodingConfig, dec: &DecodedSolution) -> Result<(), String> {
    let path = VwtsPath::new(ts, dec.path.states().to_vec()).map_err(|e| e.to_string())?;
    let times = ts.time_sequence(&path, ecfg.horizon).map_err(|e| e.to_string())?;
    if times != dec.time_sequence {
        return Err("time sequence differs from the system's".into());
    }
    let mut word = ts.timed_word(&path, ecfg.horizon).map_err(|e| e.to_string())?;
    if ecfg.variant != RobustnessVariant::Left {
        word = word.with_prehistory(ecfg.tprime);
    }
    for (i, task) in tasks.iter().enumerate() {
        let eta = shift_scan_robustness(&task.formula, &word, 0, ecfg.variant, ecfg.until_mode).map_err(|e| e.to_string())?;
        if eta != dec.robustness[i] {
            return Err(format!("task {i}: robustness {} but the scan gives {eta}", dec.robustness[i]));
        }
    }
    let total = weighted_scan(tasks, &word, ecfg.variant, ecfg.until_mode).map_err(|e| e.to_string())?;
    if total != dec.objective {
        return Err("objective differs from the scan".into());
    }
    Ok(())
}

fn export(cfg: &RunConfig, model: &MilpModel, report: &mut Report) -> Result<(), CliError> {
    if cfg.export_mps {
        write(cfg.out.join("model.mps"), &write_mps(model, MpsFlavor::Fixed), report)?;
    }
    Ok(())
}

fn plan_vwts(cfg: &RunConfig) -> Result<Report, CliError> {
    let horizon = cfg.horizon.expect("validated");
    let env = cfg.env.as_deref().expect("validated");
    let ts = with_path(env, load_env(&read(env)?, Some(horizon)))?;
    let tasks = load_task_file(cfg)?;
    let mut ecfg = EncodingConfig::new(horizon, cfg.tprime.unwrap_or(horizon)).with_variant(cfg.variant);
    ecfg.until_mode = cfg.until_mode;
    let problem = build_problem1(&ts, &tasks, &ecfg).map_err(|e| match e {
        EncodeError::Model(m) => CliError::Verification(m.to_string()),
        other => config(other.to_string()),
    })?;
    let mut report = Report::default();
    export(cfg, &problem.model, &mut report)?;
    let clock = StdClock::new();
    let res = solve_milp(&problem.model, &solve_options(cfg), Some(&clock)).map_err(|e| CliError::Verification(e.to_string()))?;
    report.code = status_code(&res)?;
    let dec = decode(&problem, &res.values, &ts, &tasks).map_err(|e| CliError::Verification(e.to_string()))?;
    replay_vwts(&ts, &tasks, &ecfg, &dec).map_err(CliError::Verification)?;
    let word = ts.timed_word(&dec.path, horizon).map_err(|e| CliError::Verification(e.to_string()))?;
    let out = VwtsPlanOut {
        status: format!("{:?}", res.status),
        horizon,
        tprime: ecfg.tprime,
        variant: format!("{:?}", cfg.variant).to_lowercase(),
        path: dec.path.states().iter().map(|&s| ts.states()[s].name.clone()).collect(),
        times: dec.time_sequence.as_slice().to_vec(),
        word: word.entries().iter().map(|e| WordEntryOut { t: e.time, labels: e.labels.iter().cloned().collect() }).collect(),
        tasks: tasks
            .iter()
            .zip(&dec.robustness)
            .map(|(t, &r)| TaskOut { formula: t.formula.to_string(), priority: t.priority.to_string(), robustness: r })
            .collect(),
        objective: score_text(&dec.objective),
        objective_f64: score_to_f64(&dec.objective),
        bound: res.bound,
        lpvars: problem.model.num_vars(),
        lpconst: problem.model.num_constraints(),
    };
    write(cfg.out.join("plan.json"), &json(&out), &mut report)?;
    report.summary.push(format!("status {:?}", res.status));
    report.summary.push(format!("path {}", out.path.join(" ")));
    report.summary.push(format!("objective {}", out.objective));
    Ok(report)
}

/// Checks a strategy against its own tree: occupancy propagated forward
/// matches the LP solution, the exact expectation matches the objective,
/// and every reachable leaf is a valid trace of the MDP.
pub fn replay_strategy(
    mdp: &LabeledMdp,
    tree: &HistoryTree,
    lp: &OccupancyLp,
    solution: &OccupancySolution,
    strategy: &Strategy,
    rewards: &[f64],
) -> Result<(), String> {
    let replay = occupancy_from_strategy(tree, lp, strategy).map_err(|e| e.to_string())?;
    let gap = occupancy_gap(&replay, &solution.values);
    if gap > 1e-9 {
        return Err(format!("occupancy replay differs by {gap:e}"));
    }
    let value = expected_robustness(tree, strategy, rewards, Evaluation::Exact, &mut rng(0)).map_err(|e| e.to_string())?;
    if (value.mean - solution.objective).abs() > 1e-6 {
        return Err(format!("strategy value {} differs from the LP optimum {}", value.mean, solution.objective));
    }
    let reach = forward_probabilities(tree, strategy).map_err(|e| e.to_string())?;
    for leaf in tree.leaves() {
        if reach[leaf] > 0.0 {
            mdp.validate_trace(&tree.trace(leaf)).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn strategy_out(
    mode: &str,
    mdp: &LabeledMdp,
    tree: &HistoryTree,
    lp: &OccupancyLp,
    solution: &OccupancySolution,
    strategy: &Strategy,
    rewards: &[f64],
    tprime: Time,
    variant: RobustnessVariant,
) -> Result<StrategyOut, CliError> {
    let reach = forward_probabilities(tree, strategy).map_err(|e| CliError::Verification(e.to_string()))?;
    let projected = memoryless_projection(tree, strategy).map_err(|e| CliError::Verification(e.to_string()))?;
    let memoryless = expected_robustness(tree, &projected, rewards, Evaluation::Exact, &mut rng(0))
        .map_err(|e| CliError::Verification(e.to_string()))?;
    let mut map = std::collections::BTreeMap::new();
    for (i, n) in tree.nodes().iter().enumerate() {
        if n.is_leaf() {
            continue;
        }
        let actions = n.actions.iter().zip(&strategy.probs[i]).map(|((a, _), &p)| (a.describe(mdp), p)).collect();
        map.insert(trace_text(mdp, &tree.trace(i)), HistoryOut { step: n.depth, reach: reach[i], actions });
    }
    Ok(StrategyOut {
        mode: mode.to_string(),
        horizon: mdp.horizon(),
        cut: tree.cut(),
        tprime,
        variant: format!("{variant:?}").to_lowercase(),
        objective: solution.objective,
        memoryless_value: memoryless.mean,
        histories: tree.len(),
        lpvars: lp.model.num_vars(),
        lpconst: lp.model.num_constraints(),
        strategy: map,
    })
}

fn plan_mdp_mode(cfg: &RunConfig) -> Result<Report, CliError> {
    let mdp = load_mdp_file(cfg)?;
    let tasks = load_task_file(cfg)?;
    let tprime = cfg.tprime.unwrap_or(mdp.horizon());
    let rcfg = RewardConfig { variant: cfg.variant, tprime, until_mode: cfg.until_mode };
    let plan = plan_mdp(&mdp, &tasks, &rcfg, cfg.cap, &solve_options(cfg)).map_err(mdp_error)?;
    let mut report = Report::default();
    export(cfg, &plan.lp.model, &mut report)?;
    let rewards = plan.rewards_f64();
    replay_strategy(&mdp, &plan.tree, &plan.lp, &plan.solution, &plan.strategy, &rewards).map_err(CliError::Verification)?;
    let out = strategy_out("plan-mdp", &mdp, &plan.tree, &plan.lp, &plan.solution, &plan.strategy, &rewards, tprime, cfg.variant)?;
    write(cfg.out.join("strategy.json"), &json(&out), &mut report)?;
    report.summary.push(format!("histories {}", plan.tree.len()));
    report.summary.push(format!("expected robustness {}", plan.solution.objective));
    report.summary.push(format!("memoryless projection {}", out.memoryless_value));
    Ok(report)
}

fn receding_context<'a>(cfg: &RunConfig, mdp: &'a LabeledMdp, tasks: &'a TaskSet) -> Result<RecedingContext<'a>, CliError> {
    let tr = cfg.receding.expect("checked by caller");
    let mut rc = RecedingConfig::new(tr, cfg.tprime.unwrap_or(mdp.horizon()));
    rc.until_mode = cfg.until_mode;
    rc.cap = cfg.cap;
    rc.solve = solve_options(cfg);
    RecedingContext::new(mdp, tasks, rc).map_err(receding_error)
}

fn plan_receding_mode(cfg: &RunConfig) -> Result<Report, CliError> {
    let mdp = load_mdp_file(cfg)?;
    let tasks = load_task_file(cfg)?;
    let ctx = receding_context(cfg, &mdp, &tasks)?;
    let mut cache = RewardCache::new();
    let plan = pool().install(|| plan_receding(&ctx, &[(mdp.initial(), 0)], &mut cache, &Parallel)).map_err(receding_error)?;
    let mut report = Report::default();
    export(cfg, &plan.lp.model, &mut report)?;
    let rewards: Vec<f64> = plan.rewards.iter().map(score_to_f64).collect();
    replay_strategy(&mdp, &plan.tree, &plan.lp, &plan.solution, &plan.strategy, &rewards).map_err(CliError::Verification)?;
    let tprime = ctx.config.tprime;
    let out = strategy_out("plan-receding", &mdp, &plan.tree, &plan.lp, &plan.solution, &plan.strategy, &rewards, tprime, cfg.variant)?;
    write(cfg.out.join("strategy.json"), &json(&out), &mut report)?;
    report.summary.push(format!("cut {} histories {}", plan.cut, plan.tree.len()));
    report.summary.push(format!("worst-case lower bound {}", plan.bound));
    Ok(report)
}

fn simulate(cfg: &RunConfig) -> Result<Report, CliError> {
    let mdp = load_mdp_file(cfg)?;
    let tasks = load_task_file(cfg)?;
    let tprime = cfg.tprime.unwrap_or(mdp.horizon());
    let seeds: Vec<(usize, u64)> = (0..cfg.runs).map(|i| (i, run_seed(cfg.seed, i as u64))).collect();
    let mut traces = Vec::with_capacity(cfg.runs);
    let mut log = Vec::new();
    match cfg.receding {
        Some(_) => {
            let ctx = receding_context(cfg, &mdp, &tasks)?;
            let clock = StdClock::new();
            let results: Vec<_> = pool().install(|| {
                seeds
                    .par_iter()
                    .map_init(RewardCache::new, |cache, &(i, seed)| {
                        execute_with_replanning(&ctx, &mut rng(seed), cache, &Sequential, Some(&clock)).map(|ex| (i, seed, ex))
                    })
                    .collect()
            });
            for r in results {
                let (i, seed, ex) = r.map_err(receding_error)?;
                mdp.validate_trace(&ex.trace).map_err(|e| CliError::Verification(format!("run {i}: {e}")))?;
                for rec in &ex.records {
                    log.push(ReplanOut {
                        run: i,
                        step: rec.step,
                        pinned: trace_text(&mdp, &rec.pinned),
                        cut: rec.cut,
                        bound: rec.bound,
                        histories: rec.histories,
                        wall_secs: rec.wall_secs,
                    });
                }
                traces.push(TraceOut {
                    run: i,
                    seed,
                    trace: trace_text(&mdp, &ex.trace),
                    robustness: ex.robustness,
                    realized: score_text(&ex.realized),
                    realized_f64: score_to_f64(&ex.realized),
                    bounds: ex.bounds,
                });
            }
        }
        None => {
            let rcfg = RewardConfig { variant: cfg.variant, tprime, until_mode: cfg.until_mode };
            let plan = plan_mdp(&mdp, &tasks, &rcfg, cfg.cap, &solve_options(cfg)).map_err(mdp_error)?;
            let rewards = plan.rewards_f64();
            replay_strategy(&mdp, &plan.tree, &plan.lp, &plan.solution, &plan.strategy, &rewards)
                .map_err(CliError::Verification)?;
            for &(i, seed) in &seeds {
                let leaf = sample_leaf(&plan.tree, &plan.strategy, &mut rng(seed));
                let trace = plan.tree.trace(leaf);
                mdp.validate_trace(&trace).map_err(|e| CliError::Verification(format!("run {i}: {e}")))?;
                let word = mdp.trace_word(&trace, rcfg.prehistory()).map_err(|e| CliError::Verification(e.to_string()))?;
                let robustness =
                    task_robustness(&tasks, &word, cfg.variant, cfg.until_mode).map_err(|e| CliError::Verification(e.to_string()))?;
                let realized = tasks.weighted_sum(&robustness);
                if realized != plan.rewards[leaf] {
                    return Err(CliError::Verification(format!("run {i}: realized value differs from the leaf reward")));
                }
                traces.push(TraceOut {
                    run: i,
                    seed,
                    trace: trace_text(&mdp, &trace),
                    robustness,
                    realized: score_text(&realized),
                    realized_f64: score_to_f64(&realized),
                    bounds: Vec::new(),
                });
            }
        }
    }
    let mut report = Report::default();
    let lines: String = traces.iter().map(|t| serde_json::to_string(t).expect("serializable") + "\n").collect();
    write(cfg.out.join("traces.jsonl"), &lines, &mut report)?;
    if cfg.receding.is_some() {
        let lines: String = log.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect();
        write(cfg.out.join("replan.jsonl"), &lines, &mut report)?;
    }
    let mean = traces.iter().map(|t| t.realized_f64).sum::<f64>() / traces.len() as f64;
    report.summary.push(format!("runs {} mean realized robustness {mean}", traces.len()));
    Ok(report)
}

fn bench_mode(cfg: &RunConfig) -> Result<Report, CliError> {
    let b = &cfg.bench;
    let cells = bench::grid(&b.kinds, &b.states, &b.tasks, &b.horizons, &b.recedings);
    let min_h = b.horizons.iter().copied().min().unwrap_or(2);
    let bcfg = BenchConfig {
        seed: cfg.seed,
        solve: b.solve,
        time_limit_secs: cfg.time_limit.or(Some(60.0)),
        tprime: cfg.tprime,
        cap: cfg.cap,
        max_task_horizon: min_h - 1,
    };
    let mut rows = Vec::new();
    let mut report = Report::default();
    for (cell, r) in cells.iter().zip(bench::run_grid(&cells, &bcfg)) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => report.summary.push(format!("cell {cell:?} failed: {e}")),
        }
    }
    let mut buf = Vec::new();
    bench::write_csv(&rows, &mut buf).map_err(|e| config(e.to_string()))?;
    write(cfg.out.join("bench.csv"), &String::from_utf8(buf).expect("csv is utf-8"), &mut report)?;
    report.summary.push(format!("{} cells", rows.len()));
    report.summary.push(format!("counts monotone in T and |D|: {}", bench::counts_monotone(&rows)));
    if rows.len() < cells.len() {
        report.code = 3;
    }
    Ok(report)
}

fn oracle_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let base = cfg.seed.wrapping_mul(1_000_003);
    let (milp, rob, mdp) = pool().install(|| {
        let milp: Vec<_> = (0..cfg.count as u64).into_par_iter().map(|i| suite::milp_case(base + i, &cfg.milp_caps)).collect();
        let rob: Vec<_> = (0..20 * cfg.count as u64).into_par_iter().map(|i| suite::robustness_case(base + i)).collect();
        let mdp: Vec<_> =
            (0..cfg.count.min(30) as u64).into_par_iter().map(|i| suite::mdp_case(base + i, &MdpCaps::default())).collect();
        (milp, rob, mdp)
    });
    let mut failures = 0;
    let mut tally = |name: &str, oks: Vec<Result<bool, String>>, report: &mut Report| {
        let total = oks.len();
        let mut good = 0;
        for (i, r) in oks.into_iter().enumerate() {
            match r {
                Ok(true) => good += 1,
                Ok(false) => report.summary.push(format!("{name}: case {i} disagrees")),
                Err(e) => report.summary.push(format!("{name}: case {i} failed: {e}")),
            }
        }
        failures += total - good;
        report.summary.push(format!("{name}: {good}/{total} agree"));
    };
    tally("milp-vs-enumeration", milp.into_iter().map(|r| r.map(|c| c.agrees()).map_err(|e| e.to_string())).collect(), &mut report);
    tally("robustness-vs-scan", rob.into_iter().map(|r| r.map(|c| c.core == c.scan).map_err(|e| e.to_string())).collect(), &mut report);
    tally(
        "occupancy-vs-expectimax",
        mdp.into_iter()
            .map(|r| r.map(|c| c.gap() <= 1e-6 && c.residual <= 1e-9 && c.replay_gap <= 1e-9).map_err(|e| e.to_string()))
            .collect(),
        &mut report,
    );
    if failures > 0 {
        return Err(CliError::Verification(format!("{failures} differential cases failed\n{}", report.summary.join("\n"))));
    }
    Ok(report)
}

fn plot_mode(cfg: &RunConfig) -> Result<Report, CliError> {
    let input = cfg.input.as_deref().expect("validated");
    let rows = bench::read_csv(read(input)?.as_bytes()).map_err(|e| config(format!("{}: {e}", input.display())))?;
    let mut report = Report::default();
    for (metric, name) in
        [(Metric::LpVars, "lpvars"), (Metric::LpConst, "lpconst"), (Metric::Encoding, "encoding"), (Metric::Solving, "solving")]
    {
        write(cfg.out.join(format!("{name}.svg")), &scaling_svg(&rows, metric), &mut report)?;
    }
    report.summary.push(format!("{} rows plotted", rows.len()));
    Ok(report)
}

fn solve_mps(cfg: &RunConfig) -> Result<Report, CliError> {
    let input = cfg.input.as_deref().expect("validated");
    let model = read_mps(&read(input)?).map_err(|e| config(format!("{}: {e}", input.display())))?;
    model.validate().map_err(|e| config(e.to_string()))?;
    let clock = StdClock::new();
    let res = solve_milp(&model, &solve_options(cfg), Some(&clock)).map_err(|e| config(e.to_string()))?;
    let code = status_code(&res)?;
    let mut report = Report { code, ..Report::default() };
    report.summary.push(format!("status {:?}", res.status));
    if let Some(obj) = res.objective {
        report.summary.push(format!("objective {obj}"));
    }
    report.summary.push(format!("variables {} constraints {}", model.num_vars(), model.num_constraints()));
    Ok(report)
}
