//! Seeded differential cases: optimizers against brute-force oracles.
//!
//! Each case is a pure function of its seed, so suites can run in any order
//! or in parallel and still report identical results.

use rand::Rng;
use trp_core::mdp::{
    build_occupancy_lp, extract_strategy, flow_residual, history_rewards, occupancy_from_strategy, occupancy_gap,
    solve_occupancy, HistoryTree, LabeledMdp, MdpError, RewardConfig,
};
use trp_core::milp::{build_problem1, decode, DecodeError, EncodeError, EncodingConfig};
use trp_core::mitl::{robustness_with, score_to_f64, MitlError, Score};
use trp_core::oracle::{best_path_bruteforce, expectimax_mdp, shift_scan_robustness, OracleBudget, OracleError};
use trp_core::random::{
    random_formula, random_mdp, random_tasks, random_vwts, random_word, rng, FormulaParams, MdpParams, VwtsParams,
};
use trp_core::solver::{solve_milp, SolveOptions, SolveStatus};
use trp_core::{Formula, RobustnessVariant, TaskSet, Time, UntilMode};

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Mitl(#[from] MitlError),
    #[error(transparent)]
    Model(#[from] trp_core::milp::ModelError),
    #[error("solver stopped with {0:?}")]
    Solver(SolveStatus),
}

pub const VARIANTS: [RobustnessVariant; 3] = [RobustnessVariant::Right, RobustnessVariant::Left, RobustnessVariant::Combined];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MilpCaps {
    pub max_states: usize,
    pub max_horizon: Time,
    pub max_tasks: usize,
    pub max_depth: usize,
}

impl Default for MilpCaps {
    fn default() -> Self {
        MilpCaps { max_states: 6, max_horizon: 15, max_tasks: 3, max_depth: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpCase {
    pub seed: u64,
    pub states: usize,
    pub horizon: Time,
    pub tasks: usize,
    pub depth: usize,
    pub variant: RobustnessVariant,
    pub milp: Score,
    pub oracle: Score,
    pub lpvars: usize,
    pub paths: u64,
}

impl MilpCase {
    pub fn agrees(&self) -> bool {
        self.milp == self.oracle
    }
}

/// Random system and tasks within `caps`, solved by the MILP and by path
/// enumeration.
pub fn milp_case(seed: u64, caps: &MilpCaps) -> Result<MilpCase, SuiteError> {
    let mut r = rng(seed);
    let states = r.random_range(2..=caps.max_states.max(2));
    let horizon = r.random_range(6.min(caps.max_horizon)..=caps.max_horizon);
    let ntasks = r.random_range(1..=caps.max_tasks.max(1));
    let depth = r.random_range(1..=caps.max_depth.max(1));
    let variant = VARIANTS[r.random_range(0..3)];
    let tprime = r.random_range(0..=3);
    let params = VwtsParams { states, horizon, max_paths: Some(100_000), ..VwtsParams::default() };
    let ts = random_vwts(&mut r, &params);
    let fp = FormulaParams { depth, max_bound: (horizon as u32 / 4).max(1), ..FormulaParams::default() };
    let tasks = random_tasks(&mut r, &fp, ntasks, 3, horizon);
    let cfg = EncodingConfig::new(horizon, tprime).with_variant(variant);
    let problem = build_problem1(&ts, &tasks, &cfg)?;
    let res = solve_milp(&problem.model, &SolveOptions::default(), None)?;
    if res.status != SolveStatus::Optimal {
        return Err(SuiteError::Solver(res.status));
    }
    let dec = decode(&problem, &res.values, &ts, &tasks)?;
    let budget = OracleBudget::default();
    let best = best_path_bruteforce(&ts, &tasks, horizon, tprime, variant, UntilMode::Strict, &budget, None)?;
    Ok(MilpCase {
        seed,
        states,
        horizon,
        tasks: ntasks,
        depth,
        variant,
        milp: dec.objective,
        oracle: best.objective,
        lpvars: problem.model.num_vars(),
        paths: best.paths,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessCase {
    pub seed: u64,
    pub formula: Formula,
    pub t: Time,
    pub variant: RobustnessVariant,
    pub mode: UntilMode,
    pub core: i64,
    pub scan: i64,
}

/// One random `(formula, word, t, variant)` evaluated by the semantics
/// module and by the literal shift scan.
pub fn robustness_case(seed: u64) -> Result<RobustnessCase, SuiteError> {
    let mut r = rng(seed);
    let fp = FormulaParams { depth: r.random_range(0..=3), atoms: 3, max_bound: 5, max_arity: 3 };
    let formula = random_formula(&mut r, &fp);
    let horizon = r.random_range(4..=20);
    let pre = r.random_range(0..=4);
    let word = random_word(&mut r, 3, horizon, pre);
    let t = r.random_range(-pre..=horizon);
    let variant = VARIANTS[r.random_range(0..3)];
    let mode = if r.random_bool(0.5) { UntilMode::Strict } else { UntilMode::Closed };
    let core = robustness_with(&formula, &word, t, variant, mode)?;
    let scan = shift_scan_robustness(&formula, &word, t, variant, mode)?;
    Ok(RobustnessCase { seed, formula, t, variant, mode, core, scan })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MdpCaps {
    pub max_states: usize,
    pub max_horizon: Time,
    pub max_outcomes: usize,
}

impl Default for MdpCaps {
    fn default() -> Self {
        MdpCaps { max_states: 4, max_horizon: 8, max_outcomes: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpCase {
    pub seed: u64,
    pub states: usize,
    pub horizon: Time,
    pub histories: usize,
    pub lp: f64,
    pub expectimax: f64,
    pub residual: f64,
    pub replay_gap: f64,
}

impl MdpCase {
    pub fn gap(&self) -> f64 {
        (self.lp - self.expectimax).abs()
    }
}

pub fn mdp_instance(seed: u64, caps: &MdpCaps) -> (LabeledMdp, TaskSet, RobustnessVariant) {
    let mut r = rng(seed);
    let states = r.random_range(2..=caps.max_states.max(2));
    let horizon = r.random_range(3.min(caps.max_horizon)..=caps.max_horizon);
    let params = MdpParams {
        states,
        horizon,
        max_outcomes: caps.max_outcomes,
        out_degree: r.random_range(1..=2),
        max_histories: 60_000,
        ..MdpParams::default()
    };
    let mdp = random_mdp(&mut r, &params);
    let fp = FormulaParams { depth: r.random_range(1..=2), atoms: 2, max_bound: 3, ..FormulaParams::default() };
    let count = r.random_range(1..=2);
    let tasks = random_tasks(&mut r, &fp, count, 3, horizon);
    let variant = VARIANTS[r.random_range(0..3)];
    (mdp, tasks, variant)
}

/// Occupancy LP optimum against expectimax, plus flow and replay checks.
pub fn mdp_case(seed: u64, caps: &MdpCaps) -> Result<MdpCase, SuiteError> {
    let (mdp, tasks, variant) = mdp_instance(seed, caps);
    let tprime = 2;
    let cfg = RewardConfig::new(variant, tprime);
    let tree = HistoryTree::build(&mdp, &[(mdp.initial(), 0)], mdp.horizon(), 200_000)?;
    let rewards: Vec<f64> = history_rewards(&mdp, &tree, &tasks, &cfg)?.iter().map(score_to_f64).collect();
    let lp = build_occupancy_lp(&tree, &rewards);
    let sol = solve_occupancy(&lp, &SolveOptions::default())?;
    let strategy = extract_strategy(&tree, &lp, &sol.values);
    let replay = occupancy_from_strategy(&tree, &lp, &strategy)?;
    let expectimax = expectimax_mdp(&mdp, &tasks, tprime, variant, UntilMode::Strict, &OracleBudget::default(), None)?;
    Ok(MdpCase {
        seed,
        states: mdp.num_states(),
        horizon: mdp.horizon(),
        histories: tree.len(),
        lp: sol.objective,
        expectimax,
        residual: flow_residual(&lp, &sol.values),
        replay_gap: occupancy_gap(&replay, &sol.values),
    })
}

/// Instance `i` of the receding-horizon certification family.
pub fn receding_instance(i: u64, horizon: Time) -> (LabeledMdp, TaskSet) {
    let mut r = rng(5000 + i);
    let params = MdpParams { states: 4, horizon, max_histories: 50_000, ..MdpParams::default() };
    let mdp = random_mdp(&mut r, &params);
    let fp = FormulaParams { depth: 3, atoms: 2, max_bound: 4, ..FormulaParams::default() };
    let tasks = random_tasks(&mut r, &fp, 3, 3, horizon - 1);
    (mdp, tasks)
}
