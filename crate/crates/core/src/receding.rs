//! Receding-horizon planning with a worst-case lookahead.
//!
//! The planner expands the history tree only until the cut time
//! `t_root + T_r`. Each frontier history is scored by the best right
//! robustness achievable in the worst-case system once that history is
//! pinned as the only possible beginning. Execution samples the plan up
//! to the cut, then replans from the realized history.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;
use rand::Rng;

use crate::clock::Clock;
use crate::mdp::{
    self, build_occupancy_lp, extract_strategy, sample_leaf, solve_occupancy, HistoryTree, LabeledMdp, MdpError, OccupancyLp,
    OccupancySolution, RewardConfig, Strategy,
};
use crate::milp::{build_problem1, decode, DecodeError, EncodeError, EncodingConfig, ModelError};
use crate::mitl::{score_to_f64, MitlError, RobustnessVariant, Score, TaskSet, UntilMode};
use crate::solver::{solve_milp, SolveOptions, SolveStatus};
use crate::vwts::{StateId, Vwts, VwtsError};
use crate::Time;

pub type Trace = Vec<(StateId, Time)>;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RecedingError {
    #[error("edge ({from},{to}) has support at some times but none at t={t}; author a default delay")]
    MissingSupport { from: StateId, to: StateId, t: Time },
    #[error("step {step} of the prefix is not an edge of the worst-case system")]
    PrefixOffSystem { step: usize },
    #[error("only right robustness is supported by the receding planner, got {0:?}")]
    UnsupportedVariant(RobustnessVariant),
    #[error("receding horizon {receding} must lie in [1, {horizon}]")]
    BadReceding { receding: Time, horizon: Time },
    #[error("pinned problem ended with status {0:?}")]
    SolverLimit(SolveStatus),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vwts(#[from] VwtsError),
    #[error(transparent)]
    Mitl(#[from] MitlError),
}

/// `Δ̄(s1, h, s2) = max dt` over the support of `P(s1, h, a, s2, ·)`.
///
/// Edges without support at any time are dropped. At `h = T` no departure
/// can arrive in time, so unsupported entries there get weight 1.
pub fn worst_case_vwts(mdp: &LabeledMdp) -> Result<Vwts, RecedingError> {
    let horizon = mdp.horizon();
    let kept: Vec<usize> = (0..mdp.edges().len())
        .filter(|&e| (0..=horizon).any(|t| !mdp.outcomes(e, t).is_empty()))
        .collect();
    for &e in &kept {
        let edge = mdp.edges()[e];
        for t in 0..horizon {
            if mdp.outcomes(e, t).is_empty() {
                return Err(RecedingError::MissingSupport { from: edge.from, to: edge.to, t });
            }
        }
    }
    let edges = kept.iter().map(|&e| mdp.edges()[e]).collect();
    let ts = Vwts::from_fn(mdp.states().to_vec(), mdp.initial(), edges, horizon, |i, t| {
        Some(mdp.outcomes(kept[i], t).iter().map(|o| o.dt).max().unwrap_or(1))
    })?;
    Ok(ts)
}

/// Weight standing in for an infinite delay: nothing taking it arrives
/// within the horizon.
pub fn blocked_weight(horizon: Time) -> u32 {
    horizon as u32 + 1
}

/// Copy of `w` in which the only way to act before `receding` is to
/// replay `trace` with its realized delays. Departures at or after
/// `receding` keep the worst-case weights; a transition that departs
/// before `receding` and arrives after it is pinned too.
pub fn pin_prefix(w: &Vwts, trace: &[(StateId, Time)], receding: Time) -> Result<Vwts, RecedingError> {
    let horizon = w.table_horizon();
    let mut realized: BTreeMap<(StateId, Time), (StateId, u32)> = BTreeMap::new();
    for (i, pair) in trace.windows(2).enumerate() {
        let ((s, t), (s2, t2)) = (pair[0], pair[1]);
        if w.edge_index(s, s2).is_none() || t2 <= t {
            return Err(RecedingError::PrefixOffSystem { step: i + 1 });
        }
        if t < receding {
            realized.insert((s, t), (s2, (t2 - t) as u32));
        }
    }
    let mut pinned = w.clone();
    let block = blocked_weight(horizon);
    for (e, edge) in w.edges().iter().enumerate() {
        for h in 0..receding.min(horizon + 1) {
            let weight = match realized.get(&(edge.from, h)) {
                Some(&(to, d)) if to == edge.to => d,
                _ => block,
            };
            pinned.set_edge_weight(e, h, weight)?;
        }
    }
    Ok(pinned)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecedingConfig {
    /// Planning window `T_r`.
    pub receding: Time,
    pub tprime: Time,
    pub variant: RobustnessVariant,
    pub until_mode: UntilMode,
    /// Cap on history-tree nodes per plan.
    pub cap: usize,
    pub solve: SolveOptions,
}

impl RecedingConfig {
    pub fn new(receding: Time, tprime: Time) -> Self {
        RecedingConfig {
            receding,
            tprime,
            variant: RobustnessVariant::Right,
            until_mode: UntilMode::default(),
            cap: 200_000,
            solve: SolveOptions::default(),
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig { variant: self.variant, tprime: self.tprime, until_mode: self.until_mode }
    }
}

/// Inputs shared by every plan of one execution.
#[derive(Clone, Debug)]
pub struct RecedingContext<'a> {
    pub mdp: &'a LabeledMdp,
    pub tasks: &'a TaskSet,
    pub worst: Vwts,
    pub config: RecedingConfig,
}

impl<'a> RecedingContext<'a> {
    pub fn new(mdp: &'a LabeledMdp, tasks: &'a TaskSet, config: RecedingConfig) -> Result<Self, RecedingError> {
        if config.variant != RobustnessVariant::Right {
            return Err(RecedingError::UnsupportedVariant(config.variant));
        }
        if config.receding < 1 || config.receding > mdp.horizon() {
            return Err(RecedingError::BadReceding { receding: config.receding, horizon: mdp.horizon() });
        }
        Ok(RecedingContext { mdp, tasks, worst: worst_case_vwts(mdp)?, config })
    }

    /// `-(T' + 1) · Σ p_i`, the lowest weighted robustness the encoding
    /// can produce.
    pub fn penalty(&self) -> Score {
        -self.tasks.total_priority().ratio() * Score::from_integer(self.config.tprime + 1)
    }
}

/// `R̄(s̃)`: optimum of the deterministic problem on the pinned worst-case
/// system over the full horizon, or the penalty if it has no solution.
pub fn worst_case_reward(ctx: &RecedingContext<'_>, trace: &[(StateId, Time)], cut: Time) -> Result<Score, RecedingError> {
    let horizon = ctx.mdp.horizon();
    if trace.last().is_some_and(|&(_, t)| t >= horizon) {
        // every departure is pinned, so the optimum is the trace itself
        return Ok(mdp::terminal_reward(ctx.mdp, ctx.tasks, trace, &ctx.config.reward_config())?);
    }
    let pinned = pin_prefix(&ctx.worst, trace, cut)?;
    let mut enc = EncodingConfig::new(horizon, ctx.config.tprime).with_variant(ctx.config.variant);
    enc.until_mode = ctx.config.until_mode;
    let problem = build_problem1(&pinned, ctx.tasks, &enc)?;
    let r = solve_milp(&problem.model, &ctx.config.solve, None)?;
    match r.status {
        SolveStatus::Optimal => Ok(decode(&problem, &r.values, &pinned, ctx.tasks)?.objective),
        SolveStatus::Infeasible => Ok(ctx.penalty()),
        other => Err(RecedingError::SolverLimit(other)),
    }
}

/// Memo of `R̄` keyed by trace and cut.
#[derive(Clone, Debug, Default)]
pub struct RewardCache {
    map: BTreeMap<(Trace, Time), Score>,
    pub hits: usize,
    pub misses: usize,
}

impl RewardCache {
    pub fn new() -> Self {
        RewardCache::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Computes `R̄` for a batch of traces sharing one cut. Implementations may
/// evaluate the batch in parallel.
pub trait RewardBatch {
    fn rewards(&self, ctx: &RecedingContext<'_>, traces: &[Trace], cut: Time) -> Vec<Result<Score, RecedingError>>;
}

/// Evaluates one trace after another.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl RewardBatch for Sequential {
    fn rewards(&self, ctx: &RecedingContext<'_>, traces: &[Trace], cut: Time) -> Vec<Result<Score, RecedingError>> {
        traces.iter().map(|t| worst_case_reward(ctx, t, cut)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RecedingPlan {
    pub tree: HistoryTree,
    pub cut: Time,
    /// `R̄` on leaves, zero on inner nodes.
    pub rewards: Vec<Score>,
    pub lp: OccupancyLp,
    pub solution: OccupancySolution,
    pub strategy: Strategy,
    /// Objective of the occupancy LP under `R̄`.
    pub bound: f64,
}

/// Plans from `root` up to `min(t_root + T_r, T)` with `R̄` at the cut.
pub fn plan_receding(
    ctx: &RecedingContext<'_>,
    root: &[(StateId, Time)],
    cache: &mut RewardCache,
    batch: &dyn RewardBatch,
) -> Result<RecedingPlan, RecedingError> {
    let horizon = ctx.mdp.horizon();
    let t_root = root.last().map_or(0, |p| p.1);
    let cut = (t_root + ctx.config.receding).min(horizon);
    let tree = HistoryTree::build(ctx.mdp, root, cut, ctx.config.cap)?;
    let leaves: Vec<usize> = tree.leaves().collect();
    let mut rewards = vec![Score::zero(); tree.len()];
    let mut missing: Vec<(usize, Trace)> = Vec::new();
    for &l in &leaves {
        let trace = tree.trace(l);
        match cache.map.get(&(trace.clone(), cut)) {
            Some(r) => {
                cache.hits += 1;
                rewards[l] = *r;
            }
            None => missing.push((l, trace)),
        }
    }
    let traces: Vec<Trace> = missing.iter().map(|m| m.1.clone()).collect();
    for ((l, trace), r) in missing.into_iter().zip(batch.rewards(ctx, &traces, cut)) {
        let r = r?;
        cache.misses += 1;
        cache.map.insert((trace, cut), r);
        rewards[l] = r;
    }
    let r: Vec<f64> = rewards.iter().map(score_to_f64).collect();
    let lp = build_occupancy_lp(&tree, &r);
    let solution = solve_occupancy(&lp, &ctx.config.solve)?;
    let strategy = extract_strategy(&tree, &lp, &solution.values);
    let bound = solution.objective;
    Ok(RecedingPlan { tree, cut, rewards, lp, solution, strategy, bound })
}

/// One replanning event of an execution.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplanRecord {
    pub step: usize,
    /// Realized history the plan started from.
    pub pinned: Trace,
    pub cut: Time,
    pub bound: f64,
    pub histories: usize,
    pub wall_secs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub trace: Trace,
    /// Per-task right robustness of the realized trace.
    pub robustness: Vec<i64>,
    pub realized: Score,
    /// One lower bound per replanning, in order.
    pub bounds: Vec<f64>,
    pub records: Vec<ReplanRecord>,
}

impl Execution {
    /// Realized value is at least the first bound.
    pub fn meets_initial_bound(&self, tol: f64) -> bool {
        self.bounds.first().is_none_or(|&b| score_to_f64(&self.realized) >= b - tol)
    }

    /// Every replanning bound is at least the previous one.
    pub fn bounds_non_decreasing(&self, tol: f64) -> bool {
        self.bounds.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

/// Plans, samples the plan until its cut, and replans from the realized
/// history until the horizon is reached.
pub fn execute_with_replanning(
    ctx: &RecedingContext<'_>,
    rng: &mut impl Rng,
    cache: &mut RewardCache,
    batch: &dyn RewardBatch,
    clock: Option<&dyn Clock>,
) -> Result<Execution, RecedingError> {
    let horizon = ctx.mdp.horizon();
    let mut root: Trace = vec![(ctx.mdp.initial(), 0)];
    let mut bounds = Vec::new();
    let mut records = Vec::new();
    loop {
        let started = clock.map(|c| c.now_secs());
        let plan = plan_receding(ctx, &root, cache, batch)?;
        let wall_secs = match (clock, started) {
            (Some(c), Some(s)) => Some(c.now_secs() - s),
            _ => None,
        };
        records.push(ReplanRecord {
            step: records.len(),
            pinned: root.clone(),
            cut: plan.cut,
            bound: plan.bound,
            histories: plan.tree.len(),
            wall_secs,
        });
        bounds.push(plan.bound);
        let leaf = sample_leaf(&plan.tree, &plan.strategy, rng);
        root = plan.tree.trace(leaf);
        if root.last().is_some_and(|&(_, t)| t >= horizon) {
            break;
        }
    }
    let cfg = ctx.config.reward_config();
    let word = ctx.mdp.trace_word(&root, cfg.prehistory())?;
    let robustness = crate::mitl::task_robustness(ctx.tasks, &word, cfg.variant, cfg.until_mode)?;
    let realized = ctx.tasks.weighted_sum(&robustness);
    Ok(Execution { trace: root, robustness, realized, bounds, records })
}
