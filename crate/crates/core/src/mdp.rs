//! Labeled MDPs whose actions are edge traversals and whose outcomes are
//! stochastic arrival times, together with the history-augmented view used
//! for planning: a prefix tree of traces, the occupancy-measure LP over it,
//! strategy extraction and strategy evaluation.
//!
//! Two conventions close gaps in the plain model:
//!
//! * a history that is not yet at the horizon but has no enabled action
//!   takes a mandatory `Wait` (unit delay, probability 1);
//! * an outcome arriving after the horizon is clamped to the horizon and
//!   the resulting node is flagged as clamped.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;
use rand::Rng;

use crate::milp::{Cmp, LinExpr, MilpModel, ModelError, ObjSense, VarId};
use crate::mitl::{self, score_to_f64, LabelSet, MitlError, Score, RobustnessVariant, TaskSet, TimedWord, UntilMode, WordEntry};
use crate::solver::{self, SolveOptions, SolveStatus};
use crate::vwts::{Edge, State, StateId, Vwts};
use crate::Time;

/// Tolerance on `Σ p = 1` for every supported `(edge, time)`.
pub const PROB_TOL: f64 = 1e-12;

/// Probabilities below this are treated as zero when extracting strategies.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub dt: u32,
    pub p: f64,
}

/// Delay distribution used for departures in `[from_t, to_t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayWindow {
    pub from_t: Time,
    pub to_t: Time,
    pub outcomes: Vec<Outcome>,
}

/// An edge description: an optional default distribution plus windows,
/// later windows overriding earlier ones. Times without any distribution
/// leave the action disabled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MdpEdge {
    pub from: StateId,
    pub to: StateId,
    pub default: Option<Vec<Outcome>>,
    pub delays: Vec<DelayWindow>,
}

impl MdpEdge {
    pub fn new(from: StateId, to: StateId) -> Self {
        MdpEdge { from, to, default: None, delays: Vec::new() }
    }

    pub fn deterministic(from: StateId, to: StateId, dt: u32) -> Self {
        MdpEdge { from, to, default: Some(vec![Outcome { dt, p: 1.0 }]), delays: Vec::new() }
    }

    pub fn with_default(mut self, outcomes: Vec<Outcome>) -> Self {
        self.default = Some(outcomes);
        self
    }

    pub fn window(mut self, from_t: Time, to_t: Time, outcomes: Vec<Outcome>) -> Self {
        self.delays.push(DelayWindow { from_t, to_t, outcomes });
        self
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("MDP has no states")]
    NoStates,
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("edge ({from},{to}) declared twice")]
    DuplicateEdge { from: StateId, to: StateId },
    #[error("horizon must be non-negative, got {0}")]
    NegativeHorizon(Time),
    #[error("delay window [{from_t},{to_t}] of ({from},{to}) is empty or outside [0, horizon]")]
    BadWindow { from: StateId, to: StateId, from_t: Time, to_t: Time },
    #[error("delay of ({from},{to}) at t={t} must be at least 1")]
    ZeroDelay { from: StateId, to: StateId, t: Time },
    #[error("probability {p} of ({from},{to}) at t={t} is not in (0, 1]")]
    BadProbability { from: StateId, to: StateId, t: Time, p: f64 },
    #[error("probabilities of ({from},{to}) at t={t} sum to {sum}")]
    NotNormalized { from: StateId, to: StateId, t: Time, sum: f64 },
    #[error("history tree would exceed {cap} nodes")]
    TooManyHistories { cap: usize },
    #[error("trace is not realizable at step {step}")]
    InvalidTrace { step: usize },
    #[error("cut time {cut} outside [0, {horizon}]")]
    BadCut { cut: Time, horizon: Time },
    #[error("occupancy LP ended with status {0:?}")]
    Solve(SolveStatus),
    #[error("strategy does not match the history tree")]
    StrategyShape,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mitl(#[from] MitlError),
}

/// `M = (S, A, P, T, Π, L)` with one action per edge and `P` tabulated for
/// every departure time in `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMdp {
    states: Vec<State>,
    initial: StateId,
    edges: Vec<Edge>,
    table: Vec<Vec<Vec<Outcome>>>,
    adj: Vec<Vec<usize>>,
    horizon: Time,
}

impl LabeledMdp {
    pub fn new(states: Vec<State>, initial: StateId, edges: Vec<MdpEdge>, horizon: Time) -> Result<Self, MdpError> {
        if states.is_empty() {
            return Err(MdpError::NoStates);
        }
        if initial >= states.len() {
            return Err(MdpError::UnknownState(initial));
        }
        if horizon < 0 {
            return Err(MdpError::NegativeHorizon(horizon));
        }
        let len = horizon as usize + 1;
        let mut seen = BTreeSet::new();
        let mut plain = Vec::with_capacity(edges.len());
        let mut table = Vec::with_capacity(edges.len());
        for e in &edges {
            for s in [e.from, e.to] {
                if s >= states.len() {
                    return Err(MdpError::UnknownState(s));
                }
            }
            if !seen.insert((e.from, e.to)) {
                return Err(MdpError::DuplicateEdge { from: e.from, to: e.to });
            }
            let mut row: Vec<Option<&[Outcome]>> = vec![e.default.as_deref(); len];
            for w in &e.delays {
                if w.from_t > w.to_t || w.from_t < 0 || w.to_t > horizon {
                    return Err(MdpError::BadWindow { from: e.from, to: e.to, from_t: w.from_t, to_t: w.to_t });
                }
                for slot in &mut row[w.from_t as usize..=w.to_t as usize] {
                    *slot = Some(&w.outcomes);
                }
            }
            let mut dense = Vec::with_capacity(len);
            for (t, slot) in row.into_iter().enumerate() {
                dense.push(match slot {
                    Some(out) => normalize(e, t as Time, out)?,
                    None => Vec::new(),
                });
            }
            plain.push(Edge { from: e.from, to: e.to });
            table.push(dense);
        }
        let mut adj = vec![Vec::new(); states.len()];
        for (i, e) in plain.iter().enumerate() {
            adj[e.from].push(i);
        }
        for list in &mut adj {
            list.sort_by_key(|&i| plain[i].to);
        }
        Ok(LabeledMdp { states, initial, edges: plain, table, adj, horizon })
    }

    /// The deterministic MDP whose only outcome is the system's weight.
    pub fn from_vwts(ts: &Vwts, horizon: Time) -> Result<Self, MdpError> {
        let edges = ts
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut me = MdpEdge::new(e.from, e.to);
                for t in 0..=horizon.min(ts.table_horizon()) {
                    if let Some(w) = ts.edge_weight(i, t) {
                        me.delays.push(DelayWindow { from_t: t, to_t: t, outcomes: vec![Outcome { dt: w, p: 1.0 }] });
                    }
                }
                me
            })
            .collect();
        LabeledMdp::new(ts.states().to_vec(), ts.initial(), edges, horizon)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self, s: StateId) -> &LabelSet {
        &self.states[s].labels
    }

    pub fn out_edges(&self, s: StateId) -> &[usize] {
        &self.adj[s]
    }

    /// Support of action `edge` when taken at `t`; empty when disabled.
    pub fn outcomes(&self, edge: usize, t: Time) -> &[Outcome] {
        if t < 0 || t > self.horizon {
            return &[];
        }
        &self.table[edge][t as usize]
    }

    /// `P(s, t, a_e, s2, t2)` without clamping.
    pub fn probability(&self, s: StateId, t: Time, edge: usize, s2: StateId, t2: Time) -> f64 {
        let e = self.edges[edge];
        if e.from != s || e.to != s2 {
            return 0.0;
        }
        self.outcomes(edge, t).iter().filter(|o| t + o.dt as Time == t2).map(|o| o.p).sum()
    }

    /// Branches available at `(s, t)` after applying the waiting and
    /// clamping conventions. Empty exactly when `t >= T`.
    pub fn successors(&self, s: StateId, t: Time) -> Vec<Branch> {
        if t >= self.horizon {
            return Vec::new();
        }
        let mut branches = Vec::new();
        for &e in &self.adj[s] {
            let out = self.outcomes(e, t);
            if out.is_empty() {
                continue;
            }
            let to = self.edges[e].to;
            let mut merged: Vec<Arrival> = Vec::with_capacity(out.len());
            for o in out {
                let raw = t + o.dt as Time;
                let (time, clamped) = if raw > self.horizon { (self.horizon, true) } else { (raw, false) };
                match merged.iter_mut().find(|a| a.time == time && a.clamped == clamped) {
                    Some(a) => a.p += o.p,
                    None => merged.push(Arrival { state: to, time, clamped, p: o.p }),
                }
            }
            merged.sort_by_key(|a| (a.time, a.clamped));
            branches.push(Branch { action: Action::Move(e), arrivals: merged });
        }
        if branches.is_empty() {
            branches.push(Branch { action: Action::Wait, arrivals: vec![Arrival { state: s, time: t + 1, clamped: false, p: 1.0 }] });
        }
        branches
    }

    /// Timed word of a trace; `prehistory` extends it to negative times.
    pub fn trace_word(&self, trace: &[(StateId, Time)], prehistory: Time) -> Result<TimedWord, MitlError> {
        let entries = trace.iter().map(|&(s, t)| WordEntry { labels: self.states[s].labels.clone(), time: t }).collect();
        Ok(TimedWord::new(entries, self.horizon)?.with_prehistory(prehistory))
    }

    /// Checks that `trace` starts at `(s0, 0)` and that every step is a
    /// supported arrival.
    pub fn validate_trace(&self, trace: &[(StateId, Time)]) -> Result<(), MdpError> {
        match trace.first() {
            Some(&(s, 0)) if s == self.initial => {}
            _ => return Err(MdpError::InvalidTrace { step: 0 }),
        }
        for (i, pair) in trace.windows(2).enumerate() {
            let (s, t) = pair[0];
            let (s2, t2) = pair[1];
            let ok = self
                .successors(s, t)
                .iter()
                .any(|b| b.arrivals.iter().any(|a| a.state == s2 && a.time == t2));
            if !ok {
                return Err(MdpError::InvalidTrace { step: i + 1 });
            }
        }
        Ok(())
    }
}

fn normalize(e: &MdpEdge, t: Time, out: &[Outcome]) -> Result<Vec<Outcome>, MdpError> {
    let mut kept = Vec::with_capacity(out.len());
    let mut sum = 0.0;
    for o in out {
        if o.dt == 0 {
            return Err(MdpError::ZeroDelay { from: e.from, to: e.to, t });
        }
        if !(o.p >= 0.0 && o.p <= 1.0) {
            return Err(MdpError::BadProbability { from: e.from, to: e.to, t, p: o.p });
        }
        sum += o.p;
        if o.p > 0.0 {
            kept.push(*o);
        }
    }
    if !kept.is_empty() && libm::fabs(sum - 1.0) > PROB_TOL {
        return Err(MdpError::NotNormalized { from: e.from, to: e.to, t, sum });
    }
    Ok(kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Traverse the edge with this index.
    Move(usize),
    /// Mandatory unit-delay wait when nothing else is enabled.
    Wait,
    /// Absorbing action of a history that has reached the cut.
    Stay,
}

impl Action {
    pub fn describe(&self, mdp: &LabeledMdp) -> String {
        match *self {
            Action::Move(e) => {
                let e = mdp.edges()[e];
                alloc::format!("{}->{}", mdp.states()[e.from].name, mdp.states()[e.to].name)
            }
            Action::Wait => String::from("wait"),
            Action::Stay => String::from("stay"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub state: StateId,
    pub time: Time,
    pub clamped: bool,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub action: Action,
    pub arrivals: Vec<Arrival>,
}

/// One interned history: the trace is the root prefix followed by the
/// pairs on the way down to this node.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryNode {
    pub parent: Option<usize>,
    pub state: StateId,
    pub time: Time,
    /// Transitions taken since the root.
    pub depth: usize,
    pub clamped: bool,
    /// `(action, [(child, probability)])`; empty for leaves.
    pub actions: Vec<(Action, Vec<(usize, f64)>)>,
}

impl HistoryNode {
    pub fn is_leaf(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Prefix tree of every history reachable from a root trace until the
/// cut time (or a depth cap) is reached.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryTree {
    prefix: Vec<(StateId, Time)>,
    nodes: Vec<HistoryNode>,
    cut: Time,
    steps: usize,
}

impl HistoryTree {
    /// Expands every history from `prefix` until its time reaches `cut`.
    pub fn build(mdp: &LabeledMdp, prefix: &[(StateId, Time)], cut: Time, cap: usize) -> Result<Self, MdpError> {
        HistoryTree::build_with(mdp, prefix, cut, None, cap)
    }

    /// As [`HistoryTree::build`], additionally stopping after `max_depth`
    /// transitions.
    pub fn build_with(
        mdp: &LabeledMdp,
        prefix: &[(StateId, Time)],
        cut: Time,
        max_depth: Option<usize>,
        cap: usize,
    ) -> Result<Self, MdpError> {
        if cut < 0 || cut > mdp.horizon() {
            return Err(MdpError::BadCut { cut, horizon: mdp.horizon() });
        }
        mdp.validate_trace(prefix)?;
        let &(s0, t0) = prefix.last().expect("validated prefix is non-empty");
        let by_time = usize::try_from(cut - t0).unwrap_or(0);
        let steps = max_depth.map_or(by_time, |d| d.min(by_time));
        let mut nodes = vec![HistoryNode { parent: None, state: s0, time: t0, depth: 0, clamped: false, actions: Vec::new() }];
        let mut next = 0;
        while next < nodes.len() {
            let (s, t, depth) = (nodes[next].state, nodes[next].time, nodes[next].depth);
            if t < cut && depth < steps {
                let mut actions = Vec::new();
                for b in mdp.successors(s, t) {
                    let mut children = Vec::with_capacity(b.arrivals.len());
                    for a in b.arrivals {
                        if nodes.len() >= cap {
                            return Err(MdpError::TooManyHistories { cap });
                        }
                        children.push((nodes.len(), a.p));
                        nodes.push(HistoryNode {
                            parent: Some(next),
                            state: a.state,
                            time: a.time,
                            depth: depth + 1,
                            clamped: a.clamped,
                            actions: Vec::new(),
                        });
                    }
                    actions.push((b.action, children));
                }
                nodes[next].actions = actions;
            }
            next += 1;
        }
        Ok(HistoryTree { prefix: prefix.to_vec(), nodes, cut, steps })
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[HistoryNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &HistoryNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cut(&self) -> Time {
        self.cut
    }

    /// Number of planning steps `H`; every leaf has depth at most `H`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn prefix(&self) -> &[(StateId, Time)] {
        &self.prefix
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    /// Full trace of a node, root prefix included.
    pub fn trace(&self, id: usize) -> Vec<(StateId, Time)> {
        let mut tail = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            if i == 0 {
                break;
            }
            tail.push((self.nodes[i].state, self.nodes[i].time));
            cur = self.nodes[i].parent;
        }
        let mut trace = self.prefix.clone();
        trace.extend(tail.into_iter().rev());
        trace
    }

    /// Histories occupied at planning step `h`: nodes at depth `h` plus
    /// leaves reached earlier, which dwell.
    pub fn at_step(&self, h: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| {
                let n = &self.nodes[i];
                n.depth == h || (n.is_leaf() && n.depth < h && h <= self.steps)
            })
            .collect()
    }
}

/// Traces occupied at each planning step `0..=steps` from `(s0, 0)`.
pub fn reachable_histories(mdp: &LabeledMdp, steps: usize, cap: usize) -> Result<Vec<Vec<Vec<(StateId, Time)>>>, MdpError> {
    let tree = HistoryTree::build_with(mdp, &[(mdp.initial(), 0)], mdp.horizon(), Some(steps), cap)?;
    Ok((0..=tree.steps()).map(|h| tree.at_step(h).into_iter().map(|i| tree.trace(i)).collect()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RewardConfig {
    pub variant: RobustnessVariant,
    /// Length of the empty-label prehistory used by right and combined
    /// robustness.
    pub tprime: Time,
    pub until_mode: UntilMode,
}

impl RewardConfig {
    pub fn new(variant: RobustnessVariant, tprime: Time) -> Self {
        RewardConfig { variant, tprime, until_mode: UntilMode::default() }
    }

    pub fn prehistory(&self) -> Time {
        if self.variant == RobustnessVariant::Left {
            0
        } else {
            self.tprime
        }
    }
}

/// `R̃(s̃) = Σ_i η_i(σ(s̃)) · p_i` if the trace ends at `T`, else `0`.
pub fn terminal_reward(mdp: &LabeledMdp, tasks: &TaskSet, trace: &[(StateId, Time)], cfg: &RewardConfig) -> Result<Score, MdpError> {
    match trace.last() {
        Some(&(_, t)) if t == mdp.horizon() => {}
        _ => return Ok(Score::zero()),
    }
    let word = mdp.trace_word(trace, cfg.prehistory())?;
    Ok(mitl::weighted_objective(tasks, &word, cfg.variant, cfg.until_mode)?)
}

/// `R̃` for every node of `tree` (zero on inner nodes).
pub fn history_rewards(mdp: &LabeledMdp, tree: &HistoryTree, tasks: &TaskSet, cfg: &RewardConfig) -> Result<Vec<Score>, MdpError> {
    let mut out = vec![Score::zero(); tree.len()];
    for leaf in tree.leaves() {
        out[leaf] = terminal_reward(mdp, tasks, &tree.trace(leaf), cfg)?;
    }
    Ok(out)
}

/// Occupancy variables of one node.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeVars {
    /// One variable per action, all at step `depth`.
    Decision(Vec<VarId>),
    /// `o^h` of the `Stay` action for `h = depth ..= H`.
    Absorbing(Vec<VarId>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyLp {
    pub model: MilpModel,
    pub vars: Vec<NodeVars>,
}

/// Occupancy LP: initial mass 1, flow conservation from each node to its
/// children, dwell on leaves, reward collected at the last step.
pub fn build_occupancy_lp(tree: &HistoryTree, rewards: &[f64]) -> OccupancyLp {
    let mut model = MilpModel::new("occupancy");
    let steps = tree.steps();
    let mut vars = Vec::with_capacity(tree.len());
    for (i, n) in tree.nodes().iter().enumerate() {
        if n.is_leaf() {
            let v = (n.depth..=steps).map(|h| model.continuous(alloc::format!("o_{h}_{i}_stay"), 0.0, 1.0)).collect();
            vars.push(NodeVars::Absorbing(v));
        } else {
            let v = (0..n.actions.len()).map(|k| model.continuous(alloc::format!("o_{}_{i}_{k}", n.depth), 0.0, 1.0)).collect();
            vars.push(NodeVars::Decision(v));
        }
    }
    let entry = |node: usize| -> LinExpr {
        let mut e = LinExpr::new();
        match &vars[node] {
            NodeVars::Decision(v) => v.iter().for_each(|&x| e.add_term(x, 1.0)),
            NodeVars::Absorbing(v) => e.add_term(v[0], 1.0),
        }
        e
    };
    model.add_constraint("init", entry(0), Cmp::Eq, 1.0);
    for (i, n) in tree.nodes().iter().enumerate() {
        if let NodeVars::Decision(v) = &vars[i] {
            for ((_, children), &ov) in n.actions.iter().zip(v) {
                for &(child, p) in children {
                    let mut e = entry(child);
                    e.add_term(ov, -p);
                    model.add_constraint(alloc::format!("flow_{}_{child}", n.depth + 1), e, Cmp::Eq, 0.0);
                }
            }
        }
        if let NodeVars::Absorbing(v) = &vars[i] {
            for (k, w) in v.windows(2).enumerate() {
                let e = LinExpr::var(w[1]).term(w[0], -1.0);
                model.add_constraint(alloc::format!("dwell_{}_{i}", n.depth + k + 1), e, Cmp::Eq, 0.0);
            }
        }
    }
    let mut objective = LinExpr::new();
    for (i, v) in vars.iter().enumerate() {
        if let NodeVars::Absorbing(v) = v {
            if rewards[i] != 0.0 {
                objective.add_term(*v.last().expect("at least one step"), rewards[i]);
            }
        }
    }
    model.set_objective(ObjSense::Maximize, objective);
    OccupancyLp { model, vars }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancySolution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub lp_iterations: usize,
}

pub fn solve_occupancy(lp: &OccupancyLp, opts: &SolveOptions) -> Result<OccupancySolution, MdpError> {
    let r = solver::solve_milp(&lp.model, opts, None)?;
    match (r.status, r.objective) {
        (SolveStatus::Optimal, Some(objective)) => Ok(OccupancySolution { objective, values: r.values, lp_iterations: r.lp_iterations }),
        (status, _) => Err(MdpError::Solve(status)),
    }
}

/// Largest absolute residual of any constraint of the occupancy LP.
pub fn flow_residual(lp: &OccupancyLp, values: &[f64]) -> f64 {
    lp.model.constraints.iter().map(|c| libm::fabs(c.activity(values) - c.rhs)).fold(0.0, f64::max)
}

/// History-dependent stochastic strategy: for every inner node, one
/// probability per entry of its `actions`.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub probs: Vec<Vec<f64>>,
}

impl Strategy {
    pub fn uniform(tree: &HistoryTree) -> Self {
        let probs = tree
            .nodes()
            .iter()
            .map(|n| {
                let k = n.actions.len();
                vec![1.0 / k as f64; k]
            })
            .collect();
        Strategy { probs }
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().flatten().all(|&p| p == 0.0 || p == 1.0)
    }

    fn check(&self, tree: &HistoryTree) -> Result<(), MdpError> {
        let ok = self.probs.len() == tree.len() && self.probs.iter().zip(tree.nodes()).all(|(p, n)| p.len() == n.actions.len());
        if ok {
            Ok(())
        } else {
            Err(MdpError::StrategyShape)
        }
    }
}

/// `μ(s̃, a) = o_{s̃,a} / Σ_a' o_{s̃,a'}`, uniform where no mass arrives.
pub fn extract_strategy(tree: &HistoryTree, lp: &OccupancyLp, values: &[f64]) -> Strategy {
    let probs = tree
        .nodes()
        .iter()
        .zip(&lp.vars)
        .map(|(n, v)| match v {
            NodeVars::Absorbing(_) => Vec::new(),
            NodeVars::Decision(v) => {
                let mass: Vec<f64> = v.iter().map(|x| values[x.index()].max(0.0)).collect();
                let total: f64 = mass.iter().sum();
                if total > MASS_TOL {
                    mass.iter().map(|m| m / total).collect()
                } else {
                    vec![1.0 / n.actions.len() as f64; n.actions.len()]
                }
            }
        })
        .collect();
    Strategy { probs }
}

/// Probability of reaching every node under `strategy`.
pub fn forward_probabilities(tree: &HistoryTree, strategy: &Strategy) -> Result<Vec<f64>, MdpError> {
    strategy.check(tree)?;
    let mut reach = vec![0.0; tree.len()];
    reach[0] = 1.0;
    // children always have larger ids than their parent
    for (i, n) in tree.nodes().iter().enumerate() {
        let here = reach[i];
        if here == 0.0 {
            continue;
        }
        for ((_, children), &pa) in n.actions.iter().zip(&strategy.probs[i]) {
            for &(child, p) in children {
                reach[child] += here * pa * p;
            }
        }
    }
    Ok(reach)
}

/// Occupancy values induced by `strategy`, laid out like `lp.model`.
pub fn occupancy_from_strategy(tree: &HistoryTree, lp: &OccupancyLp, strategy: &Strategy) -> Result<Vec<f64>, MdpError> {
    let reach = forward_probabilities(tree, strategy)?;
    let mut x = vec![0.0; lp.model.num_vars()];
    for (i, v) in lp.vars.iter().enumerate() {
        match v {
            NodeVars::Decision(v) => {
                for (&var, &pa) in v.iter().zip(&strategy.probs[i]) {
                    x[var.index()] = reach[i] * pa;
                }
            }
            NodeVars::Absorbing(v) => v.iter().for_each(|var| x[var.index()] = reach[i]),
        }
    }
    Ok(x)
}

/// Largest gap between two occupancy vectors.
pub fn occupancy_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evaluation {
    Exact,
    Sampled { samples: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean; zero for exact evaluation.
    pub std_error: f64,
}

/// Draws one leaf by following `strategy` and the outcome distribution.
pub fn sample_leaf(tree: &HistoryTree, strategy: &Strategy, rng: &mut impl Rng) -> usize {
    let mut cur = 0;
    loop {
        let n = tree.node(cur);
        if n.is_leaf() {
            return cur;
        }
        let k = pick(rng, strategy.probs[cur].iter().copied());
        let children = &n.actions[k].1;
        cur = children[pick(rng, children.iter().map(|c| c.1))].0;
    }
}

fn pick(rng: &mut impl Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// Expected leaf reward under `strategy`.
pub fn expected_robustness(
    tree: &HistoryTree,
    strategy: &Strategy,
    rewards: &[f64],
    eval: Evaluation,
    rng: &mut impl Rng,
) -> Result<Estimate, MdpError> {
    match eval {
        Evaluation::Exact => {
            let reach = forward_probabilities(tree, strategy)?;
            let mean = tree.leaves().map(|l| reach[l] * rewards[l]).sum();
            Ok(Estimate { mean, std_error: 0.0 })
        }
        Evaluation::Sampled { samples } => {
            strategy.check(tree)?;
            let n = samples.max(1);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..n {
                let r = rewards[sample_leaf(tree, strategy, rng)];
                sum += r;
                sq += r * r;
            }
            let mean = sum / n as f64;
            let var = if n > 1 { (sq - n as f64 * mean * mean).max(0.0) / (n - 1) as f64 } else { 0.0 };
            Ok(Estimate { mean, std_error: libm::sqrt(var / n as f64) })
        }
    }
}

/// Collapses `strategy` onto `(state, time)`: every history ending at the
/// same pair gets the reach-weighted average distribution.
pub fn memoryless_projection(tree: &HistoryTree, strategy: &Strategy) -> Result<Strategy, MdpError> {
    let reach = forward_probabilities(tree, strategy)?;
    let mut agg: BTreeMap<(StateId, Time), BTreeMap<Action, f64>> = BTreeMap::new();
    for (i, n) in tree.nodes().iter().enumerate() {
        let slot = agg.entry((n.state, n.time)).or_default();
        for ((a, _), &p) in n.actions.iter().zip(&strategy.probs[i]) {
            *slot.entry(*a).or_insert(0.0) += reach[i] * p;
        }
    }
    let probs = tree
        .nodes()
        .iter()
        .map(|n| {
            let slot = &agg[&(n.state, n.time)];
            let mass: Vec<f64> = n.actions.iter().map(|(a, _)| slot.get(a).copied().unwrap_or(0.0)).collect();
            let total: f64 = mass.iter().sum();
            if total > MASS_TOL {
                mass.iter().map(|m| m / total).collect()
            } else {
                vec![1.0 / n.actions.len() as f64; n.actions.len()]
            }
        })
        .collect();
    Ok(Strategy { probs })
}

/// Everything produced by a full-horizon plan.
#[derive(Clone, Debug)]
pub struct MdpPlan {
    pub tree: HistoryTree,
    pub rewards: Vec<Score>,
    pub lp: OccupancyLp,
    pub solution: OccupancySolution,
    pub strategy: Strategy,
}

impl MdpPlan {
    pub fn rewards_f64(&self) -> Vec<f64> {
        self.rewards.iter().map(score_to_f64).collect()
    }
}

/// Builds the history tree to `T`, attaches `R̃`, solves the occupancy LP
/// and extracts the strategy.
pub fn plan_mdp(
    mdp: &LabeledMdp,
    tasks: &TaskSet,
    cfg: &RewardConfig,
    cap: usize,
    opts: &SolveOptions,
) -> Result<MdpPlan, MdpError> {
    let tree = HistoryTree::build(mdp, &[(mdp.initial(), 0)], mdp.horizon(), cap)?;
    let rewards = history_rewards(mdp, &tree, tasks, cfg)?;
    let r: Vec<f64> = rewards.iter().map(score_to_f64).collect();
    let lp = build_occupancy_lp(&tree, &r);
    let solution = solve_occupancy(&lp, opts)?;
    let strategy = extract_strategy(&tree, &lp, &solution.values);
    Ok(MdpPlan { tree, rewards, lp, solution, strategy })
}

/// Trace in `s@t` notation, e.g. `s0@0 s1@2`.
pub struct TraceDisplay<'a>(pub &'a LabeledMdp, pub &'a [(StateId, Time)]);

impl fmt::Display for TraceDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(s, t)) in self.1.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}@{}", self.0.states()[s].name, t)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitl::{Formula, Priority, Task};
    use crate::random::rng;

    fn st(name: &str, labels: &[&str]) -> State {
        State { name: name.into(), labels: labels.iter().map(|s| String::from(*s)).collect() }
    }

    fn o(dt: u32, p: f64) -> Outcome {
        Outcome { dt, p }
    }

    /// Three states in a line; the middle hop is slow half of the time.
    fn three_state(horizon: Time) -> LabeledMdp {
        let states = vec![st("s0", &[]), st("s1", &["a"]), st("s2", &["b"])];
        let edges = vec![
            MdpEdge::deterministic(0, 0, 1),
            MdpEdge::new(0, 1).with_default(vec![o(1, 0.5), o(2, 0.5)]),
            MdpEdge::deterministic(1, 1, 1),
            MdpEdge::new(1, 2).with_default(vec![o(1, 0.7), o(3, 0.3)]),
            MdpEdge::deterministic(2, 2, 1),
        ];
        LabeledMdp::new(states, 0, edges, horizon).unwrap()
    }

    #[test]
    fn validation_rejects_bad_distributions() {
        let states = vec![st("s0", &[])];
        let bad = |e: MdpEdge| LabeledMdp::new(states.clone(), 0, vec![e], 3).unwrap_err();
        assert!(matches!(bad(MdpEdge::new(0, 0).with_default(vec![o(1, 0.5)])), MdpError::NotNormalized { .. }));
        assert!(matches!(bad(MdpEdge::new(0, 0).with_default(vec![o(0, 1.0)])), MdpError::ZeroDelay { .. }));
        assert!(matches!(bad(MdpEdge::new(0, 0).with_default(vec![o(1, 1.5)])), MdpError::BadProbability { .. }));
        assert!(matches!(bad(MdpEdge::new(0, 0).window(2, 5, vec![o(1, 1.0)])), MdpError::BadWindow { .. }));
        let ok = LabeledMdp::new(states, 0, vec![MdpEdge::new(0, 0).with_default(vec![o(1, 0.1), o(2, 0.2), o(3, 0.7)])], 3);
        assert!(ok.is_ok());
    }

    #[test]
    fn single_state_unit_chain() {
        let m = LabeledMdp::new(vec![st("s0", &[])], 0, vec![MdpEdge::deterministic(0, 0, 1)], 5).unwrap();
        let h = reachable_histories(&m, 3, 1000).unwrap();
        assert_eq!(h.len(), 4);
        for (k, set) in h.iter().enumerate() {
            assert_eq!(set.len(), 1);
            assert_eq!(set[0], (0..=k as Time).map(|t| (0, t)).collect::<Vec<_>>());
        }
        let zero = reachable_histories(&m, 0, 1000).unwrap();
        assert_eq!(zero, vec![vec![vec![(0, 0)]]]);
    }

    #[test]
    fn wait_is_added_when_nothing_is_enabled() {
        let states = vec![st("s0", &[]), st("s1", &[])];
        let edges = vec![MdpEdge::new(0, 1).window(0, 0, vec![o(1, 1.0)])];
        let m = LabeledMdp::new(states, 0, edges, 3).unwrap();
        let b = m.successors(1, 1);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].action, Action::Wait);
        assert_eq!(b[0].arrivals[0].time, 2);
        let tree = HistoryTree::build(&m, &[(0, 0)], 3, 100).unwrap();
        let leaves: Vec<_> = tree.leaves().map(|l| tree.trace(l)).collect();
        assert_eq!(leaves, vec![vec![(0, 0), (1, 1), (1, 2), (1, 3)]]);
    }

    #[test]
    fn overshooting_arrivals_are_clamped() {
        let m = three_state(4);
        let b = m.successors(1, 2);
        let to2 = b.iter().find(|b| b.action == Action::Move(3)).unwrap();
        assert_eq!(to2.arrivals.len(), 2);
        assert_eq!((to2.arrivals[1].time, to2.arrivals[1].clamped), (4, true));
        assert!((to2.arrivals[1].p - 0.3).abs() < 1e-15);
        let tree = HistoryTree::build(&m, &[(0, 0)], 4, 10_000).unwrap();
        assert!(tree.leaves().all(|l| tree.node(l).time == 4));
    }

    #[test]
    fn tree_matches_independent_bfs() {
        let m = three_state(6);
        let tree = HistoryTree::build(&m, &[(0, 0)], 6, 100_000).unwrap();
        let mut frontier = vec![vec![(0usize, 0i64)]];
        let mut all = Vec::new();
        while let Some(tr) = frontier.pop() {
            let &(s, t) = tr.last().unwrap();
            let succ = m.successors(s, t);
            if succ.is_empty() {
                all.push(tr);
                continue;
            }
            for b in succ {
                for a in b.arrivals {
                    let mut next = tr.clone();
                    next.push((a.state, a.time));
                    frontier.push(next);
                }
            }
        }
        let mut got: Vec<_> = tree.leaves().map(|l| tree.trace(l)).collect();
        got.sort();
        all.sort();
        assert_eq!(got, all);
    }

    #[test]
    fn probabilities_conserve_mass() {
        let m = three_state(6);
        let tree = HistoryTree::build(&m, &[(0, 0)], 6, 100_000).unwrap();
        let reach = forward_probabilities(&tree, &Strategy::uniform(&tree)).unwrap();
        let total: f64 = tree.leaves().map(|l| reach[l]).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    fn reach_b() -> TaskSet {
        TaskSet::single(Formula::eventually(0, 6, Formula::atom("b")).unwrap(), Priority::integer(1).unwrap())
    }

    #[test]
    fn constant_rewards_give_constant_optimum() {
        let m = three_state(5);
        let tree = HistoryTree::build(&m, &[(0, 0)], 5, 100_000).unwrap();
        let rewards: Vec<f64> = tree.nodes().iter().map(|n| if n.is_leaf() { 2.5 } else { 0.0 }).collect();
        let lp = build_occupancy_lp(&tree, &rewards);
        let sol = solve_occupancy(&lp, &SolveOptions::default()).unwrap();
        assert!((sol.objective - 2.5).abs() < 1e-9);
        assert!(flow_residual(&lp, &sol.values) <= 1e-9);
    }

    #[test]
    fn two_branch_optimum_is_best_expectation() {
        let states = vec![st("s0", &[]), st("l", &[]), st("r", &[])];
        let edges = vec![
            MdpEdge::new(0, 1).with_default(vec![o(1, 0.5), o(2, 0.5)]),
            MdpEdge::new(0, 2).with_default(vec![o(1, 0.25), o(2, 0.75)]),
            MdpEdge::deterministic(1, 1, 1),
            MdpEdge::deterministic(2, 2, 1),
        ];
        let m = LabeledMdp::new(states, 0, edges, 3).unwrap();
        let tree = HistoryTree::build(&m, &[(0, 0)], 3, 1000).unwrap();
        let mut r = rng(7);
        let rewards: Vec<f64> = (0..tree.len()).map(|i| if tree.node(i).is_leaf() { r.random_range(-3.0..3.0) } else { 0.0 }).collect();
        let branch_value = |first: StateId| -> f64 {
            tree.leaves()
                .filter(|&l| tree.trace(l)[1].0 == first)
                .map(|l| {
                    let arrive = tree.trace(l)[1].1;
                    let p = match (first, arrive) {
                        (1, _) => 0.5,
                        (_, 1) => 0.25,
                        _ => 0.75,
                    };
                    p * rewards[l]
                })
                .sum()
        };
        let expected = branch_value(1).max(branch_value(2));
        let lp = build_occupancy_lp(&tree, &rewards);
        let sol = solve_occupancy(&lp, &SolveOptions::default()).unwrap();
        assert!((sol.objective - expected).abs() < 1e-9, "{} vs {expected}", sol.objective);
    }

    #[test]
    fn strategy_replay_reproduces_occupancy() {
        let m = three_state(6);
        let cfg = RewardConfig::new(RobustnessVariant::Right, 2);
        let plan = plan_mdp(&m, &reach_b(), &cfg, 100_000, &SolveOptions::default()).unwrap();
        let replay = occupancy_from_strategy(&plan.tree, &plan.lp, &plan.strategy).unwrap();
        assert!(occupancy_gap(&replay, &plan.solution.values) <= 1e-9);
        let exact = expected_robustness(&plan.tree, &plan.strategy, &plan.rewards_f64(), Evaluation::Exact, &mut rng(0)).unwrap();
        assert!((exact.mean - plan.solution.objective).abs() < 1e-6);
        let mc = expected_robustness(&plan.tree, &plan.strategy, &plan.rewards_f64(), Evaluation::Sampled { samples: 4000 }, &mut rng(1)).unwrap();
        assert!((mc.mean - exact.mean).abs() <= 3.0 * mc.std_error + 1e-12);
    }

    #[test]
    fn deterministic_mdp_collapses_to_best_trace() {
        let states = vec![st("s0", &[]), st("s1", &["a"]), st("s2", &["b"])];
        let edges = vec![
            MdpEdge::deterministic(0, 0, 1),
            MdpEdge::deterministic(0, 1, 2),
            MdpEdge::deterministic(0, 2, 4),
            MdpEdge::deterministic(1, 1, 1),
            MdpEdge::deterministic(2, 2, 1),
        ];
        let m = LabeledMdp::new(states, 0, edges, 6).unwrap();
        let tasks = TaskSet::new(vec![Task {
            formula: Formula::eventually(0, 6, Formula::atom("b")).unwrap(),
            priority: Priority::integer(2).unwrap(),
        }])
        .unwrap();
        let cfg = RewardConfig::new(RobustnessVariant::Right, 3);
        let plan = plan_mdp(&m, &tasks, &cfg, 100_000, &SolveOptions::default()).unwrap();
        let best = plan.rewards.iter().zip(plan.tree.nodes()).filter(|(_, n)| n.is_leaf()).map(|(r, _)| score_to_f64(r)).fold(f64::MIN, f64::max);
        assert!((plan.solution.objective - best).abs() < 1e-9);
        assert!(plan.strategy.is_deterministic() || plan.strategy.probs.iter().flatten().all(|p| p.is_finite()));
    }

    #[test]
    fn zero_priorities_give_zero_reward() {
        let m = three_state(4);
        let tasks = TaskSet::single(Formula::atom("a"), Priority::zero());
        let cfg = RewardConfig::new(RobustnessVariant::Right, 2);
        assert!(terminal_reward(&m, &tasks, &[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)], &cfg).unwrap().is_zero());
        assert!(terminal_reward(&m, &reach_b(), &[(0, 0), (0, 1)], &cfg).unwrap().is_zero());
    }

    #[test]
    fn memoryless_projection_of_memoryless_strategy_is_identity() {
        let m = three_state(5);
        let tree = HistoryTree::build(&m, &[(0, 0)], 5, 100_000).unwrap();
        let u = Strategy::uniform(&tree);
        let p = memoryless_projection(&tree, &u).unwrap();
        for (a, b) in u.probs.iter().flatten().zip(p.probs.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
