//! Brute-force ground truth for the optimizers.
//!
//! Nothing here calls into the evaluator in [`crate::mitl`] or into the
//! encoders: satisfaction and robustness are recomputed point by point
//! straight from their definitions, and plans are found by exhaustive
//! enumeration.

use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::Zero;

use crate::clock::{Clock, Deadline};
use crate::mdp::LabeledMdp;
use crate::mitl::{score_to_f64, Formula, MitlError, RobustnessVariant, Score, TaskSet, TimedWord, UntilMode};
use crate::vwts::{Path, StateId, Vwts, VwtsError};
use crate::Time;

/// Caps on oracle work. Exceeding one is reported, never truncated silently.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleBudget {
    pub max_paths: u64,
    pub max_history_nodes: u64,
    pub max_wall_secs: Option<f64>,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_paths: 2_000_000, max_history_nodes: 2_000_000, max_wall_secs: None }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("more than {0} paths")]
    TooManyPaths(u64),
    #[error("more than {0} history nodes")]
    TooManyNodes(u64),
    #[error("wall-time budget exhausted")]
    OutOfTime,
    #[error("no feasible path")]
    NoPath,
    #[error(transparent)]
    Mitl(#[from] MitlError),
    #[error(transparent)]
    Vwts(#[from] VwtsError),
}

/// `χ(φ, σ, t)` as a boolean, by direct recursion on the definition.
pub fn chi(formula: &Formula, word: &TimedWord, t: Time, mode: UntilMode) -> Result<bool, MitlError> {
    if !word.contains_time(t) {
        return Err(MitlError::OutOfHorizon { t, start: word.start(), horizon: word.horizon() });
    }
    Ok(chi_at(formula, word, t, mode))
}

fn chi_at(f: &Formula, w: &TimedWord, t: Time, mode: UntilMode) -> bool {
    let h = w.horizon();
    match f {
        Formula::True => true,
        Formula::Atom(a) => t >= 0 && w.holds(a, t).unwrap_or(false),
        Formula::Not(c) => !chi_at(c, w, t, mode),
        Formula::And(cs) => cs.iter().all(|c| chi_at(c, w, t, mode)),
        Formula::Or(cs) => cs.iter().any(|c| chi_at(c, w, t, mode)),
        Formula::Globally(iv, c) => {
            let (a, b) = (t + iv.lo() as Time, (t + iv.hi() as Time).min(h));
            (a..=b).all(|s| chi_at(c, w, s, mode))
        }
        Formula::Eventually(iv, c) => {
            let (a, b) = (t + iv.lo() as Time, (t + iv.hi() as Time).min(h));
            (a..=b).any(|s| chi_at(c, w, s, mode))
        }
        Formula::Until(iv, l, r) => {
            let (a, b) = (t + iv.lo() as Time, (t + iv.hi() as Time).min(h));
            (a..=b).any(|s| {
                let last = match mode {
                    UntilMode::Strict => s - 1,
                    UntilMode::Closed => s,
                };
                chi_at(r, w, s, mode) && (t..=last).all(|u| chi_at(l, w, u, mode))
            })
        }
    }
}

/// `η(φ, σ, t)` by trying `τ = 0, 1, 2, …` until the characteristic value
/// changes somewhere in the shifted window or the window leaves the word.
pub fn shift_scan_robustness(
    formula: &Formula,
    word: &TimedWord,
    t: Time,
    variant: RobustnessVariant,
    mode: UntilMode,
) -> Result<i64, MitlError> {
    let here = chi(formula, word, t, mode)?;
    let (back, fwd) = match variant {
        RobustnessVariant::Right => (true, false),
        RobustnessVariant::Left => (false, true),
        RobustnessVariant::Combined => (true, true),
    };
    let mut tau: i64 = 0;
    loop {
        let next = tau + 1;
        let lo = if back { t - next } else { t };
        let hi = if fwd { t + next } else { t };
        if lo < word.start() || hi > word.horizon() {
            break;
        }
        if (lo..=hi).any(|u| chi_at(formula, word, u, mode) != here) {
            break;
        }
        tau = next;
    }
    Ok(if here { tau } else { -tau })
}

/// `Σ_i η_i · p_i` at 0 using the scan oracle.
pub fn weighted_scan(
    tasks: &TaskSet,
    word: &TimedWord,
    variant: RobustnessVariant,
    mode: UntilMode,
) -> Result<Score, MitlError> {
    let mut etas = Vec::with_capacity(tasks.len());
    for task in tasks {
        etas.push(shift_scan_robustness(&task.formula, word, 0, variant, mode)?);
    }
    Ok(tasks.weighted_sum(&etas))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestPath {
    pub path: Path,
    pub objective: Score,
    pub robustness: Vec<i64>,
    /// Number of paths evaluated.
    pub paths: u64,
}

/// Every path `s0 … sn` of `ts` with `t_n ≤ horizon`, in lexicographic
/// order of state ids. Prefixes are themselves paths.
pub fn enumerate_paths(
    ts: &Vwts,
    horizon: Time,
    budget: &OracleBudget,
    mut visit: impl FnMut(&[StateId], &[Time]) -> Result<(), OracleError>,
) -> Result<u64, OracleError> {
    let mut states = vec![ts.initial()];
    let mut times = vec![0 as Time];
    // stack of (next successor index to try) per depth
    let mut cursor = vec![0usize];
    let mut count = 0u64;
    count += 1;
    visit(&states, &times)?;
    while let Some(top) = cursor.last_mut() {
        let s = *states.last().unwrap();
        let t = *times.last().unwrap();
        let mut succ = ts.out_edges(s).iter().map(|&e| (ts.edges()[e].to, ts.edge_weight(e, t)));
        let Some((to, w)) = succ.nth(*top) else {
            cursor.pop();
            states.pop();
            times.pop();
            continue;
        };
        *top += 1;
        let Some(w) = w else { continue };
        let arr = t + w as Time;
        if arr > horizon {
            continue;
        }
        count += 1;
        if count > budget.max_paths {
            return Err(OracleError::TooManyPaths(budget.max_paths));
        }
        states.push(to);
        times.push(arr);
        cursor.push(0);
        visit(&states, &times)?;
    }
    Ok(count)
}

/// Number of paths [`enumerate_paths`] would visit, by dynamic programming.
pub fn count_paths(ts: &Vwts, horizon: Time) -> u128 {
    let n = ts.num_states();
    let len = horizon as usize + 1;
    // ways[s][t]: paths starting at (s, t), including the one-state path
    let mut ways = vec![vec![0u128; len]; n];
    for t in (0..len).rev() {
        for s in 0..n {
            let mut total = 1u128;
            for &e in ts.out_edges(s) {
                if let Some(w) = ts.edge_weight(e, t as Time) {
                    let arr = t + w as usize;
                    if arr < len {
                        total = total.saturating_add(ways[ts.edges()[e].to][arr]);
                    }
                }
            }
            ways[s][t] = total;
        }
    }
    ways[ts.initial()][0]
}

/// Exact maximizer of `Σ_i η_i · p_i` over every path with `t_n ≤ T`; ties
/// go to the lexicographically smallest state sequence.
pub fn best_path_bruteforce(
    ts: &Vwts,
    tasks: &TaskSet,
    horizon: Time,
    tprime: Time,
    variant: RobustnessVariant,
    mode: UntilMode,
    budget: &OracleBudget,
    clock: Option<&dyn Clock>,
) -> Result<BestPath, OracleError> {
    let deadline = match (clock, budget.max_wall_secs) {
        (Some(c), Some(s)) => Some(Deadline::new(c, s)),
        _ => None,
    };
    let mut best: Option<(Ratio<i64>, Vec<StateId>, Vec<i64>)> = None;
    let pre = if variant == RobustnessVariant::Left { 0 } else { tprime };
    let paths = enumerate_paths(ts, horizon, budget, |states, times| {
        if deadline.as_ref().is_some_and(|d| d.expired()) {
            return Err(OracleError::OutOfTime);
        }
        let word = literal_word(ts, states, times, horizon)?.with_prehistory(pre);
        let mut etas = Vec::with_capacity(tasks.len());
        let mut value = Ratio::zero();
        for task in tasks {
            let eta = shift_scan_robustness(&task.formula, &word, 0, variant, mode)?;
            value += task.priority.ratio() * Ratio::from_integer(eta);
            etas.push(eta);
        }
        let better = match &best {
            None => true,
            Some((v, s, _)) => value > *v || (value == *v && states < s.as_slice()),
        };
        if better {
            best = Some((value, states.to_vec(), etas));
        }
        Ok(())
    })?;
    let (_, states, robustness) = best.ok_or(OracleError::NoPath)?;
    let objective = tasks.weighted_sum(&robustness);
    Ok(BestPath { path: Path::new(ts, states)?, objective, robustness, paths })
}

/// Optimal expected `Σ_i η_i · p_i` of an MDP by backward induction over
/// every trace: leaves at `T` score their word, chance nodes average over
/// arrivals, decision nodes take the best action.
pub fn expectimax_mdp(
    mdp: &LabeledMdp,
    tasks: &TaskSet,
    tprime: Time,
    variant: RobustnessVariant,
    mode: UntilMode,
    budget: &OracleBudget,
    clock: Option<&dyn Clock>,
) -> Result<f64, OracleError> {
    let deadline = match (clock, budget.max_wall_secs) {
        (Some(c), Some(s)) => Some(Deadline::new(c, s)),
        _ => None,
    };
    let pre = if variant == RobustnessVariant::Left { 0 } else { tprime };
    let mut visited = 0u64;
    let mut trace = vec![(mdp.initial(), 0 as Time)];
    expectimax_rec(mdp, tasks, pre, variant, mode, budget, deadline.as_ref(), &mut visited, &mut trace)
}

#[allow(clippy::too_many_arguments)]
fn expectimax_rec(
    mdp: &LabeledMdp,
    tasks: &TaskSet,
    pre: Time,
    variant: RobustnessVariant,
    mode: UntilMode,
    budget: &OracleBudget,
    deadline: Option<&Deadline<'_>>,
    visited: &mut u64,
    trace: &mut Vec<(StateId, Time)>,
) -> Result<f64, OracleError> {
    *visited += 1;
    if *visited > budget.max_history_nodes {
        return Err(OracleError::TooManyNodes(budget.max_history_nodes));
    }
    if deadline.is_some_and(|d| d.expired()) {
        return Err(OracleError::OutOfTime);
    }
    let (s, t) = *trace.last().expect("trace is never empty");
    if t >= mdp.horizon() {
        let entries = trace
            .iter()
            .map(|&(s, t)| crate::mitl::WordEntry { labels: mdp.labels(s).clone(), time: t })
            .collect();
        let word = TimedWord::new(entries, mdp.horizon())?.with_prehistory(pre);
        return Ok(score_to_f64(&weighted_scan(tasks, &word, variant, mode)?));
    }
    let mut best = f64::NEG_INFINITY;
    for branch in mdp.successors(s, t) {
        let mut value = 0.0;
        for a in &branch.arrivals {
            trace.push((a.state, a.time));
            let v = expectimax_rec(mdp, tasks, pre, variant, mode, budget, deadline, visited, trace);
            trace.pop();
            value += a.p * v?;
        }
        best = best.max(value);
    }
    Ok(best)
}

fn literal_word(ts: &Vwts, states: &[StateId], times: &[Time], horizon: Time) -> Result<TimedWord, MitlError> {
    let entries = states
        .iter()
        .zip(times)
        .map(|(&s, &t)| crate::mitl::WordEntry { labels: ts.labels(s).clone(), time: t })
        .collect();
    TimedWord::new(entries, horizon)
}
