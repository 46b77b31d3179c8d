//! Seeded generators for differential testing and benchmarks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{HistoryTree, LabeledMdp, MdpEdge, Outcome};
use crate::mitl::{Formula, Interval, Priority, Task, TaskSet, TimedWord, WordEntry};
use crate::oracle::count_paths;
use crate::vwts::{Edge, State, Vwts};
use crate::Time;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Atom names `a`, `b`, `c`, ... used by every generator here.
pub fn atom_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{}", (b'a' + i as u8) as char)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VwtsParams {
    pub states: usize,
    pub horizon: Time,
    pub atoms: usize,
    /// Extra outgoing edges per state besides the self-loop.
    pub out_degree: usize,
    pub max_weight: u32,
    /// Chance that an edge's weight changes over time.
    pub varying: f64,
    /// Decline systems with more paths than this; `None` accepts all.
    pub max_paths: Option<u128>,
}

impl Default for VwtsParams {
    fn default() -> Self {
        VwtsParams {
            states: 5,
            horizon: 12,
            atoms: 3,
            out_degree: 2,
            max_weight: 4,
            varying: 0.5,
            max_paths: Some(200_000),
        }
    }
}

/// Random system with a self-loop on every state. Draws again until the
/// path count fits `max_paths`, lowering the out-degree if needed.
pub fn random_vwts(rng: &mut impl Rng, p: &VwtsParams) -> Vwts {
    let names = atom_names(p.atoms);
    let mut degree = p.out_degree;
    let mut attempts = 0;
    loop {
        let ts = draw_vwts(rng, p, degree, &names);
        match p.max_paths {
            Some(cap) if count_paths(&ts, p.horizon) > cap => {
                attempts += 1;
                if attempts % 8 == 0 && degree > 0 {
                    degree -= 1;
                }
            }
            _ => return ts,
        }
    }
}

fn draw_vwts(rng: &mut impl Rng, p: &VwtsParams, degree: usize, names: &[String]) -> Vwts {
    let n = p.states.max(1);
    let states: Vec<State> = (0..n)
        .map(|i| {
            let labels = names.iter().filter(|_| rng.random_bool(0.35)).cloned().collect();
            State { name: format!("s{i}"), labels }
        })
        .collect();
    let mut edges = Vec::new();
    for s in 0..n {
        edges.push(Edge { from: s, to: s });
        let mut others: Vec<usize> = (0..n).filter(|&o| o != s).collect();
        others.shuffle(rng);
        for &o in others.iter().take(degree) {
            edges.push(Edge { from: s, to: o });
        }
    }
    let len = p.horizon as usize + 1;
    let tables: Vec<Vec<u32>> = edges
        .iter()
        .map(|e| {
            if e.from == e.to {
                return vec![1; len];
            }
            let base = rng.random_range(1..=p.max_weight.max(1));
            let mut row = vec![base; len];
            if rng.random_bool(p.varying) {
                let from = rng.random_range(0..len);
                let to = rng.random_range(from..len);
                let w = rng.random_range(1..=p.max_weight.max(1));
                for x in &mut row[from..=to] {
                    *x = w;
                }
            }
            row
        })
        .collect();
    Vwts::from_fn(states, 0, edges, p.horizon, |e, t| Some(tables[e][t as usize])).expect("generated system is valid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormulaParams {
    pub depth: usize,
    pub atoms: usize,
    pub max_bound: u32,
    pub max_arity: usize,
}

impl Default for FormulaParams {
    fn default() -> Self {
        FormulaParams { depth: 3, atoms: 3, max_bound: 4, max_arity: 3 }
    }
}

fn interval(rng: &mut impl Rng, max: u32) -> Interval {
    let lo = rng.random_range(0..=max);
    let hi = rng.random_range(lo..=max);
    Interval::new(lo, hi).expect("lo <= hi")
}

/// Random formula of depth at most `p.depth` (atoms have depth 0).
pub fn random_formula(rng: &mut impl Rng, p: &FormulaParams) -> Formula {
    let names = atom_names(p.atoms.max(1));
    gen_formula(rng, p, p.depth, &names)
}

fn gen_formula(rng: &mut impl Rng, p: &FormulaParams, depth: usize, names: &[String]) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.08) {
            Formula::True
        } else {
            Formula::atom(names[rng.random_range(0..names.len())].clone())
        };
    }
    let arity = rng.random_range(2..=p.max_arity.max(2));
    match rng.random_range(0..6) {
        0 => Formula::not(gen_formula(rng, p, depth - 1, names)),
        1 => Formula::And((0..arity).map(|_| gen_formula(rng, p, depth - 1, names)).collect()),
        2 => Formula::Or((0..arity).map(|_| gen_formula(rng, p, depth - 1, names)).collect()),
        3 => Formula::Globally(interval(rng, p.max_bound), alloc::boxed::Box::new(gen_formula(rng, p, depth - 1, names))),
        4 => Formula::Eventually(interval(rng, p.max_bound), alloc::boxed::Box::new(gen_formula(rng, p, depth - 1, names))),
        _ => Formula::Until(
            interval(rng, p.max_bound),
            alloc::boxed::Box::new(gen_formula(rng, p, depth - 1, names)),
            alloc::boxed::Box::new(gen_formula(rng, p, depth - 1, names)),
        ),
    }
}

/// `count` tasks with integer priorities in `[1, max_priority]`; every task
/// horizon stays below `horizon_cap`.
pub fn random_tasks(rng: &mut impl Rng, p: &FormulaParams, count: usize, max_priority: i64, horizon_cap: Time) -> TaskSet {
    let mut tasks = Vec::with_capacity(count);
    while tasks.len() < count.max(1) {
        let f = random_formula(rng, p);
        if f.horizon() >= horizon_cap {
            continue;
        }
        let prio = Priority::integer(rng.random_range(1..=max_priority.max(1))).expect("positive");
        tasks.push(Task { formula: f, priority: prio });
    }
    TaskSet::new(tasks).expect("generated tasks are valid")
}

/// Random word over `atoms` with entries at random increasing times.
pub fn random_word(rng: &mut impl Rng, atoms: usize, horizon: Time, prehistory: Time) -> TimedWord {
    let names = atom_names(atoms.max(1));
    let mut entries = Vec::new();
    let mut t = 0;
    while t <= horizon {
        let labels: Vec<String> = names.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        entries.push(WordEntry::new(labels, t));
        t += rng.random_range(1..=3);
    }
    TimedWord::new(entries, horizon).expect("increasing times").with_prehistory(prehistory)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpParams {
    pub states: usize,
    pub horizon: Time,
    pub atoms: usize,
    /// Extra outgoing edges per state besides the self-loop.
    pub out_degree: usize,
    /// Largest number of delay outcomes per `(edge, time)`.
    pub max_outcomes: usize,
    pub max_dt: u32,
    /// Chance that an edge gets a second distribution on some window.
    pub varying: f64,
    /// Decline MDPs whose history tree exceeds this many nodes.
    pub max_histories: usize,
}

impl Default for MdpParams {
    fn default() -> Self {
        MdpParams { states: 3, horizon: 6, atoms: 2, out_degree: 1, max_outcomes: 3, max_dt: 3, varying: 0.4, max_histories: 20_000 }
    }
}

fn distribution(rng: &mut impl Rng, p: &MdpParams) -> Vec<Outcome> {
    let mut dts: Vec<u32> = (1..=p.max_dt.max(1)).collect();
    dts.shuffle(rng);
    let k = rng.random_range(1..=p.max_outcomes.clamp(1, dts.len()));
    let weights: Vec<u32> = (0..k).map(|_| rng.random_range(1..=4)).collect();
    let total: u32 = weights.iter().sum();
    let mut out: Vec<Outcome> = dts[..k].iter().zip(&weights).map(|(&dt, &w)| Outcome { dt, p: w as f64 / total as f64 }).collect();
    let head: f64 = out[..k - 1].iter().map(|o| o.p).sum();
    out[k - 1].p = 1.0 - head;
    out.sort_by_key(|o| o.dt);
    out
}

/// Random labeled MDP with a deterministic unit self-loop on every state.
/// Draws again, lowering the out-degree every few attempts, until the
/// history tree fits `max_histories`.
pub fn random_mdp(rng: &mut impl Rng, p: &MdpParams) -> LabeledMdp {
    let names = atom_names(p.atoms);
    let n = p.states.max(1);
    let mut degree = p.out_degree;
    let mut attempts = 0;
    loop {
        let states: Vec<State> = (0..n)
            .map(|i| {
                let labels = names.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
                State { name: format!("s{i}"), labels }
            })
            .collect();
        let mut edges = Vec::new();
        for s in 0..n {
            edges.push(MdpEdge::deterministic(s, s, 1));
            let mut others: Vec<usize> = (0..n).filter(|&o| o != s).collect();
            others.shuffle(rng);
            for &o in others.iter().take(degree) {
                let mut e = MdpEdge::new(s, o).with_default(distribution(rng, p));
                if rng.random_bool(p.varying) && p.horizon > 0 {
                    let from = rng.random_range(0..p.horizon);
                    let to = rng.random_range(from..p.horizon);
                    e = e.window(from, to, distribution(rng, p));
                }
                edges.push(e);
            }
        }
        let mdp = LabeledMdp::new(states, 0, edges, p.horizon).expect("generated MDP is valid");
        match HistoryTree::build(&mdp, &[(0, 0)], p.horizon, p.max_histories) {
            Ok(_) => return mdp,
            Err(_) => {
                attempts += 1;
                if attempts % 8 == 0 && degree > 0 {
                    degree -= 1;
                }
            }
        }
    }
}
