//! Scaling benchmark over grids of `(|S|, |D|, T)` and receding horizons.
//!
//! Instances are office-like floors: rooms on a grid joined by corridors,
//! with some corridors slower during a busy window. Every cell of a grid is
//! an isolated encode-and-solve; cells run in parallel on the worker pool.

use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trp_core::mdp::{build_occupancy_lp, solve_occupancy, HistoryTree, LabeledMdp, MdpEdge, Outcome};
use trp_core::milp::{build_problem1, EncodingConfig};
use trp_core::mitl::{Priority, Task};
use trp_core::random::rng;
use trp_core::receding::{RecedingConfig, RecedingContext, RewardBatch, Sequential};
use trp_core::solver::{solve_milp, SolveOptions};
use trp_core::vwts::{EdgeWeights, StateId, VwtsBuilder};
use trp_core::{Formula, TaskSet, Time, Vwts};

use crate::clock::StdClock;

/// A floor with `n` places: `exit` at the corner, one `lab`, and offices
/// `off0`, `off1`, ... on every third place.
#[derive(Clone, Debug, PartialEq)]
pub struct Office {
    pub names: Vec<String>,
    pub labels: Vec<Vec<String>>,
    /// Undirected corridors `(a, b, base duration)`.
    pub corridors: Vec<(StateId, StateId, u32)>,
    /// Corridors slowed down by `extra` on `[from_t, to_t]`.
    pub busy: Vec<(usize, Time, Time, u32)>,
    pub offices: usize,
}

pub fn office(n: usize, seed: u64) -> Office {
    let n = n.max(2);
    let mut r = rng(seed ^ 0x0ff1ce);
    let width = (n as f64).sqrt().ceil() as usize;
    let names = (0..n).map(|i| format!("s{}{}", i / width, i % width)).collect();
    let mut labels = vec![Vec::new(); n];
    labels[0].push("exit".to_string());
    labels[n / 2].push("lab".to_string());
    let mut offices = 0;
    for (i, l) in labels.iter_mut().enumerate().skip(1) {
        if i % 3 == 2 && i != n / 2 {
            l.push(format!("off{offices}"));
            offices += 1;
        }
    }
    let mut corridors = Vec::new();
    for i in 0..n {
        if (i + 1) % width != 0 && i + 1 < n {
            corridors.push((i, i + 1, r.random_range(1..=4)));
        }
        if i + width < n {
            corridors.push((i, i + width, r.random_range(1..=6)));
        }
    }
    let mut busy = Vec::new();
    for (k, _) in corridors.iter().enumerate() {
        if r.random_bool(0.3) {
            let from = r.random_range(0..20);
            busy.push((k, from, from + r.random_range(2..10), r.random_range(1..=3)));
        }
    }
    Office { names, labels, corridors, busy, offices }
}

impl Office {
    pub fn vwts(&self, table_horizon: Time) -> Vwts {
        let mut b = VwtsBuilder::new(table_horizon);
        for (name, labels) in self.names.iter().zip(&self.labels) {
            b.state(name.clone(), labels.iter().cloned());
        }
        b.initial(0);
        for (k, &(a, c, w)) in self.corridors.iter().enumerate() {
            let mut spec = EdgeWeights::constant(w);
            for &(_, from, to, extra) in self.busy.iter().filter(|x| x.0 == k) {
                spec = spec.window(from, to, w + extra);
            }
            b.edge_both(a, c, spec);
        }
        b.build().expect("office floor is a valid system")
    }

    /// Each corridor takes its duration, one more, or two more steps.
    pub fn mdp(&self, horizon: Time) -> LabeledMdp {
        let states = self
            .names
            .iter()
            .zip(&self.labels)
            .map(|(n, l)| trp_core::vwts::State { name: n.clone(), labels: l.iter().cloned().collect() })
            .collect();
        let spread = |w: u32| vec![Outcome { dt: w, p: 0.6 }, Outcome { dt: w + 1, p: 0.3 }, Outcome { dt: w + 2, p: 0.1 }];
        let mut edges = Vec::new();
        for (k, &(a, c, w)) in self.corridors.iter().enumerate() {
            for (from, to) in [(a, c), (c, a)] {
                let mut e = MdpEdge::new(from, to).with_default(spread(w));
                for &(_, lo, hi, extra) in self.busy.iter().filter(|x| x.0 == k) {
                    if lo <= horizon {
                        e = e.window(lo, hi.min(horizon), spread(w + extra));
                    }
                }
                edges.push(e);
            }
        }
        for s in 0..self.names.len() {
            edges.push(MdpEdge::deterministic(s, s, 1));
        }
        LabeledMdp::new(states, 0, edges, horizon).expect("office floor is a valid MDP")
    }

    /// `count` tasks over the floor's labels with horizons below
    /// `max_task_horizon`. Task lists for smaller counts are prefixes of
    /// larger ones.
    pub fn tasks(&self, count: usize, max_task_horizon: Time, seed: u64) -> TaskSet {
        let mut r = rng(seed ^ 0x7a5c);
        let mut atoms: Vec<String> = (0..self.offices).map(|i| format!("off{i}")).collect();
        atoms.shuffle(&mut r);
        atoms.insert(0, "lab".to_string());
        let cap = max_task_horizon.max(4) as u32;
        let mut tasks = Vec::new();
        for j in 0..count.max(1) {
            let a = Formula::atom(atoms[j % atoms.len()].clone());
            let b = Formula::atom(atoms[(j + 1) % atoms.len()].clone());
            let hi = r.random_range(cap / 2..cap);
            let lo = r.random_range(0..=hi / 3);
            let formula = match j % 4 {
                0 => Formula::eventually(lo, hi, a),
                1 => Formula::eventually(0, hi / 2, Formula::globally(0, 1, a).expect("interval")),
                2 => Formula::globally(lo, hi, Formula::not(Formula::atom("exit"))).and_then(|g| {
                    Formula::and(vec![g, Formula::eventually(0, hi, b).expect("interval")])
                }),
                _ => Formula::until(0, hi, Formula::not(a.clone()), b),
            }
            .expect("intervals are ordered");
            let priority = Priority::integer(r.random_range(1..=3)).expect("positive");
            tasks.push(Task { formula, priority });
        }
        TaskSet::new(tasks).expect("non-empty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Vwts,
    Mdp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchCell {
    pub kind: BenchKind,
    pub states: usize,
    pub tasks: usize,
    pub horizon: Time,
    pub receding: Option<Time>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    /// Also solve the VWTS MILPs; MDP cells are always solved.
    pub solve: bool,
    pub time_limit_secs: Option<f64>,
    /// `T′`; defaults to `T`.
    pub tprime: Option<Time>,
    /// History cap for MDP cells.
    pub cap: usize,
    /// Largest task horizon; defaults to just below the smallest horizon
    /// of the grid so every cell shares the same tasks.
    pub max_task_horizon: Time,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { seed: 0, solve: true, time_limit_secs: Some(60.0), tprime: None, cap: 500_000, max_task_horizon: 24 }
    }
}

/// One CSV line. Column names follow the scaling tables: `S`, `D`, `T`,
/// `Tr`, encoding and solving seconds, LP variables and constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub kind: BenchKind,
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "D")]
    pub tasks: usize,
    #[serde(rename = "T")]
    pub horizon: Time,
    #[serde(rename = "Tr")]
    pub receding: Option<Time>,
    pub t_encoding: f64,
    pub t_solving: f64,
    pub lpvars: usize,
    pub lpconst: usize,
    pub status: String,
    pub objective: Option<f64>,
    /// Worst-case reward MILPs solved while encoding an MDP cell.
    pub milp_calls: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("receding horizon required for MDP cells")]
    MissingReceding,
    #[error("{0}")]
    Cell(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn run_cell(cell: &BenchCell, cfg: &BenchConfig) -> Result<BenchRow, BenchError> {
    let floor = office(cell.states, cfg.seed);
    let tasks = floor.tasks(cell.tasks, cfg.max_task_horizon, cfg.seed);
    let tprime = cfg.tprime.unwrap_or(cell.horizon);
    let fail = |e: &dyn std::fmt::Display| BenchError::Cell(format!("{cell:?}: {e}"));
    match cell.kind {
        BenchKind::Vwts => {
            let ts = floor.vwts(cell.horizon);
            let started = Instant::now();
            let problem = build_problem1(&ts, &tasks, &EncodingConfig::new(cell.horizon, tprime)).map_err(|e| fail(&e))?;
            let t_encoding = started.elapsed().as_secs_f64();
            let (mut status, mut objective, mut t_solving) = ("skipped".to_string(), None, 0.0);
            if cfg.solve {
                let clock = StdClock::new();
                let opts = SolveOptions { time_limit_secs: cfg.time_limit_secs, ..SolveOptions::default() };
                let started = Instant::now();
                let res = solve_milp(&problem.model, &opts, Some(&clock)).map_err(|e| fail(&e))?;
                t_solving = started.elapsed().as_secs_f64();
                status = format!("{:?}", res.status);
                objective = res.objective;
            }
            Ok(BenchRow {
                kind: cell.kind,
                states: cell.states,
                tasks: cell.tasks,
                horizon: cell.horizon,
                receding: None,
                t_encoding,
                t_solving,
                lpvars: problem.model.num_vars(),
                lpconst: problem.model.num_constraints(),
                status,
                objective,
                milp_calls: 0,
            })
        }
        BenchKind::Mdp => {
            let receding = cell.receding.ok_or(BenchError::MissingReceding)?;
            let mdp = floor.mdp(cell.horizon);
            let mut rc = RecedingConfig::new(receding, tprime);
            rc.cap = cfg.cap;
            let ctx = RecedingContext::new(&mdp, &tasks, rc).map_err(|e| fail(&e))?;
            let started = Instant::now();
            let root = [(mdp.initial(), 0)];
            let cut = receding.min(cell.horizon);
            let tree = HistoryTree::build(&mdp, &root, cut, cfg.cap).map_err(|e| fail(&e))?;
            let leaves: Vec<usize> = tree.leaves().collect();
            let traces: Vec<_> = leaves.iter().map(|&l| tree.trace(l)).collect();
            let mut rewards = vec![0.0; tree.len()];
            for (&l, r) in leaves.iter().zip(Sequential.rewards(&ctx, &traces, cut)) {
                rewards[l] = trp_core::mitl::score_to_f64(&r.map_err(|e| fail(&e))?);
            }
            let lp = build_occupancy_lp(&tree, &rewards);
            let t_encoding = started.elapsed().as_secs_f64();
            let started = Instant::now();
            let sol = solve_occupancy(&lp, &SolveOptions::default()).map_err(|e| fail(&e))?;
            let t_solving = started.elapsed().as_secs_f64();
            Ok(BenchRow {
                kind: cell.kind,
                states: cell.states,
                tasks: cell.tasks,
                horizon: cell.horizon,
                receding: Some(receding),
                t_encoding,
                t_solving,
                lpvars: lp.model.num_vars(),
                lpconst: lp.model.num_constraints(),
                status: "Optimal".to_string(),
                objective: Some(sol.objective),
                milp_calls: traces.iter().filter(|t| t.last().is_some_and(|p| p.1 < cell.horizon)).count(),
            })
        }
    }
}

/// Every combination, VWTS cells first, in a fixed order.
pub fn grid(kinds: &[BenchKind], states: &[usize], tasks: &[usize], horizons: &[Time], receding: &[Time]) -> Vec<BenchCell> {
    let mut cells = Vec::new();
    for &kind in kinds {
        for &s in states {
            for &d in tasks {
                for &t in horizons {
                    match kind {
                        BenchKind::Vwts => cells.push(BenchCell { kind, states: s, tasks: d, horizon: t, receding: None }),
                        BenchKind::Mdp => {
                            for &tr in receding {
                                cells.push(BenchCell { kind, states: s, tasks: d, horizon: t, receding: Some(tr) })
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

/// Runs the cells on the worker pool; rows come back in cell order.
pub fn run_grid(cells: &[BenchCell], cfg: &BenchConfig) -> Vec<Result<BenchRow, BenchError>> {
    crate::parallel::pool().install(|| cells.par_iter().map(|c| run_cell(c, cfg)).collect())
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    let mut rd = csv::Reader::from_reader(input);
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// Whether `lpvars` and `lpconst` never decrease along `T` (fixed `S`, `D`)
/// and along `D` (fixed `S`, `T`) among the VWTS rows.
pub fn counts_monotone(rows: &[BenchRow]) -> bool {
    let vw: Vec<&BenchRow> = rows.iter().filter(|r| r.kind == BenchKind::Vwts).collect();
    let ordered = |a: &BenchRow, b: &BenchRow| b.lpvars >= a.lpvars && b.lpconst >= a.lpconst;
    vw.iter().all(|a| {
        vw.iter().all(|b| {
            let same_s = a.states == b.states;
            let along_t = same_s && a.tasks == b.tasks && a.horizon < b.horizon;
            let along_d = same_s && a.horizon == b.horizon && a.tasks < b.tasks;
            !(along_t || along_d) || ordered(a, b)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn office_shape() {
        let f = office(10, 1);
        assert_eq!(f.names.len(), 10);
        assert_eq!(f.labels[0], vec!["exit".to_string()]);
        let ts = f.vwts(30);
        assert_eq!(ts.num_states(), 10);
        assert_eq!(ts.edges().len(), 2 * f.corridors.len() + 10);
        let mdp = f.mdp(30);
        assert_eq!(mdp.edges().len(), ts.edges().len());
    }

    #[test]
    fn task_prefixes() {
        let f = office(10, 1);
        let five = f.tasks(5, 24, 1);
        let two = f.tasks(2, 24, 1);
        assert_eq!(&five.tasks()[..2], two.tasks());
        assert!(five.horizon() < 25);
    }

    #[test]
    fn vwts_row_and_csv_roundtrip() {
        let cfg = BenchConfig { solve: false, ..BenchConfig::default() };
        let rows: Vec<BenchRow> = grid(&[BenchKind::Vwts], &[6], &[1, 2], &[25, 30], &[])
            .iter()
            .map(|c| run_cell(c, &cfg).unwrap())
            .collect();
        assert!(counts_monotone(&rows));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kind,S,D,T,Tr,t_encoding,t_solving,lpvars,lpconst,status,objective,milp_calls"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }
}
