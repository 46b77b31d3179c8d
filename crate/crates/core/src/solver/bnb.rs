use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::check::check_assignment;
use super::simplex::{Basis, LpStatus, Simplex, StdLp};
use super::{SolveOptions, SolveResult, SolveStatus};
use crate::clock::{Clock, Deadline};
use crate::milp::{MilpModel, ModelError, ObjSense};

type Changes = Vec<(u32, f64, f64)>;

/// A solved node waiting to be branched on.
struct Open {
    /// LP bound in maximization orientation.
    score: f64,
    depth: usize,
    id: usize,
    changes: Changes,
    basis: Basis,
    branch: (usize, f64),
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// A node whose LP is still loaded in a live simplex.
struct Live<'s> {
    score: f64,
    depth: usize,
    changes: Changes,
    simplex: Simplex<'s>,
    branch: (usize, f64),
}

struct Search<'m> {
    model: &'m MilpModel,
    opts: &'m SolveOptions,
    ints: Vec<usize>,
    /// `+1` to turn the model objective into a score to maximize, `-1` otherwise.
    orient: f64,
    constant: f64,
    step: Option<f64>,
    incumbent: Option<(f64, Vec<f64>)>,
    iterations: usize,
    numerical: bool,
}

impl Search<'_> {
    fn score(&self, s: &Simplex<'_>) -> f64 {
        self.orient * (s.objective() + self.constant)
    }

    /// Best score a node with LP score `score` could still deliver.
    fn effective(&self, score: f64) -> f64 {
        match self.step {
            Some(g) if g > 0.0 => {
                let c = self.orient * self.constant;
                c + g * libm::floor((score - c) / g + 1e-6)
            }
            _ => score,
        }
    }

    fn can_improve(&self, score: f64) -> bool {
        match &self.incumbent {
            None => true,
            Some((inc, _)) => self.effective(score) > inc + 1e-7,
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &self.ints {
            let v = x[j];
            let frac = v - libm::floor(v);
            if frac <= self.opts.int_tol || frac >= 1.0 - self.opts.int_tol {
                continue;
            }
            let dist = libm::fabs(frac - 0.5);
            if best.is_none_or(|b| dist < b.2) {
                best = Some((j, v, dist));
            }
        }
        best.map(|(j, v, _)| (j, v))
    }

    /// Re-solves after a bound change, retrying from the slack basis on
    /// numerical trouble.
    fn resolve<'s>(&mut self, lp: &'s StdLp, s: &mut Simplex<'s>, deadline: Option<&Deadline<'_>>) -> LpStatus {
        let before = s.iterations;
        let mut st = s.solve(deadline);
        self.iterations += s.iterations - before;
        if st == LpStatus::Numerical {
            let (lo, up) = s.bounds();
            let mut cold = Simplex::new(lp, lo.to_vec(), up.to_vec(), None);
            st = cold.solve(deadline);
            self.iterations += cold.iterations;
            *s = cold;
        }
        if st == LpStatus::Numerical {
            self.numerical = true;
        }
        st
    }

    /// Fixes the integral variables at their rounded values, re-solves for
    /// the continuous ones and replays the result against the model.
    fn polish<'s>(&mut self, lp: &'s StdLp, s: &Simplex<'s>, deadline: Option<&Deadline<'_>>) {
        let x = s.structural_values();
        let fix: Changes = self
            .ints
            .iter()
            .map(|&j| {
                let r = libm::round(x[j]);
                (j as u32, r, r)
            })
            .collect();
        let mut fixed = s.clone();
        fixed.set_bounds(&fix);
        if self.resolve(lp, &mut fixed, deadline) != LpStatus::Optimal {
            return;
        }
        let mut vals = fixed.structural_values();
        for (j, v) in vals.iter_mut().enumerate() {
            let var = &self.model.vars[j];
            if var.kind.is_integral() {
                *v = libm::round(*v);
            }
            *v = v.clamp(var.lower, var.upper);
        }
        if check_assignment(self.model, &vals, self.opts.feas_tol, self.opts.int_tol).is_err() {
            self.numerical = true;
            return;
        }
        let score = self.orient * self.model.objective_value(&vals);
        if self.incumbent.as_ref().is_none_or(|(inc, _)| score > *inc + 1e-9) {
            self.incumbent = Some((score, vals));
        }
    }
}

pub(super) fn solve(
    model: &MilpModel,
    opts: &SolveOptions,
    clock: Option<&dyn Clock>,
    relax: bool,
) -> Result<SolveResult, ModelError> {
    model.validate()?;
    let deadline = match (clock, opts.time_limit_secs) {
        (Some(c), Some(limit)) => Some(Deadline::new(c, limit)),
        _ => None,
    };
    let start = clock.map(|c| c.now_secs());
    let elapsed = || match (clock, start) {
        (Some(c), Some(s)) => c.now_secs() - s,
        _ => 0.0,
    };
    let lp = StdLp::from_model(model);
    let ints: Vec<usize> = if relax {
        Vec::new()
    } else {
        (0..model.num_vars()).filter(|&j| model.vars[j].kind.is_integral()).collect()
    };
    let mut search = Search {
        model,
        opts,
        ints,
        orient: if model.sense == ObjSense::Maximize { 1.0 } else { -1.0 },
        constant: model.objective.constant,
        step: if relax { None } else { model.objective_step },
        incumbent: None,
        iterations: 0,
        numerical: false,
    };
    let result = |status, search: &Search<'_>, bound: Option<f64>, nodes: usize| {
        let (objective, values) = match &search.incumbent {
            Some((score, vals)) => (Some(score * search.orient), vals.clone()),
            None => (None, Vec::new()),
        };
        SolveResult {
            status,
            objective,
            bound: bound.map(|b| b * search.orient),
            values,
            nodes,
            lp_iterations: search.iterations,
            wall_secs: elapsed(),
        }
    };

    let mut root = Simplex::new(&lp, lp.lower.clone(), lp.upper.clone(), None);
    match search.resolve(&lp, &mut root, deadline.as_ref()) {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(result(SolveStatus::Infeasible, &search, None, 0)),
        LpStatus::Unbounded => return Ok(result(SolveStatus::Unbounded, &search, None, 0)),
        LpStatus::TimeLimit => return Ok(result(SolveStatus::TimeLimit, &search, None, 0)),
        LpStatus::Numerical => return Ok(result(SolveStatus::Numerical, &search, None, 0)),
    }
    let root_score = search.score(&root);

    if relax {
        let mut vals = root.structural_values();
        for (j, v) in vals.iter_mut().enumerate() {
            *v = v.clamp(model.vars[j].lower, model.vars[j].upper);
        }
        let ok = check_assignment(model, &vals, opts.feas_tol, f64::INFINITY).is_ok();
        search.incumbent = Some((search.orient * model.objective_value(&vals), vals));
        let status = if ok { SolveStatus::Optimal } else { SolveStatus::Numerical };
        return Ok(result(status, &search, Some(root_score), 0));
    }

    let mut heap: BinaryHeap<Open> = BinaryHeap::new();
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut current: Option<Live<'_>> = match search.most_fractional(&root.structural_values()) {
        None => {
            search.polish(&lp, &root, deadline.as_ref());
            None
        }
        Some(branch) => Some(Live { score: root_score, depth: 0, changes: Vec::new(), simplex: root, branch }),
    };

    let mut stop: Option<SolveStatus> = None;
    loop {
        let live = match current.take() {
            Some(l) => l,
            None => {
                let Some(node) = heap.pop() else { break };
                if !search.can_improve(node.score) {
                    heap.clear();
                    break;
                }
                let (mut lo, mut up) = (lp.lower.clone(), lp.upper.clone());
                for &(j, l, u) in &node.changes {
                    lo[j as usize] = l;
                    up[j as usize] = u;
                }
                let mut s = Simplex::new(&lp, lo, up, Some(&node.basis));
                match search.resolve(&lp, &mut s, deadline.as_ref()) {
                    LpStatus::Optimal => {}
                    LpStatus::TimeLimit => {
                        heap.push(node);
                        stop = Some(SolveStatus::TimeLimit);
                        break;
                    }
                    _ => continue,
                }
                Live { score: node.score, depth: node.depth, changes: node.changes, simplex: s, branch: node.branch }
            }
        };
        if !search.can_improve(live.score) {
            continue;
        }
        let timed_out = deadline.as_ref().is_some_and(|d| d.expired());
        let node_capped = opts.node_limit.is_some_and(|l| nodes >= l);
        if timed_out || node_capped {
            heap.push(Open {
                score: live.score,
                depth: live.depth,
                id: next_id,
                basis: live.simplex.basis(),
                changes: live.changes,
                branch: live.branch,
            });
            stop = Some(if timed_out { SolveStatus::TimeLimit } else { SolveStatus::NodeLimit });
            break;
        }

        let (j, v) = live.branch;
        let (lo_j, up_j) = {
            let (lo, up) = live.simplex.bounds();
            (lo[j], up[j])
        };
        let mut children: Vec<Live<'_>> = Vec::with_capacity(2);
        let sides = [(lo_j, libm::floor(v)), (libm::ceil(v), up_j)];
        let mut parent = Some(live.simplex);
        for (k, (l, u)) in sides.into_iter().enumerate() {
            // the second child reuses the parent's simplex in place
            let mut s = if k == 0 { parent.as_ref().unwrap().clone() } else { parent.take().unwrap() };
            if l > u {
                continue;
            }
            let change = (j as u32, l, u);
            s.set_bounds(&[change]);
            let st = search.resolve(&lp, &mut s, deadline.as_ref());
            nodes += 1;
            let mut changes = live.changes.clone();
            changes.push(change);
            match st {
                LpStatus::Optimal => {}
                LpStatus::TimeLimit => {
                    heap.push(Open {
                        score: live.score,
                        depth: live.depth + 1,
                        id: next_id,
                        changes,
                        basis: s.basis(),
                        branch: live.branch,
                    });
                    next_id += 1;
                    stop = Some(SolveStatus::TimeLimit);
                    continue;
                }
                _ => continue,
            }
            let score = search.score(&s).min(live.score);
            if !search.can_improve(score) {
                continue;
            }
            match search.most_fractional(&s.structural_values()) {
                None => search.polish(&lp, &s, deadline.as_ref()),
                Some(branch) => children.push(Live { score, depth: live.depth + 1, changes, simplex: s, branch }),
            }
        }
        if stop.is_some() {
            for c in children {
                heap.push(Open {
                    score: c.score,
                    depth: c.depth,
                    id: next_id,
                    basis: c.simplex.basis(),
                    changes: c.changes,
                    branch: c.branch,
                });
                next_id += 1;
            }
            break;
        }
        // plunge into the better child, park the other
        children.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut it = children.into_iter();
        current = it.next();
        for c in it {
            heap.push(Open {
                score: c.score,
                depth: c.depth,
                id: next_id,
                basis: c.simplex.basis(),
                changes: c.changes,
                branch: c.branch,
            });
            next_id += 1;
        }
    }

    let open_bound = heap.iter().map(|n| search.effective(n.score)).fold(f64::NEG_INFINITY, f64::max);
    let inc_score = search.incumbent.as_ref().map(|i| i.0);
    let bound = match inc_score {
        Some(i) => Some(open_bound.max(i)),
        None if open_bound > f64::NEG_INFINITY => Some(open_bound),
        None => None,
    };
    let status = match stop {
        Some(s) => s,
        None if search.numerical && search.incumbent.is_none() => SolveStatus::Numerical,
        None if search.incumbent.is_none() => SolveStatus::Infeasible,
        None => SolveStatus::Optimal,
    };
    Ok(result(status, &search, bound, nodes))
}
