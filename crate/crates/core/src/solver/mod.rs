//! Reference LP/MILP solver: a bounded dual simplex over a sparse LU basis
//! and best-bound branch-and-bound with most-fractional branching.
//!
//! Arithmetic is floating point; every reported optimum is re-checked
//! against the model's constraint list by [`check_assignment`], which does
//! not share any code with the simplex.

mod bnb;
mod check;
mod lu;
mod simplex;

pub use check::{check_assignment, max_violation, CheckError};

use alloc::vec::Vec;

use crate::clock::Clock;
use crate::milp::{MilpModel, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The time limit expired; `objective` holds the incumbent if any.
    TimeLimit,
    /// The node limit was reached; `objective` holds the incumbent if any.
    NodeLimit,
    /// The simplex lost numerical control or a candidate solution failed
    /// the independent replay.
    Numerical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub time_limit_secs: Option<f64>,
    pub node_limit: Option<usize>,
    pub int_tol: f64,
    pub feas_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { time_limit_secs: None, node_limit: None, int_tol: 1e-6, feas_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of the returned assignment, in the model's sense.
    pub objective: Option<f64>,
    /// Best proven bound on the optimum (upper bound when maximizing).
    pub bound: Option<f64>,
    /// One value per model variable; empty when no assignment is known.
    pub values: Vec<f64>,
    /// Branch-and-bound nodes solved after the root.
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_secs: f64,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}

/// Anything that can solve a [`MilpModel`].
pub trait MilpBackend {
    fn solve(&self, model: &MilpModel, opts: &SolveOptions) -> Result<SolveResult, ModelError>;
}

/// The built-in solver, optionally bound to a clock for time limits.
#[derive(Clone, Copy, Default)]
pub struct ReferenceBackend<'c> {
    pub clock: Option<&'c dyn Clock>,
}

impl MilpBackend for ReferenceBackend<'_> {
    fn solve(&self, model: &MilpModel, opts: &SolveOptions) -> Result<SolveResult, ModelError> {
        solve_milp(model, opts, self.clock)
    }
}

/// Solves the LP relaxation when `relax` is set; otherwise integrality is
/// enforced through [`solve_milp`] with default options.
pub fn solve_lp(model: &MilpModel, relax: bool) -> Result<SolveResult, ModelError> {
    if relax {
        bnb::solve(model, &SolveOptions::default(), None, true)
    } else {
        solve_milp(model, &SolveOptions::default(), None)
    }
}

pub fn solve_milp(model: &MilpModel, opts: &SolveOptions, clock: Option<&dyn Clock>) -> Result<SolveResult, ModelError> {
    bnb::solve(model, opts, clock, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Cmp, LinExpr, ObjSense};

    #[test]
    fn trivial_bound() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, f64::INFINITY);
        m.add_constraint("c", LinExpr::var(x), Cmp::Le, 3.0);
        m.set_objective(ObjSense::Maximize, LinExpr::var(x));
        let r = solve_lp(&m, true).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("a", LinExpr::var(x), Cmp::Le, 0.0);
        m.add_constraint("b", LinExpr::var(x), Cmp::Ge, 1.0);
        assert_eq!(solve_lp(&m, true).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn integral_root_needs_no_branching() {
        let mut m = MilpModel::new("t");
        let x = m.integer("x", 0.0, 10.0);
        let y = m.binary("y");
        m.add_constraint("c", LinExpr::var(x).term(y, 1.0), Cmp::Le, 4.0);
        m.set_objective(ObjSense::Maximize, LinExpr::var(x).term(y, 2.0));
        let r = solve_milp(&m, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.nodes, 0);
        assert!((r.objective.unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn small_knapsack_branches() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = MilpModel::new("k");
        let v: Vec<_> = (0..3).map(|i| m.binary(alloc::format!("x{i}"))).collect();
        m.add_constraint("w1", LinExpr::new().term(v[0], 2.0).term(v[1], 3.0).term(v[2], 1.0), Cmp::Le, 5.0);
        m.add_constraint("w2", LinExpr::new().term(v[0], 4.0).term(v[1], 1.0).term(v[2], 2.0), Cmp::Le, 11.0);
        m.add_constraint("w3", LinExpr::new().term(v[0], 3.0).term(v[1], 4.0).term(v[2], 2.0), Cmp::Le, 8.0);
        m.set_objective(ObjSense::Maximize, LinExpr::new().term(v[0], 5.0).term(v[1], 4.0).term(v[2], 3.0));
        let r = solve_milp(&m, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 9.0).abs() < 1e-9);
        assert!(check_assignment(&m, &r.values, 1e-9, 1e-6).is_ok());
    }
}
