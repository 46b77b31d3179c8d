//! Reads a path and its robustness back out of a solved [`Problem`].

use alloc::vec::Vec;

use super::encode::Problem;
use crate::mitl::{self, MitlError, RobustnessVariant, Score, TaskSet};
use crate::vwts::{Path, StateId, TimeSequence, Vwts, VwtsError};
use crate::Time;

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedSolution {
    pub path: Path,
    pub time_sequence: TimeSequence,
    /// `η_i` at 0 for each task, as re-evaluated on the decoded word.
    pub robustness: Vec<i64>,
    /// `Σ_i η_i · p_i`, exact.
    pub objective: Score,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("solution has {got} values, model has {expected} variables")]
    Length { expected: usize, got: usize },
    #[error("occupancy of state {state} at t={t} is {value}, not integral")]
    Fractional { state: StateId, t: Time, value: f64 },
    #[error("more than one state occupied at t={0}")]
    DoubleOccupancy(Time),
    #[error("occupied steps {got:?} do not match the path's time sequence {expected:?}")]
    Timing { expected: Vec<Time>, got: Vec<Time> },
    #[error("task {task}: encoded robustness {encoded} but the word gives {evaluated}")]
    Inconsistent { task: usize, encoded: f64, evaluated: i64 },
    #[error(transparent)]
    Vwts(#[from] VwtsError),
    #[error(transparent)]
    Mitl(#[from] MitlError),
}

/// Occupied states in time order.
pub fn occupied_steps(problem: &Problem, x: &[f64]) -> Result<(Vec<StateId>, Vec<Time>), DecodeError> {
    let occ = &problem.occupancy;
    if x.len() != problem.model.num_vars() {
        return Err(DecodeError::Length { expected: problem.model.num_vars(), got: x.len() });
    }
    let mut states = Vec::new();
    let mut times = Vec::new();
    for t in 0..=occ.horizon {
        let mut here = None;
        for s in 0..occ.num_states() {
            let Some(v) = occ.var(s, t) else { continue };
            let value = x[v.index()];
            if libm::fabs(value - libm::round(value)) > INT_TOL {
                return Err(DecodeError::Fractional { state: s, t, value });
            }
            if value > 0.5 {
                if here.is_some() {
                    return Err(DecodeError::DoubleOccupancy(t));
                }
                here = Some(s);
            }
        }
        if let Some(s) = here {
            states.push(s);
            times.push(t);
        }
    }
    Ok((states, times))
}

/// Recovers the path, checks it against `ts`, and re-evaluates every task
/// on the resulting word. The encoded `η` values must agree exactly.
pub fn decode(problem: &Problem, x: &[f64], ts: &Vwts, tasks: &TaskSet) -> Result<DecodedSolution, DecodeError> {
    let (states, times) = occupied_steps(problem, x)?;
    let cfg = &problem.config;
    let path = Path::new(ts, states)?;
    let time_sequence = ts.time_sequence(&path, cfg.horizon)?;
    if time_sequence.as_slice() != times.as_slice() {
        return Err(DecodeError::Timing { expected: time_sequence.as_slice().to_vec(), got: times });
    }
    let mut word = ts.timed_word(&path, cfg.horizon)?;
    if cfg.variant != RobustnessVariant::Left {
        word = word.with_prehistory(cfg.tprime);
    }
    let robustness = mitl::task_robustness(tasks, &word, cfg.variant, cfg.until_mode)?;
    for (task, (eta, &eval)) in problem.etas.iter().zip(&robustness).enumerate() {
        let encoded = eta.eval(x);
        if libm::fabs(encoded - eval as f64) > INT_TOL {
            return Err(DecodeError::Inconsistent { task, encoded, evaluated: eval });
        }
    }
    let objective = tasks.weighted_sum(&robustness);
    Ok(DecodedSolution { path, time_sequence, robustness, objective })
}
