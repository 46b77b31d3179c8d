//! Replays an assignment against a model using only the model's own data.

use crate::milp::MilpModel;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error("assignment has {got} values for {expected} variables")]
    Length { expected: usize, got: usize },
    #[error("variable {index} value {value} outside [{lower},{upper}]")]
    Bound { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("integral variable {index} has fractional value {value}")]
    Integrality { index: usize, value: f64 },
    #[error("constraint {index} violated by {amount}")]
    Constraint { index: usize, amount: f64 },
}

/// Checks bounds and constraints within `feas_tol` and integrality within
/// `int_tol`.
pub fn check_assignment(model: &MilpModel, x: &[f64], feas_tol: f64, int_tol: f64) -> Result<(), CheckError> {
    if x.len() != model.num_vars() {
        return Err(CheckError::Length { expected: model.num_vars(), got: x.len() });
    }
    for (index, (v, &value)) in model.vars.iter().zip(x).enumerate() {
        if !value.is_finite() || value < v.lower - feas_tol || value > v.upper + feas_tol {
            return Err(CheckError::Bound { index, value, lower: v.lower, upper: v.upper });
        }
        if v.kind.is_integral() && libm::fabs(value - libm::round(value)) > int_tol {
            return Err(CheckError::Integrality { index, value });
        }
    }
    for (index, c) in model.constraints.iter().enumerate() {
        let amount = c.violation(x);
        if amount > feas_tol {
            return Err(CheckError::Constraint { index, amount });
        }
    }
    Ok(())
}

/// Largest constraint violation of `x`.
pub fn max_violation(model: &MilpModel, x: &[f64]) -> f64 {
    model.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
}
