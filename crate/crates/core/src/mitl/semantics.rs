//! Boolean and temporal-robustness semantics over finite timed words.
//!
//! Every subformula is evaluated once over the whole domain of the word
//! (a dense boolean signal); point queries and robustness are read off the
//! resulting signal. Temporal windows are clipped at the word's horizon:
//! clipped points are dropped from conjunctions and disjunctions alike.

use alloc::vec;
use alloc::vec::Vec;

use super::{Formula, MitlError, Score, TaskSet, TimedWord};
use crate::Time;

/// Quantification range of the left operand of `Until`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum UntilMode {
    /// `lhs` must hold on `[t, t' - 1]`; matches the MILP encoding.
    #[default]
    Strict,
    /// `lhs` must hold on `[t, t']`.
    Closed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RobustnessVariant {
    /// Backward shifts, `η⁻`.
    #[default]
    Right,
    /// Forward shifts, `η⁺`.
    Left,
    /// Shifts in both directions, `η±`.
    Combined,
}

/// Value of the characteristic function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn is_pos(self) -> bool {
        self == Sign::Pos
    }

    pub fn value(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

impl core::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

/// Satisfaction of one formula at every point of a word's domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signal {
    start: Time,
    values: Vec<bool>,
}

impl Signal {
    pub fn start(&self) -> Time {
        self.start
    }

    pub fn end(&self) -> Time {
        self.start + self.values.len() as Time - 1
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn at(&self, t: Time) -> Result<bool, MitlError> {
        if t < self.start || t > self.end() {
            return Err(MitlError::OutOfHorizon { t, start: self.start, horizon: self.end() });
        }
        Ok(self.values[(t - self.start) as usize])
    }

    /// Signed shift-invariance at `t`, truncated at the signal's domain.
    pub fn robustness(&self, t: Time, variant: RobustnessVariant) -> Result<i64, MitlError> {
        let v = self.at(t)?;
        let i = (t - self.start) as usize;
        let back = self.values[..i].iter().rev().take_while(|&&x| x == v).count() as i64;
        let fwd = self.values[i + 1..].iter().take_while(|&&x| x == v).count() as i64;
        let mag = match variant {
            RobustnessVariant::Right => back,
            RobustnessVariant::Left => fwd,
            RobustnessVariant::Combined => back.min(fwd),
        };
        Ok(if v { mag } else { -mag })
    }
}

/// Evaluates `formula` over the full domain `[word.start(), word.horizon()]`.
pub fn signal(formula: &Formula, word: &TimedWord, mode: UntilMode) -> Signal {
    let start = word.start();
    let len = (word.horizon() - start + 1) as usize;
    Signal { start, values: eval(formula, word, start, len, mode) }
}

fn eval(f: &Formula, word: &TimedWord, start: Time, len: usize, mode: UntilMode) -> Vec<bool> {
    match f {
        Formula::True => vec![true; len],
        Formula::Atom(name) => (0..len)
            .map(|i| word.labels_at(start + i as Time).map(|l| l.contains(name.as_str())).unwrap_or(false))
            .collect(),
        Formula::Not(c) => eval(c, word, start, len, mode).into_iter().map(|b| !b).collect(),
        Formula::And(cs) => {
            let mut acc = vec![true; len];
            for c in cs {
                for (a, b) in acc.iter_mut().zip(eval(c, word, start, len, mode)) {
                    *a &= b;
                }
            }
            acc
        }
        Formula::Or(cs) => {
            let mut acc = vec![false; len];
            for c in cs {
                for (a, b) in acc.iter_mut().zip(eval(c, word, start, len, mode)) {
                    *a |= b;
                }
            }
            acc
        }
        Formula::Globally(iv, c) => {
            let child = eval(c, word, start, len, mode);
            window(&child, iv.lo() as usize, iv.hi() as usize, true)
        }
        Formula::Eventually(iv, c) => {
            let child = eval(c, word, start, len, mode);
            window(&child, iv.lo() as usize, iv.hi() as usize, false)
        }
        Formula::Until(iv, l, r) => {
            let lhs = eval(l, word, start, len, mode);
            let rhs = eval(r, word, start, len, mode);
            // run[i]: number of consecutive lhs-true points starting at i
            let mut run = vec![0usize; len + 1];
            for i in (0..len).rev() {
                run[i] = if lhs[i] { run[i + 1] + 1 } else { 0 };
            }
            let extra = usize::from(mode == UntilMode::Closed);
            (0..len)
                .map(|i| {
                    let lo = i + iv.lo() as usize;
                    let hi = (i + iv.hi() as usize).min(len - 1);
                    (lo..=hi).any(|j| rhs[j] && run[i] >= j - i + extra)
                })
                .collect()
        }
    }
}

/// Conjunction (`all = true`) or disjunction over `[i + lo, i + hi]`, clipped
/// at the end of the signal.
fn window(child: &[bool], lo: usize, hi: usize, all: bool) -> Vec<bool> {
    let len = child.len();
    (0..len)
        .map(|i| {
            let a = i + lo;
            if a >= len {
                return all;
            }
            let b = (i + hi).min(len - 1);
            if all {
                child[a..=b].iter().all(|&x| x)
            } else {
                child[a..=b].iter().any(|&x| x)
            }
        })
        .collect()
}

pub fn characteristic(formula: &Formula, word: &TimedWord, t: Time) -> Result<Sign, MitlError> {
    characteristic_with(formula, word, t, UntilMode::default())
}

pub fn characteristic_with(formula: &Formula, word: &TimedWord, t: Time, mode: UntilMode) -> Result<Sign, MitlError> {
    if !word.contains_time(t) {
        return Err(MitlError::OutOfHorizon { t, start: word.start(), horizon: word.horizon() });
    }
    signal(formula, word, mode).at(t).map(Sign::from_bool)
}

pub fn robustness(formula: &Formula, word: &TimedWord, t: Time, variant: RobustnessVariant) -> Result<i64, MitlError> {
    robustness_with(formula, word, t, variant, UntilMode::default())
}

pub fn robustness_with(
    formula: &Formula,
    word: &TimedWord,
    t: Time,
    variant: RobustnessVariant,
    mode: UntilMode,
) -> Result<i64, MitlError> {
    if !word.contains_time(t) {
        return Err(MitlError::OutOfHorizon { t, start: word.start(), horizon: word.horizon() });
    }
    signal(formula, word, mode).robustness(t, variant)
}

/// Per-task robustness at `t = 0`, in task order.
pub fn task_robustness(
    tasks: &TaskSet,
    word: &TimedWord,
    variant: RobustnessVariant,
    mode: UntilMode,
) -> Result<Vec<i64>, MitlError> {
    tasks.iter().map(|task| robustness_with(&task.formula, word, 0, variant, mode)).collect()
}

/// `Σ_i η_i(σ, 0) · p_i`.
pub fn weighted_objective(
    tasks: &TaskSet,
    word: &TimedWord,
    variant: RobustnessVariant,
    mode: UntilMode,
) -> Result<Score, MitlError> {
    let etas = task_robustness(tasks, word, variant, mode)?;
    Ok(tasks.weighted_sum(&etas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitl::WordEntry;
    use alloc::vec;

    fn example1() -> TimedWord {
        let none: [&str; 0] = [];
        TimedWord::new(
            vec![
                WordEntry::new(["exit"], 0),
                WordEntry::new(none, 3),
                WordEntry::new(["lab"], 4),
                WordEntry::new(none, 5),
                WordEntry::new(none, 6),
                WordEntry::new(["off1"], 12),
            ],
            12,
        )
        .unwrap()
    }

    #[test]
    fn globally_exit_holds_on_example_word() {
        let f = Formula::globally(1, 2, Formula::atom("exit")).unwrap();
        assert_eq!(characteristic(&f, &example1(), 0).unwrap(), Sign::Pos);
    }

    #[test]
    fn top_always_satisfied() {
        let w = example1();
        for t in 0..=12 {
            assert_eq!(characteristic(&Formula::True, &w, t).unwrap(), Sign::Pos);
        }
    }

    #[test]
    fn lab_read_through_persistence() {
        let f = Formula::not(Formula::atom("lab"));
        assert_eq!(characteristic(&f, &example1(), 4).unwrap(), Sign::Neg);
        assert_eq!(characteristic(&f, &example1(), 5).unwrap(), Sign::Pos);
    }

    #[test]
    fn out_of_horizon_query_errors() {
        let w = example1();
        assert!(matches!(characteristic(&Formula::True, &w, 13), Err(MitlError::OutOfHorizon { .. })));
        assert!(robustness(&Formula::True, &w, -1, RobustnessVariant::Right).is_err());
    }

    #[test]
    fn constant_words_give_window_length() {
        let w = example1();
        assert_eq!(robustness(&Formula::True, &w, 0, RobustnessVariant::Left).unwrap(), 12);
        let never = Formula::not(Formula::True);
        assert_eq!(robustness(&never, &w, 0, RobustnessVariant::Left).unwrap(), -12);
        // without pre-history there is nothing to shift backwards into
        assert_eq!(robustness(&Formula::True, &w, 0, RobustnessVariant::Right).unwrap(), 0);
        let w = w.with_prehistory(4);
        assert_eq!(robustness(&Formula::True, &w, 0, RobustnessVariant::Right).unwrap(), 4);
        assert_eq!(robustness(&Formula::True, &w, 0, RobustnessVariant::Combined).unwrap(), 4);
    }

    #[test]
    fn until_modes_differ_when_lhs_fails_at_witness() {
        // a holds at 0 only, b holds from 1: strict U is satisfied at 0, closed is not
        let none: [&str; 0] = [];
        let w = TimedWord::new(vec![WordEntry::new(["a"], 0), WordEntry::new(["b"], 1), WordEntry::new(none, 3)], 4)
            .unwrap();
        let f = Formula::until(1, 2, Formula::atom("a"), Formula::atom("b")).unwrap();
        assert!(characteristic_with(&f, &w, 0, UntilMode::Strict).unwrap().is_pos());
        assert!(!characteristic_with(&f, &w, 0, UntilMode::Closed).unwrap().is_pos());
    }

    #[test]
    fn clipped_windows_are_vacuous_for_globally_and_empty_for_eventually() {
        let w = example1();
        let g = Formula::globally(20, 30, Formula::atom("nowhere")).unwrap();
        let f = Formula::eventually(20, 30, Formula::True).unwrap();
        assert!(characteristic(&g, &w, 0).unwrap().is_pos());
        assert!(!characteristic(&f, &w, 0).unwrap().is_pos());
    }

    #[test]
    fn eventually_right_robustness_counts_postponement() {
        // off1 reached at 12; F[0,12] off1 at t=0 with 3 fictive steps:
        // at t=-1 the window [−1, 11] misses the arrival, so η⁻ = 0.
        let f = Formula::eventually(0, 12, Formula::atom("off1")).unwrap();
        let w = example1().with_prehistory(3);
        assert_eq!(robustness(&f, &w, 0, RobustnessVariant::Right).unwrap(), 0);
        let lab = Formula::eventually(0, 12, Formula::atom("lab")).unwrap();
        // lab at 4: windows [−τ, 12−τ] still contain 4 for τ ≤ 3 (capped by pre-history)
        assert_eq!(robustness(&lab, &w, 0, RobustnessVariant::Right).unwrap(), 3);
    }
}
