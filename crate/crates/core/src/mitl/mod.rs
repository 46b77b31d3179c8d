//! MITL formulas, timed words, satisfaction and temporal robustness.

mod formula;
mod parser;
mod semantics;
mod task;
mod word;

pub use formula::{Formula, Interval};
pub use parser::{parse, parse_task_file, parse_task_line};
pub use semantics::{
    characteristic, characteristic_with, robustness, robustness_with, signal, task_robustness, weighted_objective,
    RobustnessVariant, Sign, Signal, UntilMode,
};
pub use task::{score_to_f64, Priority, Score, Task, TaskSet};
pub use word::{LabelSet, TimedWord, WordEntry};

use crate::Time;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MitlError {
    #[error("interval [{lo},{hi}] has lower bound above upper bound")]
    BadInterval { lo: u32, hi: u32 },
    #[error("`{op}` needs at least two operands, got {got}")]
    Arity { op: &'static str, got: usize },
    #[error("timed word has no entries")]
    EmptyWord,
    #[error("timed word entry {index} breaks strictly increasing nonnegative times")]
    NonMonotoneWord { index: usize },
    #[error("word horizon {horizon} precedes its last entry at {last}")]
    HorizonBeforeLastEntry { horizon: Time, last: Time },
    #[error("time {t} is outside the word domain [{start},{horizon}]")]
    OutOfHorizon { t: Time, start: Time, horizon: Time },
    #[error("priority must be a nonnegative rational")]
    BadPriority,
    #[error("task set is empty")]
    NoTasks,
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: &'static str },
    #[error("line {line}: {source}")]
    TaskLine { line: usize, source: alloc::boxed::Box<MitlError> },
}
