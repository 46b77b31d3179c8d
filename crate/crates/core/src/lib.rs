//! Planning toolkit for priority-weighted temporal robustness of MITL tasks.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece: formula semantics, the text syntax, varying weighted transition
//! systems, the MILP encoding and a reference branch-and-bound solver, the
//! history-augmented MDP with its occupancy-measure LP, the receding-horizon
//! replanner, and brute-force oracles used to cross-check all of the above.
//! File formats, the CLI and anything touching the clock or the filesystem
//! live in the `trp` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod clock;
pub mod mdp;
pub mod milp;
pub mod mitl;
pub mod oracle;
pub mod random;
pub mod receding;
pub mod solver;
pub mod vwts;

/// Discrete time step. Signed so that the fictive pre-history used by the
/// right-robustness encoding can be indexed directly.
pub type Time = i64;

pub use mitl::{Formula, Interval, Priority, RobustnessVariant, Task, TaskSet, TimedWord, UntilMode};
pub use vwts::{Path, StateId, TimeSequence, Vwts};
