//! Files, command line and benchmarks around [`trp_core`].
//!
//! The core crate holds every algorithm and stays `no_std`; this crate adds
//! what needs an operating system: a wall clock, JSON environment and MDP
//! files, MPS export and import, thread-pool parallelism for rewards and
//! simulations, the differential suite behind `oracle-check`, the scaling
//! benchmark and the `trp` binary's dispatcher.

pub mod bench;
pub mod cli;
pub mod clock;
pub mod formats;
pub mod mps;
pub mod parallel;
pub mod plot;
pub mod suite;

pub use clock::StdClock;
