//! Thread-pool helpers.

use rayon::prelude::*;
use trp_core::mitl::Score;
use trp_core::receding::{worst_case_reward, RecedingContext, RecedingError, RewardBatch, Trace};
use trp_core::Time;

/// Worker count from `TRP_WORKERS`, defaulting to the available cores.
pub fn workers() -> usize {
    std::env::var("TRP_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers()).build().expect("thread pool")
}

/// Evaluates `R̄` of a batch on the current rayon pool.
#[derive(Clone, Copy, Debug, Default)]
pub struct Parallel;

impl RewardBatch for Parallel {
    fn rewards(&self, ctx: &RecedingContext<'_>, traces: &[Trace], cut: Time) -> Vec<Result<Score, RecedingError>> {
        traces.par_iter().map(|t| worst_case_reward(ctx, t, cut)).collect()
    }
}

/// Seed of run `i` derived from a root seed (SplitMix64 finalizer).
pub fn run_seed(root: u64, i: u64) -> u64 {
    let mut z = root.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
