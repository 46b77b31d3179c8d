use std::time::Instant;

use trp_core::clock::Clock;

/// Seconds since construction, from [`Instant`].
#[derive(Clone, Copy, Debug)]
pub struct StdClock {
    origin: Instant,
}

impl StdClock {
    pub fn new() -> Self {
        StdClock { origin: Instant::now() }
    }
}

impl Default for StdClock {
    fn default() -> Self {
        StdClock::new()
    }
}

impl Clock for StdClock {
    fn now_secs(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone() {
        let c = StdClock::new();
        let a = c.now_secs();
        let b = c.now_secs();
        assert!(b >= a && a >= 0.0);
    }
}
