//! Wall-clock abstraction so that time limits work without `std`.

/// Monotonic clock reporting seconds since an arbitrary origin.
pub trait Clock {
    fn now_secs(&self) -> f64;
}

/// A deadline measured against some [`Clock`].
#[derive(Clone, Copy)]
pub struct Deadline<'a> {
    clock: &'a dyn Clock,
    start: f64,
    limit_secs: f64,
}

impl<'a> Deadline<'a> {
    pub fn new(clock: &'a dyn Clock, limit_secs: f64) -> Self {
        Deadline { clock, start: clock.now_secs(), limit_secs }
    }

    pub fn elapsed(&self) -> f64 {
        self.clock.now_secs() - self.start
    }

    pub fn expired(&self) -> bool {
        self.elapsed() >= self.limit_secs
    }
}

impl core::fmt::Debug for Deadline<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Deadline").field("limit_secs", &self.limit_secs).finish()
    }
}
