use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::MitlError;
use crate::Time;

pub type LabelSet = BTreeSet<String>;

static NO_LABELS: LabelSet = BTreeSet::new();

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordEntry {
    pub labels: LabelSet,
    pub time: Time,
}

impl WordEntry {
    pub fn new<I, S>(labels: I, time: Time) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        WordEntry { labels: labels.into_iter().map(Into::into).collect(), time }
    }
}

/// Finite timed word with label persistence.
///
/// Entry `i`'s labels hold on `[t_i, t_{i+1})`; the last entry's labels hold
/// up to and including `horizon`. The word is defined on
/// `[-prehistory, horizon]`; points before the first entry carry no labels,
/// which is how the fictive negative time steps of the right-robustness
/// encoding are represented.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedWord {
    entries: Vec<WordEntry>,
    horizon: Time,
    prehistory: Time,
}

impl TimedWord {
    pub fn new(entries: Vec<WordEntry>, horizon: Time) -> Result<Self, MitlError> {
        let first = entries.first().ok_or(MitlError::EmptyWord)?;
        if first.time < 0 {
            return Err(MitlError::NonMonotoneWord { index: 0 });
        }
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[1].time <= pair[0].time {
                return Err(MitlError::NonMonotoneWord { index: i + 1 });
            }
        }
        let last = entries[entries.len() - 1].time;
        if horizon < last {
            return Err(MitlError::HorizonBeforeLastEntry { horizon, last });
        }
        Ok(TimedWord { entries, horizon, prehistory: 0 })
    }

    /// Extends the defined domain `k` steps into negative time with empty
    /// label sets.
    pub fn with_prehistory(mut self, k: Time) -> Self {
        self.prehistory = k.max(0);
        self
    }

    pub fn entries(&self) -> &[WordEntry] {
        &self.entries
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn prehistory(&self) -> Time {
        self.prehistory
    }

    /// First time point of the defined domain.
    pub fn start(&self) -> Time {
        -self.prehistory
    }

    pub fn contains_time(&self, t: Time) -> bool {
        t >= self.start() && t <= self.horizon
    }

    pub fn labels_at(&self, t: Time) -> Result<&LabelSet, MitlError> {
        if !self.contains_time(t) {
            return Err(MitlError::OutOfHorizon { t, start: self.start(), horizon: self.horizon });
        }
        // index of the last entry with time <= t
        let idx = self.entries.partition_point(|e| e.time <= t);
        Ok(if idx == 0 { &NO_LABELS } else { &self.entries[idx - 1].labels })
    }

    pub fn holds(&self, atom: &str, t: Time) -> Result<bool, MitlError> {
        Ok(self.labels_at(t)?.contains(atom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn labels_persist_between_samples() {
        let w = example1();
        assert!(w.holds("exit", 1).unwrap());
        assert!(w.holds("exit", 2).unwrap());
        assert!(!w.holds("exit", 3).unwrap());
        assert!(w.holds("lab", 4).unwrap());
        assert!(!w.holds("lab", 5).unwrap());
        assert!(w.holds("off1", 12).unwrap());
    }

    #[test]
    fn queries_outside_domain_fail() {
        let w = example1();
        assert!(matches!(w.labels_at(13), Err(MitlError::OutOfHorizon { .. })));
        assert!(w.labels_at(-1).is_err());
        let w = w.with_prehistory(3);
        assert!(w.labels_at(-3).unwrap().is_empty());
        assert!(w.labels_at(-4).is_err());
    }

    #[test]
    fn rejects_malformed_words() {
        assert_eq!(TimedWord::new(vec![], 3), Err(MitlError::EmptyWord));
        let none: [&str; 0] = [];
        let e = TimedWord::new(vec![WordEntry::new(none, 1), WordEntry::new(none, 1)], 4);
        assert_eq!(e, Err(MitlError::NonMonotoneWord { index: 1 }));
        let e = TimedWord::new(vec![WordEntry::new(none, 5)], 4);
        assert!(matches!(e, Err(MitlError::HorizonBeforeLastEntry { .. })));
    }
}
