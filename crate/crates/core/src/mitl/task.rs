use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use super::{Formula, MitlError};

/// Exact weighted robustness `Σ_i η_i · p_i`; unlike a priority it may be
/// negative.
pub type Score = Ratio<i64>;

pub fn score_to_f64(s: &Score) -> f64 {
    s.to_f64().unwrap_or(f64::NAN)
}

/// Nonnegative rational task priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Priority(Ratio<i64>);

impl Priority {
    pub fn new(numer: i64, denom: i64) -> Result<Self, MitlError> {
        if denom == 0 {
            return Err(MitlError::BadPriority);
        }
        let r = Ratio::new(numer, denom);
        if r < Ratio::zero() {
            return Err(MitlError::BadPriority);
        }
        Ok(Priority(r))
    }

    pub fn integer(v: i64) -> Result<Self, MitlError> {
        Priority::new(v, 1)
    }

    pub fn zero() -> Self {
        Priority(Ratio::zero())
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Parses `"3"`, `"0.25"` or `"3/4"`.
    pub fn parse(text: &str) -> Result<Self, MitlError> {
        let s = text.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| MitlError::BadPriority)?;
            let d: i64 = d.trim().parse().map_err(|_| MitlError::BadPriority)?;
            return Priority::new(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 12 {
                return Err(MitlError::BadPriority);
            }
            let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| MitlError::BadPriority)? };
            let f: i64 = frac.parse().map_err(|_| MitlError::BadPriority)?;
            let den = 10i64.pow(frac.len() as u32);
            let num = int.checked_mul(den).and_then(|v| v.checked_add(f)).ok_or(MitlError::BadPriority)?;
            return Priority::new(num, den);
        }
        let v: i64 = s.parse().map_err(|_| MitlError::BadPriority)?;
        Priority::integer(v)
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl core::ops::Add for Priority {
    type Output = Priority;
    fn add(self, rhs: Priority) -> Priority {
        Priority(self.0 + rhs.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub formula: Formula,
    pub priority: Priority,
}

/// Nonempty list of prioritized tasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSet {
    tasks: Vec<Task>,
}

impl TaskSet {
    pub fn new(tasks: Vec<Task>) -> Result<Self, MitlError> {
        if tasks.is_empty() {
            return Err(MitlError::NoTasks);
        }
        for t in &tasks {
            t.formula.validate()?;
        }
        Ok(TaskSet { tasks })
    }

    pub fn single(formula: Formula, priority: Priority) -> Self {
        TaskSet { tasks: alloc::vec![Task { formula, priority }] }
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Task> {
        self.tasks.iter()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    /// `||D||`: the maximum formula horizon.
    pub fn horizon(&self) -> crate::Time {
        self.tasks.iter().map(|t| t.formula.horizon()).max().unwrap_or(0)
    }

    pub fn total_priority(&self) -> Priority {
        self.tasks.iter().fold(Priority::zero(), |acc, t| acc + t.priority)
    }

    /// `Σ_i values[i] · p_i`, exact.
    pub fn weighted_sum(&self, values: &[i64]) -> Score {
        self.tasks
            .iter()
            .zip(values)
            .fold(Score::zero(), |acc, (t, &v)| acc + t.priority.0 * Ratio::from_integer(v))
    }

    /// Largest rational `g` such that every weighted sum of integer values is
    /// a multiple of `g`; `None` when all priorities are zero.
    pub fn objective_step(&self) -> Option<Ratio<i64>> {
        use num_integer_gcd as gcd;
        let mut num = 0i64;
        let mut den = 1i64;
        for t in &self.tasks {
            let r = t.priority.0;
            if r.is_zero() {
                continue;
            }
            num = gcd(num, *r.numer());
            den = den / gcd(den, *r.denom()) * *r.denom();
        }
        (num != 0).then(|| Ratio::new(num, den))
    }
}

fn num_integer_gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a Task;
    type IntoIter = core::slice::Iter<'a, Task>;
    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn priority_parsing() {
        assert_eq!(Priority::parse("2").unwrap(), Priority::integer(2).unwrap());
        assert_eq!(Priority::parse("0.25").unwrap(), Priority::new(1, 4).unwrap());
        assert_eq!(Priority::parse(" 3/6 ").unwrap(), Priority::new(1, 2).unwrap());
        assert!(Priority::parse("-1").is_err());
        assert!(Priority::parse("1/0").is_err());
        assert!(Priority::parse("x").is_err());
        assert_eq!(Priority::parse("1.5").unwrap().to_string(), "3/2");
    }

    #[test]
    fn empty_task_set_rejected() {
        assert_eq!(TaskSet::new(vec![]), Err(MitlError::NoTasks));
    }

    #[test]
    fn objective_step_is_rational_gcd() {
        let t = |p: Priority| Task { formula: Formula::True, priority: p };
        let ts = TaskSet::new(vec![t(Priority::new(1, 2).unwrap()), t(Priority::new(3, 4).unwrap())]).unwrap();
        assert_eq!(ts.objective_step(), Some(Ratio::new(1, 4)));
        let ts = TaskSet::new(vec![t(Priority::zero())]).unwrap();
        assert_eq!(ts.objective_step(), None);
        let ts = TaskSet::new(vec![t(Priority::integer(4).unwrap()), t(Priority::integer(6).unwrap())]).unwrap();
        assert_eq!(ts.objective_step(), Some(Ratio::from_integer(2)));
    }

    #[test]
    fn weighted_sum_is_linear() {
        let t = |p: i64| Task { formula: Formula::True, priority: Priority::integer(p).unwrap() };
        let ts = TaskSet::new(vec![t(1), t(1)]).unwrap();
        assert_eq!(ts.weighted_sum(&[3, -5]), Ratio::from_integer(-2));
        let ts = TaskSet::new(vec![t(0)]).unwrap();
        assert_eq!(ts.weighted_sum(&[7]), Ratio::from_integer(0));
    }
}
