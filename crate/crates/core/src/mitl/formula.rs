use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::MitlError;
use crate::Time;

/// Closed integer interval `[lo, hi]` attached to a temporal operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    lo: u32,
    hi: u32,
}

impl Interval {
    pub fn new(lo: u32, hi: u32) -> Result<Self, MitlError> {
        if lo > hi {
            return Err(MitlError::BadInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }
}

/// Bounded-interval MITL formula.
///
/// Build through the checked constructors ([`Formula::and`], [`Formula::or`],
/// ...) or the parser; both enforce the arity invariants. Pattern matching
/// on the variants is fine for consumers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Globally(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: Formula) -> Self {
        Formula::Not(Box::new(child))
    }

    pub fn and(children: Vec<Formula>) -> Result<Self, MitlError> {
        if children.len() < 2 {
            return Err(MitlError::Arity { op: "and", got: children.len() });
        }
        Ok(Formula::And(children))
    }

    pub fn or(children: Vec<Formula>) -> Result<Self, MitlError> {
        if children.len() < 2 {
            return Err(MitlError::Arity { op: "or", got: children.len() });
        }
        Ok(Formula::Or(children))
    }

    pub fn globally(lo: u32, hi: u32, child: Formula) -> Result<Self, MitlError> {
        Ok(Formula::Globally(Interval::new(lo, hi)?, Box::new(child)))
    }

    pub fn eventually(lo: u32, hi: u32, child: Formula) -> Result<Self, MitlError> {
        Ok(Formula::Eventually(Interval::new(lo, hi)?, Box::new(child)))
    }

    pub fn until(lo: u32, hi: u32, lhs: Formula, rhs: Formula) -> Result<Self, MitlError> {
        Ok(Formula::Until(Interval::new(lo, hi)?, Box::new(lhs), Box::new(rhs)))
    }

    /// Checks the structural invariants recursively. Values built with the
    /// checked constructors always pass; hand-built enum values may not.
    pub fn validate(&self) -> Result<(), MitlError> {
        match self {
            Formula::True | Formula::Atom(_) => Ok(()),
            Formula::Not(c) => c.validate(),
            Formula::And(cs) | Formula::Or(cs) => {
                if cs.len() < 2 {
                    let op = if matches!(self, Formula::And(_)) { "and" } else { "or" };
                    return Err(MitlError::Arity { op, got: cs.len() });
                }
                cs.iter().try_for_each(Formula::validate)
            }
            Formula::Globally(i, c) | Formula::Eventually(i, c) => {
                Interval::new(i.lo, i.hi)?;
                c.validate()
            }
            Formula::Until(i, l, r) => {
                Interval::new(i.lo, i.hi)?;
                l.validate()?;
                r.validate()
            }
        }
    }

    /// Largest time offset any subformula evaluation can reach from `t = 0`.
    pub fn horizon(&self) -> Time {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(c) => c.horizon(),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().map(Formula::horizon).max().unwrap_or(0),
            Formula::Globally(i, c) | Formula::Eventually(i, c) => i.hi as Time + c.horizon(),
            Formula::Until(i, l, r) => i.hi as Time + l.horizon().max(r.horizon()),
        }
    }

    /// Nesting depth; atoms and `True` have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(c) | Formula::Globally(_, c) | Formula::Eventually(_, c) => 1 + c.depth(),
            Formula::And(cs) | Formula::Or(cs) => 1 + cs.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Until(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Number of nodes in the syntax tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 1,
            Formula::Not(c) | Formula::Globally(_, c) | Formula::Eventually(_, c) => 1 + c.size(),
            Formula::And(cs) | Formula::Or(cs) => 1 + cs.iter().map(Formula::size).sum::<usize>(),
            Formula::Until(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    /// Atom names in first-occurrence order, without duplicates.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => {
                if !out.contains(&a.as_str()) {
                    out.push(a);
                }
            }
            Formula::Not(c) | Formula::Globally(_, c) | Formula::Eventually(_, c) => c.collect_atoms(out),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            Formula::Until(_, l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_of_atom_is_zero() {
        assert_eq!(Formula::atom("x").horizon(), 0);
    }

    #[test]
    fn horizon_sums_nested_upper_bounds() {
        let f = Formula::eventually(2, 5, Formula::globally(0, 3, Formula::atom("x")).unwrap()).unwrap();
        assert_eq!(f.horizon(), 8);
    }

    #[test]
    fn until_horizon_is_upper_bound_for_atomic_children() {
        let f = Formula::until(1, 4, Formula::atom("a"), Formula::atom("b")).unwrap();
        assert_eq!(f.horizon(), 4);
    }

    #[test]
    fn interval_rejects_inverted_bounds() {
        assert!(matches!(Interval::new(3, 2), Err(MitlError::BadInterval { lo: 3, hi: 2 })));
        assert!(Interval::new(2, 2).is_ok());
    }

    #[test]
    fn boolean_arity_enforced() {
        assert!(Formula::and(alloc::vec![Formula::True]).is_err());
        assert!(Formula::or(alloc::vec![]).is_err());
        let bad = Formula::And(alloc::vec![Formula::True]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn atoms_are_deduplicated_in_order() {
        let f = Formula::or(alloc::vec![
            Formula::atom("b"),
            Formula::until(0, 1, Formula::atom("a"), Formula::atom("b")).unwrap(),
        ])
        .unwrap();
        assert_eq!(f.atoms(), alloc::vec!["b", "a"]);
        assert_eq!(f.depth(), 2);
        assert_eq!(f.size(), 5);
    }
}
