use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Self {
        VarId(i as u32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// `Σ c_i x_i + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: alloc::vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, v: VarId, c: f64) {
        self.terms.push((v, c));
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.index()]).sum::<f64>()
    }

    /// Merges repeated variables and drops zero coefficients; the result is
    /// sorted by variable.
    pub fn normalized(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        LinExpr { terms: out, constant: self.constant }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `Σ terms  cmp  rhs`, terms normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.index()]).sum()
    }

    /// Amount by which `x` violates the constraint, `0` if satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.cmp {
            Cmp::Le => (a - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - a).max(0.0),
            Cmp::Eq => libm::fabs(a - self.rhs),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ObjSense {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    EmptyDomain { name: String, lower: f64, upper: f64 },
    #[error("constraint `{constraint}` references undeclared variable {var}")]
    UndeclaredVariable { constraint: String, var: usize },
    #[error("binary variable `{0}` must have bounds within [0,1]")]
    BinaryBounds(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
}

/// Solver-agnostic mixed-integer linear model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    pub sense: ObjSense,
    /// Every feasible objective value is known to be an integer multiple
    /// of this step (plus the objective constant). Used for pruning.
    pub objective_step: Option<f64>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel { name: name.into(), ..MilpModel::default() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.vars.push(Variable { name: name.into(), kind, lower, upper });
        VarId::from_index(self.vars.len() - 1)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Integer, lower, upper)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    /// Adds `expr cmp rhs`; the expression's constant is moved to the
    /// right-hand side.
    pub fn add_constraint(&mut self, name: impl Into<String>, expr: LinExpr, cmp: Cmp, rhs: f64) -> usize {
        let expr = expr.normalized();
        self.constraints.push(Constraint { name: name.into(), terms: expr.terms, cmp, rhs: rhs - expr.constant });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, sense: ObjSense, objective: LinExpr) {
        self.sense = sense;
        self.objective = objective.normalized();
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.index()]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Checks that every reference is declared and every number finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        for v in &self.vars {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(ModelError::EmptyDomain { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
        }
        for c in &self.constraints {
            for &(v, a) in &c.terms {
                if v.index() >= self.vars.len() {
                    return Err(ModelError::UndeclaredVariable { constraint: c.name.clone(), var: v.index() });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(c.name.clone()));
                }
            }
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
        }
        for &(v, a) in &self.objective.terms {
            if v.index() >= self.vars.len() {
                return Err(ModelError::UndeclaredVariable { constraint: "objective".into(), var: v.index() });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite("objective".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_constant_moves_to_rhs() {
        let mut m = MilpModel::new("t");
        let x = m.binary("x");
        let y = m.binary("y");
        let i = m.add_constraint("c", LinExpr::var(x).term(y, 2.0).term(x, 1.0).plus(3.0), Cmp::Le, 4.0);
        let c = &m.constraints[i];
        assert_eq!(c.terms, alloc::vec![(x, 2.0), (y, 2.0)]);
        assert_eq!(c.rhs, 1.0);
        assert_eq!(c.violation(&[1.0, 0.0]), 1.0);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn binaries_are_clamped_to_unit_box() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", VarKind::Binary, -3.0, 7.0);
        assert_eq!((m.var(x).lower, m.var(x).upper), (0.0, 1.0));
    }

    #[test]
    fn validation_catches_bad_references() {
        let mut m = MilpModel::new("t");
        m.constraints.push(Constraint { name: "c".into(), terms: alloc::vec![(VarId::from_index(4), 1.0)], cmp: Cmp::Eq, rhs: 0.0 });
        assert!(matches!(m.validate(), Err(ModelError::UndeclaredVariable { var: 4, .. })));
        let mut m = MilpModel::new("t");
        m.continuous("x", 2.0, 1.0);
        assert!(matches!(m.validate(), Err(ModelError::EmptyDomain { .. })));
    }
}
