use crate::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Sparse linear expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, v: VarId, coef: f64) -> Self {
        self.add_term(v, coef);
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut e = LinExpr::new();
        e.add_expr(self, s);
        e
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        let mut e = self.clone();
        e.add_expr(other, -1.0);
        e
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| c * values[v.0])
            .sum::<f64>()
            + self.constant
    }

    /// Merge duplicate variables and drop zeros; terms end up sorted by id.
    pub(crate) fn compacted(&self) -> Vec<(usize, f64)> {
        let mut t: Vec<(usize, f64)> = self.terms.iter().map(|&(v, c)| (v.0, c)).collect();
        t.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (v, c) in t {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization MILP over continuous and binary variables.
#[derive(Debug, Clone, Default)]
pub struct MilpProblem {
    pub name: String,
    pub vars: Vec<Variable>,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
    pub time_limit: Option<std::time::Duration>,
    /// Relative gap at which the search stops with `Optimal`.
    pub mip_gap: Option<f64>,
    /// Deterministic cap on explored nodes.
    pub node_limit: Option<usize>,
    /// Optional warm start: a full assignment whose binaries seed an incumbent.
    pub start: Option<Vec<f64>>,
}

impl MilpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        MilpProblem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = expr;
    }

    /// Adds `expr (sense) rhs`; the expression's constant is moved to the rhs.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            rhs: rhs - expr.constant,
            expr: LinExpr {
                terms: expr.terms,
                constant: 0.0,
            },
            sense,
        });
    }

    /// Introduces `t >= |expr|`.
    ///
    /// Only valid when `t` is minimized (directly or through a positive
    /// objective coefficient); maximizing `t` would leave it unbounded above.
    pub fn add_abs(&mut self, name: impl Into<String>, expr: &LinExpr) -> VarId {
        let name = name.into();
        let t = self.add_continuous(name.clone(), 0.0, f64::INFINITY);
        // t - expr >= 0, t + expr >= 0
        self.add_constraint(
            format!("{name}_pos"),
            LinExpr::var(t).sub(expr),
            Sense::Ge,
            0.0,
        );
        let mut neg = LinExpr::var(t);
        neg.add_expr(expr, 1.0);
        self.add_constraint(format!("{name}_neg"), neg, Sense::Ge, 0.0);
        t
    }

    /// Introduces binary `z = u * v` for binaries `u`, `v`.
    pub fn add_binary_product(&mut self, name: impl Into<String>, u: VarId, v: VarId) -> VarId {
        let name = name.into();
        let z = self.add_binary(name.clone());
        self.add_constraint(
            format!("{name}_le_u"),
            LinExpr::var(z).term(u, -1.0),
            Sense::Le,
            0.0,
        );
        self.add_constraint(
            format!("{name}_le_v"),
            LinExpr::var(z).term(v, -1.0),
            Sense::Le,
            0.0,
        );
        self.add_constraint(
            format!("{name}_ge"),
            LinExpr::var(z).term(u, -1.0).term(v, -1.0),
            Sense::Ge,
            -1.0,
        );
        z
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(MilpError::NonFinite(v.name.clone()));
            }
            if v.lower > v.upper {
                return Err(MilpError::EmptyDomain {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        let check_expr = |row: &str, e: &LinExpr| -> Result<(), MilpError> {
            for &(v, c) in &e.terms {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::UnknownVariable {
                        row: row.to_string(),
                        var: v.0,
                    });
                }
                if !c.is_finite() {
                    return Err(MilpError::NonFinite(self.vars[v.0].name.clone()));
                }
            }
            Ok(())
        };
        check_expr("objective", &self.objective)?;
        for c in &self.constraints {
            check_expr(&c.name, &c.expr)?;
            if !c.rhs.is_finite() {
                return Err(MilpError::NonFinite(c.name.clone()));
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of `values` (binaries also checked for
    /// integrality).
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            let lhs = c.expr.eval(values);
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compacted_merges_duplicates() {
        let mut p = MilpProblem::new("t");
        let x = p.add_continuous("x", 0.0, 1.0);
        let y = p.add_continuous("y", 0.0, 1.0);
        let e = LinExpr::var(y).term(x, 2.0).term(y, -1.0).term(x, 1.0);
        assert_eq!(e.compacted(), vec![(0, 3.0)]);
    }

    #[test]
    fn constant_moves_to_rhs() {
        let mut p = MilpProblem::new("t");
        let x = p.add_continuous("x", 0.0, 1.0);
        p.add_constraint("c", LinExpr::var(x).plus(2.0), Sense::Le, 5.0);
        assert_eq!(p.constraints[0].rhs, 3.0);
    }

    #[test]
    fn validation_catches_unknown_variable() {
        let mut p = MilpProblem::new("t");
        p.add_constraint("c", LinExpr::var(VarId(4)), Sense::Le, 1.0);
        assert!(matches!(
            p.validate(),
            Err(MilpError::UnknownVariable { .. })
        ));
    }
}
