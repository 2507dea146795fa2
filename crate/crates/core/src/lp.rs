//! Linear programs and a certified solver front end.
//!
//! Problems are stated in a small solver-independent form and handed to HiGHS
//! (dual simplex, single thread). Every returned assignment is substituted back
//! into the constraints and bounds; anything violating them by more than
//! [`FEASIBILITY_TOL`] is reported as [`LpStatus::NumericalFailure`] instead of
//! `Optimal`.

use std::fmt;
use std::io::{self, Write};

use highs::{HighsModelStatus, RowProblem, Sense};

use crate::error::{Error, Result};

/// Maximum constraint violation accepted for an `Optimal` answer.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Tolerances handed to the backend; tighter than the certification threshold.
const BACKEND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization problem over named real variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    vars: Vec<Variable>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable with bounds `lower <= x <= upper`; either side may be infinite.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn add_nonneg_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY)
    }

    pub fn add_free_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            terms: terms.into_iter().collect(),
            relation,
            rhs,
        });
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::MalformedLp(format!("variable {i} has bounds [{}, {}]", v.lower, v.upper)));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::MalformedLp(format!("variable {i} has an empty domain")));
            }
            if !self.objective[i].is_finite() {
                return Err(Error::MalformedLp(format!("objective coefficient of variable {i} is not finite")));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::MalformedLp(format!("constraint {k} has a non-finite right-hand side")));
            }
            for &(v, coeff) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(Error::MalformedLp(format!("constraint {k} references undeclared variable {}", v.0)));
                }
                if !coeff.is_finite() {
                    return Err(Error::MalformedLp(format!("constraint {k} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    fn objective_at(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any bound or constraint by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Writes the problem in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let names = self.lp_names();
        writeln!(out, "\\ {} variables, {} constraints", self.n_vars(), self.n_constraints())?;
        writeln!(out, "Minimize")?;
        write!(out, " obj:")?;
        let mut any = false;
        for (i, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(out, " {} {:?} {}", if c < 0.0 { '-' } else { '+' }, c.abs(), names[i])?;
                any = true;
            }
        }
        if !any {
            write!(out, " 0 {}", names.first().map_or("x", String::as_str))?;
        }
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for (k, c) in self.constraints.iter().enumerate() {
            write!(out, " c{k}:")?;
            if c.terms.is_empty() {
                write!(out, " 0 {}", names.first().map_or("x", String::as_str))?;
            }
            for &(v, coeff) in &c.terms {
                write!(out, " {} {:?} {}", if coeff < 0.0 { '-' } else { '+' }, coeff.abs(), names[v.0])?;
            }
            writeln!(out, " {} {:?}", c.relation, c.rhs)?;
        }
        writeln!(out, "Bounds")?;
        for (v, name) in self.vars.iter().zip(&names) {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => writeln!(out, " {name} free")?,
                (true, false) => writeln!(out, " {name} >= {:?}", v.lower)?,
                (false, true) => writeln!(out, " -inf <= {name} <= {:?}", v.upper)?,
                (true, true) => writeln!(out, " {:?} <= {name} <= {:?}", v.lower, v.upper)?,
            }
        }
        writeln!(out, "End")
    }

    fn lp_names(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.vars
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut name: String = v
                    .name
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                    .collect();
                if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
                    name.insert(0, 'x');
                }
                if !seen.insert(name.clone()) {
                    name = format!("{name}_{i}");
                    seen.insert(name.clone());
                }
                name
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values, indexed by [`VarId`]; empty unless `Optimal`.
    pub values: Vec<f64>,
    /// Objective recomputed from `values`.
    pub objective_value: f64,
    /// Largest bound or constraint violation of `values`.
    pub max_violation: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            values: Vec::new(),
            objective_value: f64::NAN,
            max_violation: f64::NAN,
        }
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Converts non-optimal statuses into errors.
    pub fn into_optimal(self) -> Result<LpSolution> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::Unbounded => Err(Error::Unbounded),
            LpStatus::NumericalFailure => Err(Error::Numerical(format!(
                "no certified optimum (max violation {:e})",
                self.max_violation
            ))),
        }
    }
}

enum Backend {
    Solved(Vec<f64>),
    Status(LpStatus),
}

fn run_backend(problem: &LpProblem, presolve: bool, with_objective: bool) -> Backend {
    let mut rows = RowProblem::default();
    let cols: Vec<_> = problem
        .vars
        .iter()
        .zip(&problem.objective)
        .map(|(v, &c)| rows.add_column(if with_objective { c } else { 0.0 }, v.lower..=v.upper))
        .collect();
    for c in &problem.constraints {
        let terms: Vec<_> = c.terms.iter().map(|&(v, coeff)| (cols[v.0], coeff)).collect();
        match c.relation {
            Relation::Le => rows.add_row(f64::NEG_INFINITY..=c.rhs, terms),
            Relation::Ge => rows.add_row(c.rhs..=f64::INFINITY, terms),
            Relation::Eq => rows.add_row(c.rhs..=c.rhs, terms),
        }
    }
    let mut model = rows.optimise(Sense::Minimise);
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("solver", "simplex");
    model.set_option("presolve", if presolve { "on" } else { "off" });
    model.set_option("primal_feasibility_tolerance", BACKEND_TOL);
    model.set_option("dual_feasibility_tolerance", BACKEND_TOL);
    let solved = match model.try_solve() {
        Ok(s) => s,
        Err(_) => return Backend::Status(LpStatus::NumericalFailure),
    };
    match solved.status() {
        HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => {
            Backend::Solved(solved.get_solution().columns().to_vec())
        }
        HighsModelStatus::Infeasible => Backend::Status(LpStatus::Infeasible),
        HighsModelStatus::Unbounded => Backend::Status(LpStatus::Unbounded),
        HighsModelStatus::UnboundedOrInfeasible => {
            // Disambiguate by checking feasibility alone.
            if with_objective {
                match run_backend(problem, presolve, false) {
                    Backend::Solved(_) => Backend::Status(LpStatus::Unbounded),
                    other => other,
                }
            } else {
                Backend::Status(LpStatus::Infeasible)
            }
        }
        _ => Backend::Status(LpStatus::NumericalFailure),
    }
}

/// Solves `problem`, certifying feasibility of any optimum returned.
///
/// Only malformed problems produce `Err`; solver outcomes are reported in
/// [`LpSolution::status`].
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    if problem.n_vars() == 0 {
        let violation = problem.max_violation(&[]);
        let status = if violation <= FEASIBILITY_TOL {
            LpStatus::Optimal
        } else {
            LpStatus::Infeasible
        };
        return Ok(LpSolution {
            status,
            values: Vec::new(),
            objective_value: 0.0,
            max_violation: violation,
        });
    }
    let mut worst = f64::NAN;
    for presolve in [true, false] {
        match run_backend(problem, presolve, true) {
            Backend::Solved(values) => {
                let violation = problem.max_violation(&values);
                if violation <= FEASIBILITY_TOL {
                    return Ok(LpSolution {
                        status: LpStatus::Optimal,
                        objective_value: problem.objective_at(&values),
                        values,
                        max_violation: violation,
                    });
                }
                worst = violation;
            }
            Backend::Status(LpStatus::NumericalFailure) => {}
            Backend::Status(status) => return Ok(LpSolution::without_point(status)),
        }
    }
    let mut failed = LpSolution::without_point(LpStatus::NumericalFailure);
    failed.max_violation = worst;
    Ok(failed)
}
