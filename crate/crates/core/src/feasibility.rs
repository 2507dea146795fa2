//! Feasible sets for the designable row and the upward-only padding transport.
//!
//! Every feasible set implicitly contains simplex membership of `q`.
//! Non-negative padding of a base distribution `q̂` admits exactly the `q` with
//! `sum_{o<=k} q_o <= sum_{o<=k} q̂_o` for every prefix `k`; the optimizers use
//! that compact form, while [`padding_constraints`] emits the full transport
//! block.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_float};
use crate::lp::{self, LpProblem, Relation, VarId};
use crate::qif::check_distribution;
use crate::sampling::Discrete;

/// Tolerance for membership tests on returned rows.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Tolerance for the prefix-dominance test.
pub const PREFIX_TOL: f64 = 1e-9;

/// A linear constraint `coeffs . q (rel) rhs` over the designable row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowConstraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl RowConstraint {
    fn violation(&self, q: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(q).map(|(a, x)| a * x).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    FullSimplex,
    Linear(Vec<RowConstraint>),
    /// Distributions reachable from `base` by moving mass to larger observables.
    NonNegativePadding { base: Vec<f64> },
}

impl FeasibleSet {
    pub fn linear(constraints: Vec<RowConstraint>) -> Result<Self> {
        let m = constraints.first().map_or(0, |c| c.coeffs.len());
        for (k, c) in constraints.iter().enumerate() {
            if c.coeffs.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: c.coeffs.len(),
                });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidParameter(format!("constraint {k} has a non-finite coefficient")));
            }
        }
        Ok(FeasibleSet::Linear(constraints))
    }

    pub fn padding(base: Vec<f64>) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::EmptySet);
        }
        check_distribution("padding base", &base)?;
        Ok(FeasibleSet::NonNegativePadding { base })
    }

    /// Number of observables the set is defined over, when it fixes one.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            FeasibleSet::FullSimplex => None,
            FeasibleSet::Linear(cs) => cs.first().map(|c| c.coeffs.len()),
            FeasibleSet::NonNegativePadding { base } => Some(base.len()),
        }
    }

    pub fn check_dimension(&self, m: usize) -> Result<()> {
        match self.dimension() {
            Some(d) if d != m => Err(Error::LengthMismatch { expected: m, found: d }),
            _ => Ok(()),
        }
    }

    /// Declares the row variables `q_0..q_{m-1}` in `lp` together with the
    /// simplex and feasibility constraints, and returns them.
    pub fn emit(&self, lp: &mut LpProblem, m: usize) -> Result<Vec<VarId>> {
        self.check_dimension(m)?;
        let q: Vec<VarId> = (0..m).map(|o| lp.add_var(format!("q{o}"), 0.0, 1.0)).collect();
        lp.add_constraint(q.iter().map(|&v| (v, 1.0)), Relation::Eq, 1.0);
        match self {
            FeasibleSet::FullSimplex => {}
            FeasibleSet::Linear(cs) => {
                for c in cs {
                    lp.add_constraint(q.iter().copied().zip(c.coeffs.iter().copied()), c.relation, c.rhs);
                }
            }
            FeasibleSet::NonNegativePadding { base } => {
                // Running sums c_k = c_{k-1} + q_k keep the block linear in m.
                let mut base_prefix = 0.0;
                let mut prev: Option<VarId> = None;
                for (k, (&qk, &b)) in q.iter().zip(base).enumerate().take(m.saturating_sub(1)) {
                    base_prefix += b;
                    let ck = lp.add_var(format!("cum{k}"), 0.0, base_prefix.min(1.0));
                    let mut terms = vec![(ck, 1.0), (qk, -1.0)];
                    if let Some(p) = prev {
                        terms.push((p, -1.0));
                    }
                    lp.add_constraint(terms, Relation::Eq, 0.0);
                    prev = Some(ck);
                }
            }
        }
        Ok(q)
    }

    /// Largest violation of simplex membership or of the set's constraints.
    pub fn violation(&self, q: &[f64]) -> Result<f64> {
        self.check_dimension(q.len())?;
        let negative = q.iter().fold(0.0f64, |acc, &x| acc.max(-x));
        let sum = (q.iter().sum::<f64>() - 1.0).abs();
        let own = match self {
            FeasibleSet::FullSimplex => 0.0,
            FeasibleSet::Linear(cs) => cs.iter().map(|c| c.violation(q)).fold(0.0, f64::max),
            FeasibleSet::NonNegativePadding { base } => prefix_excess(base, q),
        };
        Ok(negative.max(sum).max(own))
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.violation(q).is_ok_and(|v| v <= MEMBERSHIP_TOL)
    }
}

fn prefix_excess(base: &[f64], q: &[f64]) -> f64 {
    let (mut bq, mut bb, mut worst) = (0.0, 0.0, 0.0f64);
    for (x, b) in q.iter().zip(base) {
        bq += x;
        bb += b;
        worst = worst.max(bq - bb);
    }
    worst
}

/// Whether `q` is reachable from `base` by moving mass upward only.
pub fn is_feasible_padding(base: &[f64], q: &[f64]) -> bool {
    base.len() == q.len() && prefix_excess(base, q) <= PREFIX_TOL
}

/// Variables of the transport matrix emitted by [`padding_constraints`];
/// `cell(o, o2)` exists only for `o <= o2`.
#[derive(Debug, Clone)]
pub struct TransportVars {
    m: usize,
    vars: Vec<VarId>,
}

impl TransportVars {
    pub fn cell(&self, o: usize, o2: usize) -> Option<VarId> {
        if o2 < o || o2 >= self.m {
            return None;
        }
        // Row r holds the m - r cells r..m.
        let row_start = o * self.m - o * o.saturating_sub(1) / 2;
        Some(self.vars[row_start + (o2 - o)])
    }
}

/// Adds the transport block linking the row variables `q` to `base`:
/// `T >= 0`, `T[o][o2] = 0` for `o > o2` (such cells are never created),
/// row sums equal `base` and column sums equal `q`.
pub fn padding_constraints(lp: &mut LpProblem, base: &[f64], q: &[VarId]) -> Result<TransportVars> {
    if base.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: q.len(),
            found: base.len(),
        });
    }
    let m = base.len();
    let mut vars = Vec::with_capacity(m * (m + 1) / 2);
    for o in 0..m {
        for o2 in o..m {
            vars.push(lp.add_nonneg_var(format!("t{o}_{o2}")));
        }
    }
    let t = TransportVars { m, vars };
    for o in 0..m {
        lp.add_constraint((o..m).map(|o2| (t.cell(o, o2).unwrap(), 1.0)), Relation::Eq, base[o]);
    }
    for o2 in 0..m {
        let terms = (0..=o2)
            .map(|o| (t.cell(o, o2).unwrap(), 1.0))
            .chain([(q[o2], -1.0)]);
        lp.add_constraint(terms, Relation::Eq, 0.0);
    }
    Ok(t)
}

/// Feasibility of the full transport system, for checking the prefix test.
pub fn padding_lp_feasible(base: &[f64], q: &[f64]) -> Result<bool> {
    let mut lp = LpProblem::new();
    let qv: Vec<VarId> = (0..q.len()).map(|o| lp.add_var(format!("q{o}"), q[o], q[o])).collect();
    padding_constraints(&mut lp, base, &qv)?;
    Ok(lp::solve(&lp)?.is_optimal())
}

/// The joint transport `T` between `base` and a target, and its row-normalized
/// sampling form.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddingStrategy {
    observables: Vec<u32>,
    transport: Vec<Vec<f64>>,
    samplers: Vec<Option<Discrete>>,
}

impl PaddingStrategy {
    pub fn observables(&self) -> &[u32] {
        &self.observables
    }

    /// Joint mass `T[o][o2]`: row sums give the base, column sums the target.
    pub fn transport(&self) -> &[Vec<f64>] {
        &self.transport
    }

    /// Padding distribution for requested index `o`, or `None` if `o` has no base mass.
    pub fn row(&self, o: usize) -> Option<Vec<f64>> {
        let total: f64 = self.transport[o].iter().sum();
        (total > 0.0).then(|| self.transport[o].iter().map(|t| t / total).collect())
    }

    pub fn target(&self) -> Vec<f64> {
        let m = self.observables.len();
        (0..m).map(|o2| (0..m).map(|o| self.transport[o][o2]).sum()).collect()
    }

    /// Draws the padded index for requested index `o`. Indices without base
    /// mass are passed through unchanged.
    pub fn pad<R: Rng + ?Sized>(&self, o: usize, rng: &mut R) -> usize {
        match &self.samplers[o] {
            Some(d) => d.sample(rng),
            None => o,
        }
    }

    /// Writes `size_in,size_out,probability` with rows normalized.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let res = (|| {
            w.write_record(["size_in", "size_out", "probability"])?;
            for o in 0..self.observables.len() {
                let Some(row) = self.row(o) else { continue };
                for (o2, p) in row.iter().enumerate() {
                    if *p > 0.0 {
                        w.write_record([
                            self.observables[o].to_string(),
                            self.observables[o2].to_string(),
                            fmt_float(*p),
                        ])?;
                    }
                }
            }
            w.flush()?;
            Ok::<_, csv::Error>(())
        })();
        res.map_err(|e| Error::io(path, e))
    }
}

/// Finds an upward transport from `base` to `q` moving the least total mass.
pub fn extract_strategy(observables: &[u32], base: &[f64], q: &[f64]) -> Result<PaddingStrategy> {
    let m = base.len();
    if q.len() != m || observables.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: if q.len() != m { q.len() } else { observables.len() },
        });
    }
    check_distribution("padding base", base)?;
    check_distribution("padding target", q)?;
    if !is_feasible_padding(base, q) {
        return Err(Error::Infeasible);
    }
    let mut lp = LpProblem::new();
    let qv: Vec<VarId> = (0..m).map(|o| lp.add_var(format!("q{o}"), q[o], q[o])).collect();
    let t = padding_constraints(&mut lp, base, &qv)?;
    for o in 0..m {
        for o2 in o + 1..m {
            lp.set_objective(t.cell(o, o2).unwrap(), 1.0);
        }
    }
    let sol = lp::solve(&lp)?.into_optimal()?;
    let mut transport = vec![vec![0.0; m]; m];
    for o in 0..m {
        for o2 in o..m {
            transport[o][o2] = sol.value(t.cell(o, o2).unwrap()).max(0.0);
        }
    }
    let samplers = transport
        .iter()
        .zip(base)
        .map(|(row, &b)| if b > 0.0 { Discrete::new(row) } else { None })
        .collect();
    Ok(PaddingStrategy {
        observables: observables.to_vec(),
        transport,
        samplers,
    })
}
