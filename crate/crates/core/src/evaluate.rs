//! Method comparison tables over a corpus.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feasibility::FeasibleSet;
use crate::io::{csv_writer, fmt_float};
use crate::optimizer::{baseline, convex_feasible, optimal_capacity_exact, optimal_fixed_prior, Method, RowStrategy};
use crate::qif::{capacity, leakage, posterior_value, Adversary, Channel, Prior};
use crate::seb::capacity_optimal_sdist;

/// Builds the row of `method`; `None` when the method has no answer
/// (an empty convex-hull intersection).
pub fn row_for(
    method: &Method,
    channel: &Channel,
    s: usize,
    prior: Option<&Prior>,
    feasible: &FeasibleSet,
) -> Result<Option<RowStrategy>> {
    match method {
        Method::OptimalFixedPrior(adv) => {
            let prior = prior.ok_or_else(|| Error::MissingInput("the fixed-prior optimum requires a prior".into()))?;
            optimal_fixed_prior(prior, channel, s, feasible, adv).map(Some)
        }
        Method::OptimalCapacityExact => optimal_capacity_exact(channel, s, feasible).map(Some),
        Method::ConvexFeasible => convex_feasible(channel, s, feasible),
        Method::Baseline(b) => baseline(*b, channel, s, prior, feasible).map(Some),
        Method::Seb(m) => capacity_optimal_sdist(channel, s, feasible, *m).map(Some),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageRow {
    pub method: String,
    pub prior: String,
    pub leakage: f64,
    pub posterior_vulnerability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub method: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultsTable {
    Leakage(Vec<LeakageRow>),
    Capacity(Vec<CapacityRow>),
}

pub enum EvalMode<'a> {
    /// Leakage and posterior vulnerability under each named prior.
    FixedPrior {
        adversary: &'a Adversary,
        priors: &'a [(String, Prior)],
    },
    /// Capacity of the defended channel for the adversary.
    Capacity { adversary: &'a Adversary },
}

/// Runs `f` over `0..n` on at most `jobs` threads, keeping index order.
pub(crate) fn run_cells<T, F>(jobs: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if jobs <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Evaluates every method, skipping methods without an answer.
pub fn evaluate(
    channel: &Channel,
    s: usize,
    feasible: &FeasibleSet,
    methods: &[Method],
    mode: EvalMode<'_>,
    jobs: usize,
) -> Result<ResultsTable> {
    channel.check_secret(s)?;
    match mode {
        EvalMode::FixedPrior { adversary, priors } => {
            if priors.is_empty() {
                return Err(Error::MissingInput("fixed-prior evaluation requires a prior".into()));
            }
            let cells = run_cells(jobs, methods.len() * priors.len(), |k| {
                let method = &methods[k / priors.len()];
                let (name, prior) = &priors[k % priors.len()];
                let Some(row) = row_for(method, channel, s, Some(prior), feasible)? else {
                    return Ok(None);
                };
                let defended = channel.with_row(s, &row.q)?;
                Ok(Some(LeakageRow {
                    method: method.to_string(),
                    prior: name.clone(),
                    leakage: leakage(prior, &defended, adversary)?,
                    posterior_vulnerability: posterior_value(prior, &defended, &Adversary {
                        kind: adversary.kind.clone(),
                        mode: crate::qif::Mode::Gain,
                    })?,
                }))
            })?;
            Ok(ResultsTable::Leakage(cells.into_iter().flatten().collect()))
        }
        EvalMode::Capacity { adversary } => {
            let cells = run_cells(jobs, methods.len(), |k| {
                let method = &methods[k];
                let Some(row) = row_for(method, channel, s, None, feasible)? else {
                    return Ok(None);
                };
                let defended = channel.with_row(s, &row.q)?;
                Ok(Some(CapacityRow {
                    method: method.to_string(),
                    capacity: capacity(&defended, adversary)?.value,
                }))
            })?;
            Ok(ResultsTable::Capacity(cells.into_iter().flatten().collect()))
        }
    }
}

pub fn save_results(path: &Path, table: &ResultsTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res = (|| {
        match table {
            ResultsTable::Leakage(rows) => {
                w.write_record(["method", "prior", "leakage", "posterior_vulnerability"])?;
                for r in rows {
                    w.write_record([
                        r.method.as_str(),
                        r.prior.as_str(),
                        &fmt_float(r.leakage),
                        &fmt_float(r.posterior_vulnerability),
                    ])?;
                }
            }
            ResultsTable::Capacity(rows) => {
                w.write_record(["method", "capacity"])?;
                for r in rows {
                    w.write_record([r.method.as_str(), &fmt_float(r.capacity)])?;
                }
            }
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    res.map_err(|e| Error::io(path, e))
}
