//! Choosing the designable row `q` of secret `s`.
//!
//! The LP routes minimize a posterior vulnerability (fixed prior) or the
//! exact-guessing capacity over the feasible set. Baselines are the simple
//! constructions used for comparison.

use std::fmt;

use crate::error::{Error, Result};
use crate::feasibility::FeasibleSet;
use crate::lp::{self, LpProblem, LpStatus, Relation};
use crate::predicate::average_other_row;
use crate::qif::{capacity, Adversary, AdversaryKind, Channel, Mode, Prior};
use crate::seb::{add_radius_constraints, project_to_feasible, SebMethod};

/// Target selection for the copy baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyRule {
    /// The other secret with the largest prior mass.
    MaxPrior,
    /// The other secret whose row, copied into `s`, gives the smallest capacity
    /// for the given criterion.
    MinCapacity(CapacityCriterion),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityCriterion {
    ExactGuess,
    SDistinguish,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    NoDefense,
    Average,
    WeightedAverage,
    Copy(CopyRule),
    /// Rounds every size up to the next multiple of the block.
    PadMultiple(u32),
}

pub const DEFAULT_PAD_BLOCK: u32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    OptimalFixedPrior(Adversary),
    OptimalCapacityExact,
    ConvexFeasible,
    Baseline(Baseline),
    Seb(SebMethod),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::OptimalFixedPrior(_) => f.write_str("optimal"),
            Method::OptimalCapacityExact => f.write_str("optimal-capacity"),
            Method::ConvexFeasible => f.write_str("convex-feasible"),
            Method::Baseline(b) => match b {
                Baseline::NoDefense => f.write_str("no-defense"),
                Baseline::Average => f.write_str("average"),
                Baseline::WeightedAverage => f.write_str("weighted-average"),
                Baseline::Copy(CopyRule::MaxPrior) => f.write_str("copy"),
                Baseline::Copy(CopyRule::MinCapacity(_)) => f.write_str("copy-min-capacity"),
                Baseline::PadMultiple(k) => write!(f, "pad-{k}"),
            },
            Method::Seb(SebMethod::ExactLp) => f.write_str("seb-exact"),
            Method::Seb(SebMethod::EmbeddingLp) => f.write_str("seb-embed"),
            Method::Seb(SebMethod::Approx(eps)) => write!(f, "seb-approx-{eps}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// The quantity the method minimized, when it minimized one.
    pub objective: Option<f64>,
    pub status: Option<LpStatus>,
    /// Whether the constructed row was L1-projected onto the feasible set.
    pub projected: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowStrategy {
    pub method: Method,
    pub q: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Clamps solver round-off below zero and renormalizes.
pub(crate) fn clean_row(mut q: Vec<f64>) -> Vec<f64> {
    for x in &mut q {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let sum: f64 = q.iter().sum();
    if sum > 0.0 {
        q.iter_mut().for_each(|x| *x /= sum);
    }
    q
}

fn optimal_status() -> Option<LpStatus> {
    Some(LpStatus::Optimal)
}

/// Minimizes the leakage of `adv` at the fixed prior over `q` in `feasible`.
///
/// Both modes share the minimizer, so the mode only affects the note.
/// The objective reported is the minimized posterior vulnerability.
pub fn optimal_fixed_prior(
    prior: &Prior,
    channel: &Channel,
    s: usize,
    feasible: &FeasibleSet,
    adv: &Adversary,
) -> Result<RowStrategy> {
    channel.check_secret(s)?;
    crate::qif::check_dims(prior, channel)?;
    let m = channel.n_observables();
    // Lower bound on z_o contributed by the other secrets.
    let floor: Vec<f64> = match &adv.kind {
        AdversaryKind::ExactGuess => (0..m)
            .map(|o| {
                (0..channel.n_secrets())
                    .filter(|&t| t != s)
                    .map(|t| prior.get(t) * channel.row(t)[o])
                    .fold(0.0, f64::max)
            })
            .collect(),
        AdversaryKind::SDistinguish(t) if *t == s => (0..m)
            .map(|o| {
                (0..channel.n_secrets())
                    .filter(|&t| t != s)
                    .map(|t| prior.get(t) * channel.row(t)[o])
                    .sum()
            })
            .collect(),
        AdversaryKind::SDistinguish(t) => {
            return Err(Error::UnsupportedAdversary(format!(
                "s-distinguishing secret {t} differs from the designable secret {s}"
            )))
        }
        AdversaryKind::PGuess(_) => {
            return Err(Error::UnsupportedAdversary(
                "fixed-prior optimization supports exact guessing and s-distinguishing".into(),
            ))
        }
    };

    let mut lp = LpProblem::new();
    let q = feasible.emit(&mut lp, m)?;
    for o in 0..m {
        let z = lp.add_var(format!("z{o}"), floor[o], f64::INFINITY);
        lp.set_objective(z, 1.0);
        lp.add_constraint([(z, 1.0), (q[o], -prior.get(s))], Relation::Ge, 0.0);
    }
    let sol = lp::solve(&lp)?.into_optimal()?;
    let row = clean_row(q.iter().map(|&v| sol.value(v)).collect());
    let note = match adv.mode {
        Mode::Gain => None,
        Mode::Loss => Some("loss mode shares the gain-mode minimizer".to_string()),
    };
    Ok(RowStrategy {
        method: Method::OptimalFixedPrior(adv.clone()),
        q: row,
        diagnostics: Diagnostics {
            objective: Some(sol.objective_value),
            status: optimal_status(),
            projected: false,
            note,
        },
    })
}

/// Allowed excess over the optimal gain capacity in the tie-breaking stage.
const CAPACITY_SLACK: f64 = 1e-9;

/// Minimizes the exact-guessing gain capacity (sum of column maxima) over `q`.
///
/// The optimum is rarely unique. Among optimal rows, a second stage picks one
/// closest in the worst case to the other rows, which keeps the diameter and
/// hence the loss capacity as small as the gain optimum allows.
pub fn optimal_capacity_exact(channel: &Channel, s: usize, feasible: &FeasibleSet) -> Result<RowStrategy> {
    channel.check_secret(s)?;
    let m = channel.n_observables();
    let mut lp = LpProblem::new();
    let q = feasible.emit(&mut lp, m)?;
    let mut zs = Vec::with_capacity(m);
    for o in 0..m {
        let floor = (0..channel.n_secrets())
            .filter(|&t| t != s)
            .map(|t| channel.row(t)[o])
            .fold(0.0, f64::max);
        let z = lp.add_var(format!("z{o}"), floor, f64::INFINITY);
        lp.set_objective(z, 1.0);
        lp.add_constraint([(z, 1.0), (q[o], -1.0)], Relation::Ge, 0.0);
        zs.push(z);
    }
    let first = lp::solve(&lp)?.into_optimal()?;
    let optimum = first.objective_value;

    for &z in &zs {
        lp.set_objective(z, 0.0);
    }
    lp.add_constraint(zs.iter().map(|&z| (z, 1.0)), Relation::Le, optimum + CAPACITY_SLACK);
    let others = channel.other_rows(s);
    let radius = add_radius_constraints(&mut lp, &q, &others);
    lp.set_objective(radius, 1.0);
    let second = lp::solve(&lp)?;
    let (sol, note) = if second.is_optimal() {
        (second, None)
    } else {
        (first, Some("tie-breaking stage failed; first-stage optimum kept".to_string()))
    };
    Ok(RowStrategy {
        method: Method::OptimalCapacityExact,
        q: clean_row(q.iter().map(|&v| sol.value(v)).collect()),
        diagnostics: Diagnostics {
            objective: Some(optimum),
            status: optimal_status(),
            note,
            ..Diagnostics::default()
        },
    })
}

/// Some `q` in `feasible` that is a convex combination of the other rows, or
/// `None` when no such point exists.
pub fn convex_feasible(channel: &Channel, s: usize, feasible: &FeasibleSet) -> Result<Option<RowStrategy>> {
    channel.check_secret(s)?;
    if channel.n_secrets() < 2 {
        return Err(Error::TooFewSecrets {
            required: 2,
            found: channel.n_secrets(),
        });
    }
    let m = channel.n_observables();
    let others = channel.other_rows(s);
    let mut lp = LpProblem::new();
    let q = feasible.emit(&mut lp, m)?;
    let lambda: Vec<_> = (0..others.len())
        .map(|k| lp.add_var(format!("lambda{k}"), 0.0, 1.0))
        .collect();
    lp.add_constraint(lambda.iter().map(|&l| (l, 1.0)), Relation::Eq, 1.0);
    for o in 0..m {
        let terms = lambda
            .iter()
            .zip(&others)
            .filter(|(_, row)| row[o] != 0.0)
            .map(|(&l, row)| (l, row[o]))
            .chain([(q[o], -1.0)]);
        lp.add_constraint(terms, Relation::Eq, 0.0);
    }
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Ok(None),
        _ => {
            let sol = sol.into_optimal()?;
            // Rebuild q from the weights so it lies in the hull by construction.
            let weights = clean_row(lambda.iter().map(|&l| sol.value(l)).collect());
            let mut row = vec![0.0; m];
            for (w, r) in weights.iter().zip(&others) {
                for (x, c) in row.iter_mut().zip(r.iter()) {
                    *x += w * c;
                }
            }
            Ok(Some(RowStrategy {
                method: Method::ConvexFeasible,
                q: clean_row(row),
                diagnostics: Diagnostics {
                    status: optimal_status(),
                    ..Diagnostics::default()
                },
            }))
        }
    }
}

fn require_prior<'a>(prior: Option<&'a Prior>, what: &str) -> Result<&'a Prior> {
    prior.ok_or_else(|| Error::MissingInput(format!("{what} requires a prior")))
}

fn copy_target(rule: CopyRule, channel: &Channel, s: usize, prior: Option<&Prior>) -> Result<usize> {
    let others = (0..channel.n_secrets()).filter(|&t| t != s);
    let mut best: Option<(usize, f64)> = None;
    for t in others {
        // Larger score wins; strict comparison keeps the lowest index on ties.
        let score = match rule {
            CopyRule::MaxPrior => require_prior(prior, "copy")?.get(t),
            CopyRule::MinCapacity(criterion) => {
                let adv = match criterion {
                    CapacityCriterion::ExactGuess => Adversary::exact(Mode::Gain),
                    CapacityCriterion::SDistinguish => Adversary::s_distinguish(s, Mode::Gain),
                };
                -capacity(&channel.with_row(s, channel.row(t))?, &adv)?.value
            }
        };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((t, score));
        }
    }
    best.map(|(t, _)| t).ok_or(Error::TooFewSecrets {
        required: 2,
        found: channel.n_secrets(),
    })
}

fn pad_to_multiple(channel: &Channel, base: &[f64], block: u32) -> Result<Vec<f64>> {
    if block == 0 {
        return Err(Error::InvalidParameter("pad block must be positive".into()));
    }
    let mut q = vec![0.0; channel.n_observables()];
    for (o, &p) in base.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let size = channel.observable_ids()[o];
        let padded = size.div_ceil(block) * block;
        let idx = channel
            .observable_index(padded)
            .ok_or_else(|| Error::UnknownObservable(padded.to_string()))?;
        q[idx] += p;
    }
    Ok(q)
}

/// Builds a baseline row for secret `s`.
///
/// Average, weighted average and copy rows are L1-projected onto `feasible`
/// when they fall outside it. The padding baseline pads `C_s`, or the base of
/// a padding feasible set when one is given.
pub fn baseline(
    method: Baseline,
    channel: &Channel,
    s: usize,
    prior: Option<&Prior>,
    feasible: &FeasibleSet,
) -> Result<RowStrategy> {
    channel.check_secret(s)?;
    feasible.check_dimension(channel.n_observables())?;
    let m = channel.n_observables();
    let (q, may_project) = match method {
        Baseline::NoDefense => (channel.row(s).to_vec(), false),
        Baseline::Average => {
            let others = channel.other_rows(s);
            if others.is_empty() {
                return Err(Error::TooFewSecrets { required: 2, found: 1 });
            }
            let mut q = vec![0.0; m];
            for row in &others {
                for (x, c) in q.iter_mut().zip(row.iter()) {
                    *x += c;
                }
            }
            let n = others.len() as f64;
            (q.into_iter().map(|x| x / n).collect(), true)
        }
        Baseline::WeightedAverage => {
            let prior = require_prior(prior, "weighted average")?;
            (average_other_row(prior, channel, s)?, true)
        }
        Baseline::Copy(rule) => {
            let t = copy_target(rule, channel, s, prior)?;
            (channel.row(t).to_vec(), true)
        }
        Baseline::PadMultiple(block) => {
            let base = match feasible {
                FeasibleSet::NonNegativePadding { base } => base.as_slice(),
                _ => channel.row(s),
            };
            (pad_to_multiple(channel, base, block)?, false)
        }
    };
    let (q, projected) = if may_project && !feasible.contains(&q) {
        (project_to_feasible(&q, feasible)?, true)
    } else {
        (q, false)
    };
    Ok(RowStrategy {
        method: Method::Baseline(method),
        q,
        diagnostics: Diagnostics {
            projected,
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qif::{leakage, posterior_value};

    fn worked() -> (Prior, Channel) {
        let pi = Prior::new(vec![0.47, 0.29, 0.24]).unwrap();
        let c = Channel::from_rows(vec![vec![0.5, 0.5], vec![0.05, 0.95], vec![0.58, 0.42]]).unwrap();
        (pi, c)
    }

    #[test]
    fn s_distinguishing_optimum_has_no_leakage() {
        let (pi, c) = worked();
        for mode in [Mode::Gain, Mode::Loss] {
            let adv = Adversary::s_distinguish(0, mode);
            let r = optimal_fixed_prior(&pi, &c, 0, &FeasibleSet::FullSimplex, &adv).unwrap();
            let l = leakage(&pi, &c.with_row(0, &r.q).unwrap(), &adv).unwrap();
            assert!((l - 1.0).abs() < 1e-9, "{mode:?}: {l}");
        }
    }

    #[test]
    fn exact_guess_optimum_on_worked_instance() {
        let (pi, c) = worked();
        let adv = Adversary::exact(Mode::Gain);
        let r = optimal_fixed_prior(&pi, &c, 0, &FeasibleSet::FullSimplex, &adv).unwrap();
        let obj = r.diagnostics.objective.unwrap();
        // Every q with 0.47 q1 >= 0.1392 and 0.47 q2 >= 0.2755 attains the prior value 0.47.
        assert!((obj - 0.47).abs() < 1e-9);
        let at_q = posterior_value(&pi, &c.with_row(0, &[0.42, 0.58]).unwrap(), &adv).unwrap();
        assert!(obj <= at_q + 1e-9);
        let v = posterior_value(&pi, &c.with_row(0, &r.q).unwrap(), &adv).unwrap();
        assert!((v - obj).abs() < 1e-9);
        // The s-distinguishing optimum (0.29, 0.71) is strictly worse here.
        let v_star = posterior_value(&pi, &c.with_row(0, &[0.29, 0.71]).unwrap(), &adv).unwrap();
        assert!(v_star > obj + 1e-3);
    }

    #[test]
    fn rejects_other_adversaries() {
        let (pi, c) = worked();
        let f = FeasibleSet::FullSimplex;
        assert!(optimal_fixed_prior(&pi, &c, 0, &f, &Adversary::s_distinguish(1, Mode::Gain)).is_err());
        assert!(optimal_fixed_prior(&pi, &c, 0, &f, &Adversary::predicate(vec![0, 1], Mode::Gain)).is_err());
    }

    #[test]
    fn infeasible_set_is_reported() {
        let (pi, c) = worked();
        let f = FeasibleSet::linear(vec![crate::feasibility::RowConstraint {
            coeffs: vec![1.0, 1.0],
            relation: Relation::Eq,
            rhs: 2.0,
        }])
        .unwrap();
        let adv = Adversary::exact(Mode::Gain);
        assert_eq!(optimal_fixed_prior(&pi, &c, 0, &f, &adv), Err(Error::Infeasible));
        assert_eq!(optimal_capacity_exact(&c, 0, &f), Err(Error::Infeasible));
    }

    #[test]
    fn capacity_optimum_simplex() {
        let (_, c) = worked();
        let r = optimal_capacity_exact(&c, 0, &FeasibleSet::FullSimplex).unwrap();
        // Column maxima of the other rows: 0.58 + 0.95.
        assert!((r.diagnostics.objective.unwrap() - 1.53).abs() < 1e-9);
        let two = Channel::from_rows(vec![vec![0.3, 0.7], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = optimal_capacity_exact(&two, 0, &FeasibleSet::FullSimplex).unwrap();
        assert!((r.diagnostics.objective.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn convex_feasible_examples() {
        let (_, c) = worked();
        let r = convex_feasible(&c, 0, &FeasibleSet::FullSimplex).unwrap().unwrap();
        assert!(r.q[0] >= 0.05 - 1e-12 && r.q[0] <= 0.58 + 1e-12);

        let c = Channel::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = FeasibleSet::linear(vec![crate::feasibility::RowConstraint {
            coeffs: vec![1.0, 0.0],
            relation: Relation::Eq,
            rhs: 1.0,
        }])
        .unwrap();
        assert_eq!(convex_feasible(&c, 0, &f).unwrap(), None);
    }

    #[test]
    fn baselines() {
        let (pi, c) = worked();
        let f = FeasibleSet::FullSimplex;
        let avg = baseline(Baseline::Average, &c, 0, None, &f).unwrap();
        assert!((avg.q[0] - 0.315).abs() < 1e-12 && (avg.q[1] - 0.685).abs() < 1e-12);
        let w = baseline(Baseline::WeightedAverage, &c, 0, Some(&pi), &f).unwrap();
        assert!((w.q[0] - 0.29).abs() < 1e-12);
        let copy = baseline(Baseline::Copy(CopyRule::MaxPrior), &c, 0, Some(&pi), &f).unwrap();
        assert_eq!(copy.q, c.row(1));
        assert_eq!(baseline(Baseline::NoDefense, &c, 0, None, &f).unwrap().q, c.row(0));
        assert!(matches!(
            baseline(Baseline::WeightedAverage, &c, 0, None, &f),
            Err(Error::MissingInput(_))
        ));
        // Copying the middle row keeps every other row within 0.7.
        let c4 = Channel::from_rows(vec![
            vec![0.5, 0.5],
            vec![0.05, 0.95],
            vec![0.58, 0.42],
            vec![0.4, 0.6],
        ])
        .unwrap();
        let rule = CopyRule::MinCapacity(CapacityCriterion::SDistinguish);
        let mc = baseline(Baseline::Copy(rule), &c4, 0, None, &f).unwrap();
        assert_eq!(mc.q, c4.row(3));
        // Rows 1 and 2 tie at distance 1.06; the lower index wins.
        let mc = baseline(Baseline::Copy(rule), &c, 0, None, &f).unwrap();
        assert_eq!(mc.q, c.row(1));
    }

    #[test]
    fn pad_baseline() {
        let rows = vec![
            {
                let mut r = vec![0.0; 10];
                r[6] = 1.0;
                r
            },
            vec![0.1; 10],
        ];
        let c = Channel::from_rows(rows).unwrap();
        let r = baseline(Baseline::PadMultiple(5), &c, 0, None, &FeasibleSet::FullSimplex).unwrap();
        assert_eq!(r.q[9], 1.0);
        let r = baseline(Baseline::PadMultiple(5), &c, 1, None, &FeasibleSet::FullSimplex).unwrap();
        assert!((r.q[4] - 0.5).abs() < 1e-12 && (r.q[9] - 0.5).abs() < 1e-12);
        assert!(matches!(
            baseline(Baseline::PadMultiple(4), &c, 1, None, &FeasibleSet::FullSimplex),
            Err(Error::UnknownObservable(_))
        ));
    }

    #[test]
    fn infeasible_average_is_projected() {
        let c = Channel::from_rows(vec![vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let f = FeasibleSet::padding(c.row(0).to_vec()).unwrap();
        let r = baseline(Baseline::Average, &c, 0, None, &f).unwrap();
        assert!(r.diagnostics.projected);
        assert!(f.contains(&r.q));
    }

    #[test]
    fn method_labels() {
        assert_eq!(Method::Seb(SebMethod::Approx(0.05)).to_string(), "seb-approx-0.05");
        assert_eq!(Method::Baseline(Baseline::PadMultiple(5)).to_string(), "pad-5");
    }
}
