//! Reduction of predicate guessing to exact guessing.
//!
//! A prior over secrets and a binary predicate `P` factor into a marginal over
//! the two classes `{P, not P}` and a class-to-secret channel. Composing that
//! channel with the system channel yields a two-secret system whose Bayes
//! leakage equals the predicate leakage of the original.

use crate::error::{Error, Result};
use crate::qif::{check_dims, validate_predicate, Channel, Prior};

/// Row index of the class `P` in factorizations and reduced channels.
pub const IN_CLASS: usize = 0;
/// Row index of the class `not P`.
pub const OUT_CLASS: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateFactorization {
    /// Probability of `P` and of `not P`.
    pub marginal: [f64; 2],
    /// Conditional distribution over secrets for each class.
    pub conditional: [Vec<f64>; 2],
}

/// Factors `prior` along the predicate `subset`.
///
/// A class with zero marginal gets the uniform row over its members.
pub fn factorize(prior: &Prior, subset: &[usize]) -> Result<PredicateFactorization> {
    let n = prior.len();
    validate_predicate(subset, n)?;
    let mut member = vec![false; n];
    for &s in subset {
        member[s] = true;
    }
    let class_of = |class: usize, s: usize| member[s] == (class == IN_CLASS);

    let mut marginal = [0.0; 2];
    let mut conditional = [vec![0.0; n], vec![0.0; n]];
    for class in [IN_CLASS, OUT_CLASS] {
        let mass: f64 = (0..n).filter(|&s| class_of(class, s)).map(|s| prior.get(s)).sum();
        marginal[class] = mass;
        let row = &mut conditional[class];
        if mass > 0.0 {
            for s in (0..n).filter(|&s| class_of(class, s)) {
                row[s] = prior.get(s) / mass;
            }
        } else {
            let size = (0..n).filter(|&s| class_of(class, s)).count() as f64;
            for s in (0..n).filter(|&s| class_of(class, s)) {
                row[s] = 1.0 / size;
            }
        }
    }
    Ok(PredicateFactorization {
        marginal,
        conditional,
    })
}

fn compose_row(weights: &[f64], channel: &Channel) -> Vec<f64> {
    let mut out = vec![0.0; channel.n_observables()];
    for (w, row) in weights.iter().zip(channel.rows()) {
        if *w == 0.0 {
            continue;
        }
        for (o, c) in out.iter_mut().zip(row) {
            *o += w * c;
        }
    }
    out
}

fn renormalize(mut row: Vec<f64>) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|x| *x /= sum);
    }
    row
}

/// Returns the class marginal as a two-secret prior and the two-row channel
/// `Q * C` (row 0 for `P`, row 1 for `not P`).
pub fn reduce_and_compose(prior: &Prior, subset: &[usize], channel: &Channel) -> Result<(Prior, Channel)> {
    check_dims(prior, channel)?;
    let f = factorize(prior, subset)?;
    let marginal = Prior::new(f.marginal.to_vec())?;
    let rows = f
        .conditional
        .iter()
        .map(|weights| renormalize(compose_row(weights, channel)))
        .collect();
    let reduced = Channel::new(
        vec!["P".to_string(), "not P".to_string()],
        channel.observable_ids().to_vec(),
        rows,
    )?;
    Ok((marginal, reduced))
}

/// Output distribution of a secret drawn from `prior` conditioned on not being `s`.
pub fn average_other_row(prior: &Prior, channel: &Channel, s: usize) -> Result<Vec<f64>> {
    check_dims(prior, channel)?;
    channel.check_secret(s)?;
    let rest = 1.0 - prior.get(s);
    if rest <= 0.0 {
        return Err(Error::DegeneratePrior(s));
    }
    let weights: Vec<f64> = (0..prior.len())
        .map(|t| if t == s { 0.0 } else { prior.get(t) / rest })
        .collect();
    Ok(renormalize(compose_row(&weights, channel)))
}
