//! Channels, priors, and the vulnerability / risk / leakage / capacity
//! calculus for 0-1 gain and loss functions.
//!
//! Secrets are addressed by row index everywhere in the library; labels only
//! matter at the I/O boundary.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::predicate;

/// Tolerance for stochasticity and equality checks.
pub const STOCHASTIC_TOL: f64 = 1e-9;
/// Tolerance for comparing optimal values.
pub const OPTIMALITY_TOL: f64 = 1e-7;
/// Posterior risks below this are treated as zero.
const ZERO_RISK: f64 = 1e-12;

pub(crate) fn check_distribution(what: &str, probs: &[f64]) -> Result<()> {
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidEntry {
                what: what.to_string(),
                index,
                value,
            });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic {
            what: what.to_string(),
            sum,
        });
    }
    Ok(())
}

fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Probability distribution over secrets.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    probs: Vec<f64>,
}

impl Prior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptySet);
        }
        check_distribution("prior", &probs)?;
        Ok(Prior { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySet);
        }
        Ok(Prior {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Half the mass on each of `s` and `t`. When `s == t` the whole mass
    /// sits on that secret.
    pub fn two_point(n: usize, s: usize, t: usize) -> Result<Self> {
        for idx in [s, t] {
            if idx >= n {
                return Err(Error::SecretOutOfRange { index: idx, len: n });
            }
        }
        let mut probs = vec![0.0; n];
        probs[s] += 0.5;
        probs[t] += 0.5;
        Ok(Prior { probs })
    }

    /// Normalizes non-negative weights (e.g. visit counts) into a prior.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidEntry {
                    what: "weights".into(),
                    index,
                    value,
                });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Prior::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, s: usize) -> f64 {
        self.probs[s]
    }
}

/// Row-stochastic matrix from secrets to observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    secret_ids: Vec<String>,
    observable_ids: Vec<u32>,
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(secret_ids: Vec<String>, observable_ids: Vec<u32>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || observable_ids.is_empty() {
            return Err(Error::EmptySet);
        }
        if secret_ids.len() != rows.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                found: secret_ids.len(),
            });
        }
        let mut seen = HashSet::new();
        for id in &secret_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "secret",
                    id: id.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        for id in &observable_ids {
            if !seen.insert(*id) {
                return Err(Error::DuplicateId {
                    kind: "observable",
                    id: id.to_string(),
                });
            }
        }
        for (row, id) in rows.iter().zip(&secret_ids) {
            if row.len() != observable_ids.len() {
                return Err(Error::LengthMismatch {
                    expected: observable_ids.len(),
                    found: row.len(),
                });
            }
            check_distribution(&format!("row `{id}`"), row)?;
        }
        Ok(Channel {
            secret_ids,
            observable_ids,
            rows,
        })
    }

    /// Builds a channel with default labels `s0, s1, ..` and observables `1..=m`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let secret_ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let observable_ids = (1..=m as u32).collect();
        Channel::new(secret_ids, observable_ids, rows)
    }

    pub fn n_secrets(&self) -> usize {
        self.rows.len()
    }

    pub fn n_observables(&self) -> usize {
        self.observable_ids.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn secret_ids(&self) -> &[String] {
        &self.secret_ids
    }

    pub fn observable_ids(&self) -> &[u32] {
        &self.observable_ids
    }

    pub fn secret_index(&self, id: &str) -> Result<usize> {
        self.secret_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::UnknownSecret(id.to_string()))
    }

    pub fn observable_index(&self, id: u32) -> Option<usize> {
        self.observable_ids.iter().position(|&o| o == id)
    }

    pub(crate) fn check_secret(&self, s: usize) -> Result<()> {
        if s >= self.n_secrets() {
            return Err(Error::SecretOutOfRange {
                index: s,
                len: self.n_secrets(),
            });
        }
        Ok(())
    }

    /// The channel with row `s` replaced by `q`.
    pub fn with_row(&self, s: usize, q: &[f64]) -> Result<Channel> {
        self.check_secret(s)?;
        if q.len() != self.n_observables() {
            return Err(Error::LengthMismatch {
                expected: self.n_observables(),
                found: q.len(),
            });
        }
        check_distribution("replacement row", q)?;
        let mut out = self.clone();
        out.rows[s] = q.to_vec();
        Ok(out)
    }

    /// Rows of every secret other than `s`, in index order.
    pub fn other_rows(&self, s: usize) -> Vec<&[f64]> {
        self.rows
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != s)
            .map(|(_, r)| r.as_slice())
            .collect()
    }

    /// Sub-channel on the given secrets, in the given order.
    pub fn restrict(&self, secrets: &[usize]) -> Result<Channel> {
        for &s in secrets {
            self.check_secret(s)?;
        }
        Channel::new(
            secrets.iter().map(|&s| self.secret_ids[s].clone()).collect(),
            self.observable_ids.clone(),
            secrets.iter().map(|&s| self.rows[s].clone()).collect(),
        )
    }

    pub fn without(&self, s: usize) -> Result<Channel> {
        self.check_secret(s)?;
        let keep: Vec<usize> = (0..self.n_secrets()).filter(|&t| t != s).collect();
        self.restrict(&keep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gain,
    Loss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryKind {
    /// Guess the exact secret in one try.
    ExactGuess,
    /// Guess whether the secret lies in the given subset.
    PGuess(Vec<usize>),
    /// Decide whether the secret is the given one.
    SDistinguish(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adversary {
    pub kind: AdversaryKind,
    pub mode: Mode,
}

impl Adversary {
    pub fn exact(mode: Mode) -> Self {
        Adversary {
            kind: AdversaryKind::ExactGuess,
            mode,
        }
    }

    pub fn s_distinguish(s: usize, mode: Mode) -> Self {
        Adversary {
            kind: AdversaryKind::SDistinguish(s),
            mode,
        }
    }

    pub fn predicate(subset: Vec<usize>, mode: Mode) -> Self {
        Adversary {
            kind: AdversaryKind::PGuess(subset),
            mode,
        }
    }

    /// The predicate subset for P-guessing and s-distinguishing adversaries,
    /// validated against `n` secrets. `None` for exact guessing.
    pub fn predicate_set(&self, n: usize) -> Result<Option<Vec<usize>>> {
        match &self.kind {
            AdversaryKind::ExactGuess => Ok(None),
            AdversaryKind::SDistinguish(s) => {
                validate_predicate(&[*s], n)?;
                Ok(Some(vec![*s]))
            }
            AdversaryKind::PGuess(p) => {
                validate_predicate(p, n)?;
                let mut p = p.clone();
                p.sort_unstable();
                Ok(Some(p))
            }
        }
    }
}

pub(crate) fn validate_predicate(p: &[usize], n: usize) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidPredicate("empty subset".into()));
    }
    let mut seen = HashSet::new();
    for &s in p {
        if s >= n {
            return Err(Error::SecretOutOfRange { index: s, len: n });
        }
        if !seen.insert(s) {
            return Err(Error::InvalidPredicate(format!("secret {s} listed twice")));
        }
    }
    if seen.len() >= n {
        return Err(Error::InvalidPredicate(
            "subset must be a proper subset of the secrets".into(),
        ));
    }
    Ok(())
}

/// Maximum L1 distance together with the indices realizing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistancePair {
    pub value: f64,
    pub first: usize,
    pub second: usize,
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Largest pairwise distance within `rows`; the pair is reported with the
/// lower index first, ties going to the lexicographically smallest pair.
pub fn diameter<R: AsRef<[f64]>>(rows: &[R]) -> Result<DistancePair> {
    if rows.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = DistancePair {
        value: 0.0,
        first: 0,
        second: if rows.len() > 1 { 1 } else { 0 },
    };
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d = l1_distance(rows[i].as_ref(), rows[j].as_ref())?;
            if d > best.value {
                best = DistancePair {
                    value: d,
                    first: i,
                    second: j,
                };
            }
        }
    }
    Ok(best)
}

/// Largest distance between an element of `a` and an element of `b`.
pub fn max_dist<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<DistancePair> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best: Option<DistancePair> = None;
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let d = l1_distance(x.as_ref(), y.as_ref())?;
            if best.is_none_or(|b| d > b.value) {
                best = Some(DistancePair {
                    value: d,
                    first: i,
                    second: j,
                });
            }
        }
    }
    Ok(best.expect("non-empty inputs"))
}

/// Prior vulnerability (Gain) or prior risk (Loss).
pub fn prior_value(prior: &Prior, adv: &Adversary) -> Result<f64> {
    let gain = match adv.predicate_set(prior.len())? {
        None => argmax_lowest(prior.probs().iter().copied()).map_or(0.0, |(_, v)| v),
        Some(p) => {
            let inside: f64 = p.iter().map(|&s| prior.get(s)).sum();
            let total: f64 = prior.probs().iter().sum();
            inside.max(total - inside)
        }
    };
    Ok(match adv.mode {
        Mode::Gain => gain,
        Mode::Loss => 1.0 - gain,
    })
}

pub(crate) fn check_dims(prior: &Prior, channel: &Channel) -> Result<()> {
    if prior.len() != channel.n_secrets() {
        return Err(Error::LengthMismatch {
            expected: channel.n_secrets(),
            found: prior.len(),
        });
    }
    Ok(())
}

/// Posterior Bayes vulnerability `sum_o max_s prior_s C[s][o]`.
pub(crate) fn bayes_posterior_vulnerability(prior: &Prior, channel: &Channel) -> f64 {
    (0..channel.n_observables())
        .map(|o| {
            channel
                .rows()
                .iter()
                .zip(prior.probs())
                .map(|(row, p)| p * row[o])
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Posterior vulnerability (Gain) or posterior risk (Loss).
pub fn posterior_value(prior: &Prior, channel: &Channel, adv: &Adversary) -> Result<f64> {
    check_dims(prior, channel)?;
    let gain = match adv.predicate_set(prior.len())? {
        None => bayes_posterior_vulnerability(prior, channel),
        Some(p) => {
            let (marginal, reduced) = predicate::reduce_and_compose(prior, &p, channel)?;
            bayes_posterior_vulnerability(&marginal, &reduced)
        }
    };
    Ok(match adv.mode {
        Mode::Gain => gain,
        Mode::Loss => 1.0 - gain,
    })
}

/// Multiplicative leakage.
pub fn leakage(prior: &Prior, channel: &Channel, adv: &Adversary) -> Result<f64> {
    let before = prior_value(prior, adv)?;
    let after = posterior_value(prior, channel, adv)?;
    match adv.mode {
        Mode::Gain => Ok(after / before),
        Mode::Loss => {
            if before < ZERO_RISK {
                // A deterministic secret leaves nothing to learn.
                Ok(1.0)
            } else if after < ZERO_RISK {
                Err(Error::InfiniteLeakage)
            } else {
                Ok(before / after)
            }
        }
    }
}

/// Capacity together with a prior realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Capacity {
    pub value: f64,
    pub witness: Prior,
}

fn loss_capacity(distance: f64) -> Result<f64> {
    let denom = 1.0 - 0.5 * distance;
    if denom < ZERO_RISK {
        Err(Error::InfiniteLeakage)
    } else {
        Ok(1.0 / denom)
    }
}

/// Sum of column maxima of a set of rows.
pub fn column_max_sum<R: AsRef<[f64]>>(rows: &[R]) -> f64 {
    let m = rows.first().map_or(0, |r| r.as_ref().len());
    (0..m)
        .map(|o| rows.iter().map(|r| r.as_ref()[o]).fold(0.0, f64::max))
        .sum()
}

/// Maximum leakage over all priors, in closed form.
pub fn capacity(channel: &Channel, adv: &Adversary) -> Result<Capacity> {
    let n = channel.n_secrets();
    if n < 2 {
        return Err(Error::TooFewSecrets {
            required: 2,
            found: n,
        });
    }
    match (adv.predicate_set(n)?, adv.mode) {
        (None, Mode::Gain) => Ok(Capacity {
            value: column_max_sum(channel.rows()),
            witness: Prior::uniform(n)?,
        }),
        (None, Mode::Loss) => {
            let d = diameter(channel.rows())?;
            Ok(Capacity {
                value: loss_capacity(d.value)?,
                witness: Prior::two_point(n, d.first, d.second)?,
            })
        }
        (Some(p), mode) => {
            let outside: Vec<usize> = (0..n).filter(|s| !p.contains(s)).collect();
            let a: Vec<&[f64]> = p.iter().map(|&s| channel.row(s)).collect();
            let b: Vec<&[f64]> = outside.iter().map(|&t| channel.row(t)).collect();
            let d = max_dist(&a, &b)?;
            let witness = Prior::two_point(n, p[d.first], outside[d.second])?;
            let value = match mode {
                Mode::Gain => 1.0 + 0.5 * d.value,
                Mode::Loss => loss_capacity(d.value)?,
            };
            Ok(Capacity { value, witness })
        }
    }
}
