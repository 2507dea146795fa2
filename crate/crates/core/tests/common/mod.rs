//! Generators and brute-force oracles shared by the integration tests.
//!
//! Oracles here never call into the optimizers; they recompute quantities
//! from definitions by enumeration or sampling.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rowguard_core::{Channel, Prior};

/// Strategy for a distribution of length `m` with some exact zeros.
pub fn distribution(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], m).prop_map(|w| {
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            let mut v = vec![0.0; w.len()];
            v[0] = 1.0;
            v
        } else {
            w.iter().map(|x| x / total).collect()
        }
    })
}

pub fn channel(n: usize, m: usize) -> impl Strategy<Value = Channel> {
    prop::collection::vec(distribution(m), n).prop_map(|rows| Channel::from_rows(rows).unwrap())
}

/// A channel with `2..=max_n` secrets and `1..=max_m` observables.
pub fn any_channel(max_n: usize, max_m: usize) -> impl Strategy<Value = Channel> {
    (2..=max_n, 1..=max_m).prop_flat_map(|(n, m)| channel(n, m))
}

pub fn prior(n: usize) -> impl Strategy<Value = Prior> {
    distribution(n).prop_map(|p| Prior::new(p).unwrap())
}

pub fn random_distribution(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    // Exponential spacings give a uniform point of the simplex.
    let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

pub fn random_channel(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Channel {
    Channel::from_rows((0..n).map(|_| random_distribution(rng, m)).collect()).unwrap()
}

pub fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

pub fn convex_combination<R: AsRef<[f64]>>(rows: &[R], weights: &[f64]) -> Vec<f64> {
    let m = rows[0].as_ref().len();
    let mut out = vec![0.0; m];
    for (r, w) in rows.iter().zip(weights) {
        for (o, x) in r.as_ref().iter().enumerate() {
            out[o] += w * x;
        }
    }
    out
}

/// Posterior gain of the adversary that picks one action per observable,
/// where action `a` wins on secrets with `wins(a, secret)`.
fn best_action_gain(prior: &[f64], rows: &[Vec<f64>], actions: usize, wins: impl Fn(usize, usize) -> bool) -> f64 {
    let m = rows[0].len();
    (0..m)
        .map(|o| {
            (0..actions)
                .map(|a| {
                    (0..prior.len())
                        .filter(|&s| wins(a, s))
                        .map(|s| prior[s] * rows[s][o])
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Prior and posterior gain of exact guessing, from definitions.
pub fn exact_gain(prior: &[f64], rows: &[Vec<f64>]) -> (f64, f64) {
    let n = prior.len();
    let pre = prior.iter().cloned().fold(0.0, f64::max);
    (pre, best_action_gain(prior, rows, n, |a, s| a == s))
}

/// Prior and posterior gain of guessing whether the secret lies in `set`.
/// Action 0 guesses "in the set", action 1 "outside".
pub fn predicate_gain(prior: &[f64], rows: &[Vec<f64>], set: &[usize]) -> (f64, f64) {
    let inside = |s: usize| set.contains(&s);
    let p_in: f64 = (0..prior.len()).filter(|&s| inside(s)).map(|s| prior[s]).sum();
    let pre = p_in.max(1.0 - p_in);
    (pre, best_action_gain(prior, rows, 2, |a, s| (a == 0) == inside(s)))
}

pub fn gain_leakage((pre, post): (f64, f64)) -> f64 {
    post / pre
}

/// Loss leakage; a prior without risk has nothing to leak.
pub fn loss_leakage((pre, post): (f64, f64)) -> f64 {
    if 1.0 - pre < 1e-12 {
        1.0
    } else {
        (1.0 - pre) / (1.0 - post)
    }
}

/// Every distribution over `m` outcomes with entries in multiples of `1/den`.
pub fn grid(m: usize, den: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, den: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == m - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / den as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(m, left - k, den, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, den, den, &mut Vec::new(), &mut out);
    out
}

/// Prefix-dominance check written independently of the library.
pub fn dominated_prefixes(base: &[f64], q: &[f64], tol: f64) -> bool {
    let (mut a, mut b) = (0.0, 0.0);
    base.iter().zip(q).all(|(x, y)| {
        a += x;
        b += y;
        b <= a + tol
    })
}

/// A random point `q` satisfying prefix dominance of `base`: every unit of
/// base mass is moved to a uniformly chosen position at or above it.
pub fn random_padding(rng: &mut ChaCha8Rng, base: &[f64]) -> Vec<f64> {
    let m = base.len();
    let mut q = vec![0.0; m];
    for (o, &b) in base.iter().enumerate() {
        let w = random_distribution(rng, m - o);
        for (k, x) in w.iter().enumerate() {
            q[o + k] += b * x;
        }
    }
    q
}
