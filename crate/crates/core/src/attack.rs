//! Simulated s-distinguishing attack against a defended channel.
//!
//! Labeled samples are drawn from the prior and the channel, with the defended
//! site's requests passed through its padding strategy. A frequency-count Bayes
//! classifier is trained on the first 80% of the shuffled samples and scored on
//! the rest.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feasibility::PaddingStrategy;
use crate::io::{csv_writer, fmt_float};
use crate::qif::{check_dims, Channel, Prior};
use crate::sampling::{Discrete, PRNG_NAME};

pub const MIN_SAMPLES: usize = 1000;
pub const TRAIN_FRACTION: f64 = 0.8;

/// How the defended site produces its observations.
#[derive(Debug, Clone, Copy)]
pub enum Defense<'a> {
    /// Observations are drawn directly from this row.
    Row(&'a [f64]),
    /// Requests drawn from the original row are padded by the strategy.
    Padding(&'a PaddingStrategy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub seed: u64,
    pub prng: &'static str,
    /// Samples of the defended site whose observed index was below the requested one.
    pub downward_moves: usize,
}

/// Predicts the defended site where its training count strictly exceeds the
/// count of all other sites; ties and unseen observables go to "not s".
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyClassifier {
    positive: Vec<u64>,
    negative: Vec<u64>,
}

impl FrequencyClassifier {
    pub fn train(m: usize, samples: &[(bool, usize)]) -> Self {
        let mut c = FrequencyClassifier {
            positive: vec![0; m],
            negative: vec![0; m],
        };
        for &(label, o) in samples {
            if label {
                c.positive[o] += 1;
            } else {
                c.negative[o] += 1;
            }
        }
        c
    }

    pub fn predict(&self, o: usize) -> bool {
        self.positive[o] > self.negative[o]
    }
}

/// Runs the attack with labels drawn from `prior`.
pub fn simulate_attack(
    channel: &Channel,
    s: usize,
    defense: Defense<'_>,
    prior: &Prior,
    n_samples: usize,
    seed: u64,
) -> Result<AttackReport> {
    check_dims(prior, channel)?;
    channel.check_secret(s)?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_SAMPLES} samples required, got {n_samples}"
        )));
    }
    let m = channel.n_observables();
    let sampler = |row: &[f64]| {
        Discrete::new(row).ok_or_else(|| Error::InvalidParameter("row has no mass".into()))
    };
    let labels = Discrete::new(prior.probs()).expect("prior has mass");
    let rows: Vec<Discrete> = channel.rows().iter().map(|r| sampler(r)).collect::<Result<_>>()?;
    let defended = match defense {
        Defense::Row(q) => {
            if q.len() != m {
                return Err(Error::LengthMismatch { expected: m, found: q.len() });
            }
            Some(sampler(q)?)
        }
        Defense::Padding(p) => {
            if p.observables() != channel.observable_ids() {
                return Err(Error::InvalidParameter(
                    "padding strategy observables differ from the channel".into(),
                ));
            }
            None
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut downward_moves = 0;
    let mut samples: Vec<(bool, usize)> = (0..n_samples)
        .map(|_| {
            let t = labels.sample(&mut rng);
            let o = match (t == s, &defended, defense) {
                (true, Some(d), _) => d.sample(&mut rng),
                (true, None, Defense::Padding(p)) => {
                    let requested = rows[s].sample(&mut rng);
                    let observed = p.pad(requested, &mut rng);
                    if observed < requested {
                        downward_moves += 1;
                    }
                    observed
                }
                _ => rows[t].sample(&mut rng),
            };
            (t == s, o)
        })
        .collect();
    samples.shuffle(&mut rng);

    let n_train = (n_samples as f64 * TRAIN_FRACTION).round() as usize;
    let (train, test) = samples.split_at(n_train);
    for (name, part) in [("training", train), ("test", test)] {
        let pos = part.iter().filter(|(l, _)| *l).count();
        if pos == 0 || pos == part.len() {
            return Err(Error::DegenerateSplit(format!("{name} set contains a single class")));
        }
    }
    let clf = FrequencyClassifier::train(m, train);
    let (mut tp, mut fneg, mut fp, mut tn) = (0, 0, 0, 0);
    for &(label, o) in test {
        match (label, clf.predict(o)) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let recall = ratio(tp, tp + fneg);
    let precision = ratio(tp, tp + fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(AttackReport {
        accuracy: ratio(tp + tn, test.len()),
        recall,
        precision,
        f1,
        n_train: train.len(),
        n_test: test.len(),
        true_positives: tp,
        false_negatives: fneg,
        false_positives: fp,
        true_negatives: tn,
        seed,
        prng: PRNG_NAME,
        downward_moves,
    })
}

/// Writes `method,accuracy,recall,f1,n_train,n_test,seed` rows.
pub fn save_attack_reports(path: &Path, rows: &[(String, AttackReport)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res = (|| {
        w.write_record(["method", "accuracy", "recall", "f1", "n_train", "n_test", "seed"])?;
        for (method, r) in rows {
            w.write_record([
                method.clone(),
                fmt_float(r.accuracy),
                fmt_float(r.recall),
                fmt_float(r.f1),
                r.n_train.to_string(),
                r.n_test.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    res.map_err(|e| Error::io(path, e))
}
