mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rowguard_core::feasibility::{extract_strategy, is_feasible_padding, padding_lp_feasible};
use rowguard_core::FeasibleSet;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prefix_test_agrees_with_the_lp((base, q) in (1..7usize).prop_flat_map(|m| (distribution(m), distribution(m)))) {
        let lp = padding_lp_feasible(&base, &q).unwrap();
        prop_assert_eq!(is_feasible_padding(&base, &q), lp);
    }
}

#[test]
fn exhaustive_grid_agreement() {
    let points = grid(3, 10);
    assert_eq!(points.len(), 66);
    let mut agree = 0;
    for base in &points {
        for q in &points {
            let prefix = is_feasible_padding(base, q);
            assert_eq!(prefix, padding_lp_feasible(base, q).unwrap(), "{base:?} {q:?}");
            assert_eq!(prefix, dominated_prefixes(base, q, 1e-9));
            agree += 1;
        }
    }
    assert_eq!(agree, 66 * 66);
}

#[test]
fn extracted_strategies_move_mass_upward_and_reproduce_q() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let m = r.gen_range(1..=8);
        let base = random_distribution(&mut r, m);
        let q = random_padding(&mut r, &base);
        let obs: Vec<u32> = (1..=m as u32).collect();
        let t = extract_strategy(&obs, &base, &q).unwrap();
        let tr = t.transport();
        for o in 0..m {
            let row_sum: f64 = tr[o].iter().sum();
            assert!((row_sum - base[o]).abs() < 1e-8);
            for o2 in 0..o {
                assert_eq!(tr[o][o2], 0.0);
            }
        }
        for o2 in 0..m {
            let col: f64 = (0..m).map(|o| tr[o][o2]).sum();
            assert!((col - q[o2]).abs() < 1e-8);
        }
        assert!(l1(&t.target(), &q) < 1e-8);
    }
}

#[test]
fn identity_when_nothing_moves() {
    let base = vec![0.2, 0.0, 0.5, 0.3];
    let t = extract_strategy(&[1, 2, 3, 4], &base, &base).unwrap();
    for o in [0, 2, 3] {
        let row = t.row(o).unwrap();
        assert_eq!(row[o], 1.0);
    }
    assert!(t.row(1).is_none());
}

#[test]
fn monte_carlo_marginals_within_three_sigma() {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let n = 100_000;
    for _ in 0..5 {
        let m = r.gen_range(2..=6);
        let base = random_distribution(&mut r, m);
        let q = random_padding(&mut r, &base);
        let t = extract_strategy(&(1..=m as u32).collect::<Vec<_>>(), &base, &q).unwrap();
        let mut counts = vec![0usize; m];
        let mut sampler = ChaCha8Rng::seed_from_u64(r.gen());
        let cdf: Vec<f64> = base.iter().scan(0.0, |a, x| { *a += x; Some(*a) }).collect();
        for _ in 0..n {
            let u: f64 = sampler.gen();
            let o = cdf.iter().position(|&c| u < c).unwrap_or(m - 1);
            let o = if base[o] > 0.0 { o } else { (0..m).rev().find(|&k| base[k] > 0.0).unwrap() };
            let o2 = t.pad(o, &mut sampler);
            assert!(o2 >= o);
            counts[o2] += 1;
        }
        for o in 0..m {
            let p = q[o];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = counts[o] as f64 / n as f64;
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "size {o}: {freq} vs {p}");
        }
    }
}

#[test]
fn padding_set_examples() {
    let top = FeasibleSet::padding(vec![0.0, 0.0, 1.0]).unwrap();
    assert!(top.contains(&[0.0, 0.0, 1.0]));
    assert!(!top.contains(&[0.0, 0.1, 0.9]));
    let bottom = FeasibleSet::padding(vec![1.0, 0.0, 0.0]).unwrap();
    for q in grid(3, 10) {
        assert!(bottom.contains(&q));
    }
    assert!(is_feasible_padding(&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5]));
    assert!(!is_feasible_padding(&[0.5, 0.5, 0.0], &[0.6, 0.4, 0.0]));
    assert!(!is_feasible_padding(&[0.0, 1.0], &[1.0, 0.0]));
}
