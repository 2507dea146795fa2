//! Acceptance criteria. Each check prints one PASS/FAIL line with the
//! measured quantity; the process fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rowguard_core::attack::{simulate_attack, Defense};
use rowguard_core::bench::{bench_seb, save_bench};
use rand_distr::{Distribution, LogNormal};
use rowguard_core::corpus::{
    generate_site, one_on_n_prior, synthetic_corpus, SyntheticConfig, DEFAULT_DEPTH_WEIGHTS, DEFAULT_PAGES_PER_DEPTH,
};
use rowguard_core::evaluate::{evaluate, EvalMode, ResultsTable};
use rowguard_core::feasibility::{extract_strategy, is_feasible_padding, padding_lp_feasible};
use rowguard_core::optimizer::{optimal_capacity_exact, optimal_fixed_prior, Baseline, Method};
use rowguard_core::predicate::average_other_row;
use rowguard_core::qif::{capacity, column_max_sum, leakage};
use rowguard_core::seb::{capacity_optimal_sdist, embed_phi, seb_l1_embedding, seb_l1_exact, SebMethod};
use rowguard_core::{Adversary, Channel, FeasibleSet, Mode, Prior};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn worked_example() -> Outcome {
    let start = Instant::now();
    let pi = Prior::new(vec![0.47, 0.29, 0.24]).unwrap();
    let c = Channel::from_rows(vec![vec![0.5, 0.5], vec![0.05, 0.95], vec![0.58, 0.42]]).unwrap();
    let q = average_other_row(&pi, &c, 0).unwrap();
    let err = (q[0] - 0.29).abs().max((q[1] - 0.71).abs());
    ensure(err <= 1e-12, || format!("q* = {q:?}"))?;
    let defended = c.with_row(0, &q).unwrap();
    let lg = leakage(&pi, &defended, &Adversary::s_distinguish(0, Mode::Gain)).unwrap();
    let ll = leakage(&pi, &defended, &Adversary::s_distinguish(0, Mode::Loss)).unwrap();
    ensure((lg - 1.0).abs() <= 1e-9 && (ll - 1.0).abs() <= 1e-9, || format!("L_gs = {lg}, L_ls = {ll}"))?;
    within_time(start.elapsed(), Duration::from_millis(100))?;
    Ok(format!("q* = ({:.2}, {:.2}), |q* - (0.29, 0.71)| = {err:.1e}, L_gs = {lg}, L_ls = {ll}", q[0], q[1]))
}

fn capacity_example() -> Outcome {
    let start = Instant::now();
    let with_q = |q: Vec<f64>| Channel::from_rows(vec![q, vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let q = random_distribution(&mut r, 2);
        let v = capacity(&with_q(q.clone()), &Adversary::exact(Mode::Gain)).unwrap().value;
        ensure((v - 2.0).abs() <= 1e-9, || format!("ML_gx = {v} at q = {q:?}"))?;
    }
    let sd = Adversary::s_distinguish(0, Mode::Gain);
    let at_vertex = capacity(&with_q(vec![1.0, 0.0]), &sd).unwrap().value;
    let at_mid = capacity(&with_q(vec![0.5, 0.5]), &sd).unwrap().value;
    ensure((at_vertex - 2.0).abs() <= 1e-9 && (at_mid - 1.5).abs() <= 1e-9, || {
        format!("ML_gs = {at_vertex} at (1, 0), {at_mid} at (1/2, 1/2)")
    })?;
    within_time(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("ML_gx = 2 for 100 q; ML_gs = {at_vertex} at (1,0), {at_mid} at (1/2,1/2)"))
}

fn lp_vs_sampling() -> Outcome {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = f64::NEG_INFINITY;
    for k in 0..50 {
        let n = r.gen_range(2..=5);
        let m = r.gen_range(2..=4);
        let c = random_channel(&mut r, n, m);
        let s = r.gen_range(0..n);
        let pi = Prior::new(random_distribution(&mut r, n)).unwrap();
        let padding = k % 2 == 1;
        let f = if padding {
            FeasibleSet::padding(random_distribution(&mut r, m)).unwrap()
        } else {
            FeasibleSet::FullSimplex
        };
        let samples: Vec<Vec<f64>> = (0..10_000)
            .map(|_| match &f {
                FeasibleSet::NonNegativePadding { base } => random_padding(&mut r, base),
                _ => random_distribution(&mut r, m),
            })
            .collect();
        let rows_with = |q: &[f64]| c.with_row(s, q).unwrap().rows().to_vec();
        for (adv, oracle) in [
            (Adversary::exact(Mode::Gain), Box::new(|q: &[f64]| exact_gain(pi.probs(), &rows_with(q)).1) as Box<dyn Fn(&[f64]) -> f64>),
            (Adversary::s_distinguish(s, Mode::Gain), Box::new(|q: &[f64]| predicate_gain(pi.probs(), &rows_with(q), &[s]).1)),
        ] {
            let opt = optimal_fixed_prior(&pi, &c, s, &f, &adv).map_err(|e| e.to_string())?;
            let best = samples.iter().map(|q| oracle(q)).fold(f64::INFINITY, f64::min);
            let value = opt.diagnostics.objective.unwrap();
            ensure(f.contains(&opt.q) && (oracle(&opt.q) - value).abs() <= 1e-8, || format!("instance {k}: certificate mismatch"))?;
            ensure(value <= best + 1e-6, || format!("instance {k} {adv:?}: {value} > {best}"))?;
            worst = worst.max(value - best);
        }
        let opt = optimal_capacity_exact(&c, s, &f).map_err(|e| e.to_string())?;
        let value = opt.diagnostics.objective.unwrap();
        let best = samples
            .iter()
            .map(|q| column_max_sum(&rows_with(q)))
            .fold(f64::INFINITY, f64::min);
        ensure(value <= best + 1e-6, || format!("instance {k} capacity: {value} > {best}"))?;
        worst = worst.max(value - best);
    }
    within_time(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("50 instances; max(LP - sampled min) = {worst:.3e} <= 1e-6; {:?}", start.elapsed()))
}

fn convex_combinations() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.gen_range(3..=6);
        let m = r.gen_range(2..=6);
        let c = random_channel(&mut r, n, m);
        let s = r.gen_range(0..n);
        let q = convex_combination(&c.other_rows(s), &random_distribution(&mut r, n - 1));
        let defended = c.with_row(s, &q).unwrap();
        let others = c.without(s).unwrap();
        for mode in [Mode::Gain, Mode::Loss] {
            let a = capacity(&defended, &Adversary::exact(mode)).unwrap().value;
            let b = capacity(&others, &Adversary::exact(mode)).unwrap().value;
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 combinations; max |ML(C^q) - ML(C_not_s)| = {worst:.1e} for g_x and l_x"))
}

fn seb_cross_validation() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let (mut agree, mut ident): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let n = r.gen_range(2..=6);
        let m = r.gen_range(1..=6);
        let c = random_channel(&mut r, n, m);
        let f = if k % 2 == 0 {
            FeasibleSet::FullSimplex
        } else {
            FeasibleSet::padding(c.row(0).to_vec()).unwrap()
        };
        let points = c.other_rows(0);
        let exact = seb_l1_exact(&points, &f).map_err(|e| e.to_string())?;
        let embed = seb_l1_embedding(&points, &f).map_err(|e| e.to_string())?;
        agree = agree.max((exact.radius - embed.radius).abs());
        for _ in 0..10_000 {
            let q = match &f {
                FeasibleSet::NonNegativePadding { base } => random_padding(&mut r, base),
                _ => random_distribution(&mut r, m),
            };
            let far = points.iter().map(|p| l1(p, &q)).fold(0.0, f64::max);
            ensure(exact.radius <= far + 1e-9, || format!("instance {k}: sampled center beats the LP"))?;
        }
        let row = capacity_optimal_sdist(&c, 0, &f, SebMethod::ExactLp).map_err(|e| e.to_string())?;
        let cap = capacity(&c.with_row(0, &row.q).unwrap(), &Adversary::s_distinguish(0, Mode::Gain)).unwrap().value;
        ident = ident.max((cap - (1.0 + 0.5 * exact.radius)).abs());
    }
    ensure(agree <= 1e-7, || format!("radius disagreement {agree:e}"))?;
    ensure(ident <= 1e-8, || format!("capacity identity off by {ident:e}"))?;
    Ok(format!("100 instances; |exact - embed| <= {agree:.1e}; |ML_gs - (1 + r/2)| <= {ident:.1e}"))
}

fn unconstrained_center() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let (mut gap, mut outside): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = r.gen_range(3..=7);
        let m = r.gen_range(2..=6);
        let c = random_channel(&mut r, n, m);
        let s = r.gen_range(0..n);
        let row = capacity_optimal_sdist(&c, s, &FeasibleSet::FullSimplex, SebMethod::ExactLp).map_err(|e| e.to_string())?;
        let others = c.other_rows(s);
        let gx = capacity(&c.with_row(s, &row.q).unwrap(), &Adversary::exact(Mode::Gain)).unwrap().value;
        gap = gap.max((gx - column_max_sum(&others)).abs());
        for (i, &x) in row.q.iter().enumerate() {
            let top = others.iter().map(|p| p[i]).fold(0.0, f64::max);
            let bottom = others.iter().map(|p| p[i]).fold(1.0, f64::min);
            outside = outside.max(x - top).max(bottom - x);
        }
    }
    ensure(gap <= 1e-8, || format!("ML_gx gap {gap:e}"))?;
    ensure(outside <= 1e-8, || format!("center leaves the box by {outside:e}"))?;
    Ok(format!("100 instances; ML_gx gap {gap:.1e}; box violation {:.1e}", outside.max(0.0)))
}

fn isometry() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = r.gen_range(1..=10);
        let x: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (px, py) = (embed_phi(&x).unwrap(), embed_phi(&y).unwrap());
        let linf = px.iter().zip(&py).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max((linf - l1(&x, &y)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("1000 pairs; max | ||phi(x)-phi(y)||_inf - ||x-y||_1 | = {worst:.1e}"))
}

fn padding_transport() -> Outcome {
    let mut pairs = 0;
    let mut feasible_pairs = 0;
    for (m, den) in [(3, 10), (4, 10)] {
        let points = grid(m, den);
        for base in &points {
            for q in &points {
                let prefix = is_feasible_padding(base, q);
                let lp = padding_lp_feasible(base, q).map_err(|e| e.to_string())?;
                ensure(prefix == lp, || format!("disagreement at {base:?} -> {q:?}"))?;
                pairs += 1;
                feasible_pairs += prefix as usize;
            }
        }
    }
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let mut worst_z: f64 = 0.0;
    for _ in 0..10 {
        let m = r.gen_range(2..=6);
        let base = random_distribution(&mut r, m);
        let q = random_padding(&mut r, &base);
        let t = extract_strategy(&(1..=m as u32).collect::<Vec<_>>(), &base, &q).map_err(|e| e.to_string())?;
        let mut counts = vec![0usize; m];
        let cdf: Vec<f64> = base.iter().scan(0.0, |a, x| {
            *a += x;
            Some(*a)
        }).collect();
        for _ in 0..n {
            let u: f64 = r.gen();
            let o = cdf.iter().position(|&c| u < c).unwrap_or(m - 1);
            let o2 = t.pad(o, &mut r);
            ensure(o2 >= o, || "strategy moved mass down".into())?;
            counts[o2] += 1;
        }
        for o in 0..m {
            let sigma = (q[o] * (1.0 - q[o]) / n as f64).sqrt();
            let dev = (counts[o] as f64 / n as f64 - q[o]).abs();
            if sigma > 0.0 {
                worst_z = worst_z.max(dev / sigma);
            } else {
                ensure(dev == 0.0, || format!("mass at an impossible size {o}"))?;
            }
        }
    }
    ensure(worst_z <= 3.0, || format!("Monte-Carlo deviation {worst_z:.2} sigma"))?;
    Ok(format!(
        "prefix test = LP on {pairs} grid pairs ({feasible_pairs} feasible); 10 strategies at 1e5 samples, max {worst_z:.2} sigma"
    ))
}

fn attack_calibration() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let corpus = synthetic_corpus(&SyntheticConfig { seed, ..SyntheticConfig::default() }).unwrap();
        let c = &corpus.channel;
        for f in [FeasibleSet::FullSimplex, FeasibleSet::padding(c.row(0).to_vec()).unwrap()] {
            let row = capacity_optimal_sdist(c, 0, &f, SebMethod::ExactLp).map_err(|e| e.to_string())?;
            let defended = c.with_row(0, &row.q).unwrap();
            let cap = capacity(&defended, &Adversary::s_distinguish(0, Mode::Gain)).unwrap();
            let rep = simulate_attack(&defended, 0, Defense::Row(&row.q), &cap.witness, 100_000, seed).map_err(|e| e.to_string())?;
            let dev = (rep.accuracy - 0.5 * cap.value).abs();
            ensure(dev <= 0.02, || format!("seed {seed}: accuracy {} vs {}", rep.accuracy, 0.5 * cap.value))?;
            worst = worst.max(dev);
        }
    }
    let half = Prior::new(vec![0.5, 0.5]).unwrap();
    let disjoint = Channel::from_rows(vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.25, 0.75]]).unwrap();
    let acc1 = simulate_attack(&disjoint, 0, Defense::Row(disjoint.row(0)), &half, 100_000, 1).map_err(|e| e.to_string())?.accuracy;
    let same = Channel::from_rows(vec![vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]]).unwrap();
    let acc2 = simulate_attack(&same, 0, Defense::Row(same.row(0)), &half, 100_000, 2).map_err(|e| e.to_string())?.accuracy;
    ensure((acc1 - 1.0).abs() <= 0.01, || format!("disjoint rows: accuracy {acc1}"))?;
    ensure((acc2 - 0.5).abs() <= 0.01, || format!("identical rows: accuracy {acc2}"))?;
    Ok(format!("6 corpora: max |acc - ML_gs/2| = {worst:.4}; disjoint {acc1:.4}; identical {acc2:.4}"))
}

fn corpus_substitutes() -> Outcome {
    // (a) method ordering on the seeded 20-site corpus.
    let corpus = synthetic_corpus(&SyntheticConfig::default()).unwrap();
    let c = &corpus.channel;
    let f = FeasibleSet::padding(c.row(0).to_vec()).unwrap();
    let adv = Adversary::s_distinguish(0, Mode::Gain);
    let methods = [
        Method::Seb(SebMethod::ExactLp),
        Method::Seb(SebMethod::Approx(0.05)),
        Method::Baseline(Baseline::Average),
        Method::Baseline(Baseline::NoDefense),
        Method::Baseline(Baseline::PadMultiple(5)),
    ];
    let ResultsTable::Capacity(rows) =
        evaluate(c, 0, &f, &methods, EvalMode::Capacity { adversary: &adv }, 1).map_err(|e| e.to_string())?
    else {
        return Err("unexpected table".into());
    };
    let caps: Vec<f64> = rows.iter().map(|r| r.capacity).collect();
    let listing = rows.iter().map(|r| format!("{} {:.4}", r.method, r.capacity)).collect::<Vec<_>>().join(" <= ");
    ensure(rows.len() == 5 && caps.windows(2).all(|w| w[0] <= w[1] + 1e-9), || format!("ordering broken: {listing}"))?;

    // (b) the padding-constrained fixed-prior optimum leaks nothing whenever
    // the unconstrained optimum already satisfies the padding constraint. On
    // the corpus itself every site has pages too small for that, so each seed
    // also gets a variant whose defended site serves light pages.
    let (mut feasible_cases, mut cases) = (0, 0);
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let corpus = synthetic_corpus(&SyntheticConfig { seed, ..SyntheticConfig::default() }).unwrap();
        let visits = corpus.visits.clone().unwrap();
        let light = LogNormal::new(4f64.ln(), 0.5).unwrap();
        let light_row = generate_site(
            &DEFAULT_DEPTH_WEIGHTS,
            &DEFAULT_PAGES_PER_DEPTH,
            corpus.channel.observable_ids(),
            |rng, _| (light.sample(rng).round() as u32).clamp(1, 300),
            seed,
        )
        .unwrap();
        let variants = [corpus.channel.clone(), corpus.channel.with_row(0, &light_row).unwrap()];
        for (v, c) in variants.iter().enumerate() {
            let sites: Vec<usize> = if v == 0 { (0..c.n_secrets()).collect() } else { vec![0] };
            for s in sites {
                let mut priors = vec![Prior::uniform(c.n_secrets()).unwrap(), corpus.prior("traffic").unwrap().clone()];
                for n in [1, 3, 10] {
                    priors.push(one_on_n_prior(&visits, s, n).unwrap());
                }
                let fs = FeasibleSet::padding(c.row(s).to_vec()).unwrap();
                for pi in &priors {
                    cases += 1;
                    let unconstrained = average_other_row(pi, c, s).unwrap();
                    if !is_feasible_padding(c.row(s), &unconstrained) {
                        continue;
                    }
                    feasible_cases += 1;
                    let adv = Adversary::s_distinguish(s, Mode::Gain);
                    let opt = optimal_fixed_prior(pi, c, s, &fs, &adv).map_err(|e| e.to_string())?;
                    let l = leakage(pi, &c.with_row(s, &opt.q).unwrap(), &adv).unwrap();
                    worst = worst.max((l - 1.0).abs());
                }
            }
        }
    }
    ensure(feasible_cases > 0, || "no case with a padding-feasible unconstrained optimum".into())?;
    ensure(worst <= 1e-9, || format!("leakage off by {worst:e}"))?;

    // (c) runtime and quality trade-off at 200 sites.
    let bench = bench_seb(&[(200, 300)], &[SebMethod::ExactLp, SebMethod::Approx(0.05)], true, 7).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    save_bench(&path, &bench).map_err(|e| e.to_string())?;
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    ensure(lines == 3, || format!("bench CSV has {lines} lines"))?;
    let speedup = bench[0].seconds / bench[1].seconds;
    ensure(speedup > 10.0, || format!("approx only {speedup:.1}x faster"))?;
    Ok(format!(
        "(a) {listing}; (b) leakage 1 in all {feasible_cases} of {cases} cases whose unconstrained optimum is padding-feasible (max dev {worst:.1e}); \
         (c) 200 sites: exact {:.3}s r={:.4}, approx {:.4}s r={:.4}, {speedup:.0}x faster",
        bench[0].seconds, bench[0].radius, bench[1].seconds, bench[1].radius
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("worked fixed-prior example", worked_example),
        ("worked capacity example", capacity_example),
        ("LP optimality against sampling", lp_vs_sampling),
        ("convex rows keep exact capacities", convex_combinations),
        ("SEB cross-validation", seb_cross_validation),
        ("unconstrained SEB center", unconstrained_center),
        ("embedding isometry", isometry),
        ("padding transport", padding_transport),
        ("attack calibration", attack_calibration),
        ("synthetic corpus substitutes", corpus_substitutes),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{elapsed:.2?}]: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{elapsed:.2?}]: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
