//! `rowguard`: batch front end over rowguard-core.
//!
//! Every subcommand writes its CSV to `--output` when given and prints a
//! one-line summary. Exit status is 0 on success, 1 when the computation
//! fails and 2 on a usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use rowguard_core::attack::{save_attack_reports, simulate_attack, Defense};
use rowguard_core::bench::{bench_seb, save_bench};
use rowguard_core::corpus::{synthetic_corpus, SyntheticConfig};
use rowguard_core::evaluate::{evaluate, row_for, save_results, EvalMode, ResultsTable};
use rowguard_core::feasibility::{extract_strategy, FeasibleSet};
use rowguard_core::io::{self, fmt_float};
use rowguard_core::optimizer::{
    Baseline, CapacityCriterion, CopyRule, Method, RowStrategy, DEFAULT_PAD_BLOCK,
};
use rowguard_core::qif::{capacity, leakage, posterior_value, prior_value};
use rowguard_core::seb::{seb, SebMethod};
use rowguard_core::{Adversary, AdversaryKind, Channel, Error, Mode, Prior};

const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "rowguard", version, about = "Leakage-minimizing row design for a fixed channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prior vulnerability, posterior vulnerability and leakage at a prior.
    Leakage(LeakageArgs),
    /// Maximum leakage over all priors, with a prior realizing it.
    Capacity(CapacityArgs),
    /// Row of the secret minimizing leakage at a fixed prior.
    Optimize(OptimizeArgs),
    /// Row of the secret minimizing exact-guessing capacity.
    OptimizeCapacity(OptimizeCapacityArgs),
    /// Smallest enclosing L1 ball of the other rows inside the feasible set.
    Seb(SebArgs),
    /// Row built by a comparison baseline.
    Baseline(BaselineArgs),
    /// Padding transport from the secret's row to a target row.
    PadStrategy(PadStrategyArgs),
    /// Synthetic site corpus over page sizes.
    GenSites(GenSitesArgs),
    /// Method comparison table.
    Evaluate(EvaluateArgs),
    /// Simulated s-distinguishing attack against a defended row.
    Attack(AttackArgs),
    /// Timings of the enclosing-ball solvers over synthetic corpora.
    BenchSeb(BenchSebArgs),
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Channel CSV with header `secret,observable,probability`.
    #[arg(long, value_parser = existing_file)]
    channel: PathBuf,
}

#[derive(Debug, Args)]
struct SecretArgs {
    /// Label of the secret whose row is designed.
    #[arg(long)]
    secret: String,
}

#[derive(Debug, Args)]
struct PriorArgs {
    /// Prior file of `secret=probability` lines.
    #[arg(long, value_parser = existing_file)]
    prior: Option<PathBuf>,
    /// Read the prior file as `secret=visits` and normalize.
    #[arg(long)]
    from_visits: bool,
}

#[derive(Debug, Args)]
struct AdversaryArgs {
    #[arg(long, value_enum, default_value = "exact-gain")]
    adversary: AdversaryArg,
    /// Comma-separated secret labels for p-gain and p-loss.
    #[arg(long, value_delimiter = ',')]
    predicate: Vec<String>,
}

#[derive(Debug, Args)]
struct FeasibleArgs {
    #[arg(long, value_enum, default_value = "simplex")]
    feasible: FeasibleArg,
    /// Linear constraints, one `observable:coefficient ... <= rhs` per line.
    #[arg(long, value_parser = existing_file, required_if_eq("feasible", "constraints"))]
    constraints: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LeakageArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    adversary: AdversaryArgs,
    /// Secret of the s-distinguishing adversary, or whose row `--row` replaces.
    #[arg(long)]
    secret: Option<String>,
    /// Row CSV (`observable,probability`) replacing the secret's row.
    #[arg(long, value_parser = existing_file, requires = "secret")]
    row: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CapacityArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    adversary: AdversaryArgs,
    /// Secret of the s-distinguishing adversary, or whose row `--row` replaces.
    #[arg(long)]
    secret: Option<String>,
    /// Row CSV (`observable,probability`) replacing the secret's row.
    #[arg(long, value_parser = existing_file, requires = "secret")]
    row: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    adversary: AdversaryArgs,
    #[command(flatten)]
    feasible: FeasibleArgs,
    /// Results CSV `method,prior,leakage,posterior_vulnerability`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Row CSV of the optimal row.
    #[arg(long)]
    row_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeCapacityArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    #[command(flatten)]
    adversary: AdversaryArgs,
    #[command(flatten)]
    feasible: FeasibleArgs,
    /// Results CSV `method,capacity` for the chosen adversary.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    row_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SebArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    #[command(flatten)]
    feasible: FeasibleArgs,
    #[arg(long, value_enum, default_value = "exact")]
    method: SebArg,
    /// Accuracy of the approximate method.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// CSV `method,radius,capacity,farthest`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Row CSV of the center.
    #[arg(long)]
    row_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    feasible: FeasibleArgs,
    /// no-defense, average, weighted-average, copy, copy-min-capacity or pad-K.
    #[arg(long, value_parser = parse_method)]
    method: MethodSpec,
    /// Row CSV of the baseline row.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PadStrategyArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    /// Target row CSV; must be reachable by padding the secret's row.
    #[arg(long, value_parser = existing_file)]
    row: PathBuf,
    /// CSV `size_in,size_out,probability`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenSitesArgs {
    #[arg(long, default_value_t = 20)]
    sites: usize,
    /// Largest page size; observables are 1..=max-size.
    #[arg(long, default_value_t = 300)]
    max_size: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Log-scale spread of page sizes within a site.
    #[arg(long)]
    spread: Option<f64>,
    /// Range of per-site median page sizes, as `LO,HI`.
    #[arg(long, value_parser = parse_range)]
    median_range: Option<(f64, f64)>,
    /// Channel CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Writes the traffic prior, or the uniform one when visits are unknown.
    #[arg(long)]
    prior_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    #[command(flatten)]
    adversary: AdversaryArgs,
    #[command(flatten)]
    feasible: FeasibleArgs,
    #[arg(long, value_enum, default_value = "fixed-prior")]
    mode: EvalModeArg,
    /// Comma-separated methods, e.g. `optimal,average,seb-exact,pad-5`.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, required = true)]
    methods: Vec<MethodSpec>,
    /// Prior file, repeatable; named after its file stem.
    #[arg(long, value_parser = existing_file)]
    prior: Vec<PathBuf>,
    #[arg(long)]
    from_visits: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Upper bound on parallel evaluation cells.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AttackArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    secret: SecretArgs,
    /// Attacker prior; defaults to probability 0.5 on the secret and the
    /// rest uniform.
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    feasible: FeasibleArgs,
    /// Defense method; ignored when `--row` is given.
    #[arg(long, value_parser = parse_method, default_value = "no-defense")]
    method: MethodSpec,
    /// Adversary targeted by `--method optimal`.
    #[arg(long, value_enum, default_value = "s-dist")]
    adversary: AdversaryArg,
    /// Defended row CSV.
    #[arg(long, value_parser = existing_file)]
    row: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// CSV `method,accuracy,recall,f1,n_train,n_test,seed`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchSebArgs {
    /// Comma-separated `SITESxMAXSIZE` pairs.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, required = true)]
    sizes: Vec<(usize, u32)>,
    #[arg(long, value_delimiter = ',', value_enum, default_values = ["exact", "embed", "approx"])]
    methods: Vec<SebArg>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Constrain site 0 to non-negative padding instead of the full simplex.
    #[arg(long)]
    padding: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// CSV `n_sites,n_observables,method,seconds,radius,capacity`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AdversaryArg {
    ExactGain,
    ExactLoss,
    SDist,
    SDistLoss,
    PGain,
    PLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeasibleArg {
    Simplex,
    /// Rows reachable by padding the secret's own row upward.
    Padding,
    Constraints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SebArg {
    Exact,
    Embed,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalModeArg {
    FixedPrior,
    Capacity,
}

/// A method as named on the command line; `optimal` and `seb-approx` are
/// completed from other flags.
#[derive(Debug, Clone, PartialEq)]
enum MethodSpec {
    Optimal,
    Fixed(Method),
    SebApprox(Option<f64>),
}

enum Failure {
    Usage(ErrorKind, String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(ErrorKind::ArgumentConflict, msg.into()))
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file `{s}`"))
    }
}

fn parse_size(s: &str) -> Result<(usize, u32), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected SITESxMAXSIZE, got `{s}`"))?;
    let n = a.parse().map_err(|_| format!("bad site count in `{s}`"))?;
    let m = b.parse().map_err(|_| format!("bad size in `{s}`"))?;
    Ok((n, m))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let bad = || format!("expected LO,HI, got `{s}`");
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_method(s: &str) -> Result<MethodSpec, String> {
    let fixed = |m| Ok(MethodSpec::Fixed(m));
    match s {
        "optimal" => Ok(MethodSpec::Optimal),
        "optimal-capacity" => fixed(Method::OptimalCapacityExact),
        "convex-feasible" => fixed(Method::ConvexFeasible),
        "no-defense" => fixed(Method::Baseline(Baseline::NoDefense)),
        "average" => fixed(Method::Baseline(Baseline::Average)),
        "weighted-average" => fixed(Method::Baseline(Baseline::WeightedAverage)),
        "copy" => fixed(Method::Baseline(Baseline::Copy(CopyRule::MaxPrior))),
        "copy-min-capacity" => fixed(Method::Baseline(Baseline::Copy(CopyRule::MinCapacity(
            CapacityCriterion::SDistinguish,
        )))),
        "pad" => fixed(Method::Baseline(Baseline::PadMultiple(DEFAULT_PAD_BLOCK))),
        "seb-exact" => fixed(Method::Seb(SebMethod::ExactLp)),
        "seb-embed" => fixed(Method::Seb(SebMethod::EmbeddingLp)),
        "seb-approx" => Ok(MethodSpec::SebApprox(None)),
        _ => {
            if let Some(k) = s.strip_prefix("pad-") {
                let k: u32 = k.parse().ok().filter(|&k| k > 0).ok_or_else(|| format!("bad block in `{s}`"))?;
                return fixed(Method::Baseline(Baseline::PadMultiple(k)));
            }
            if let Some(e) = s.strip_prefix("seb-approx-") {
                let e: f64 = e.parse().map_err(|_| format!("bad epsilon in `{s}`"))?;
                return Ok(MethodSpec::SebApprox(Some(e)));
            }
            Err(format!("unknown method `{s}`"))
        }
    }
}

impl MethodSpec {
    fn resolve(&self, adversary: &Adversary, epsilon: f64) -> Method {
        match self {
            MethodSpec::Optimal => Method::OptimalFixedPrior(adversary.clone()),
            MethodSpec::SebApprox(e) => Method::Seb(SebMethod::Approx(e.unwrap_or(epsilon))),
            MethodSpec::Fixed(Method::Baseline(Baseline::Copy(CopyRule::MinCapacity(_)))) => {
                let criterion = match adversary.kind {
                    AdversaryKind::ExactGuess => CapacityCriterion::ExactGuess,
                    _ => CapacityCriterion::SDistinguish,
                };
                Method::Baseline(Baseline::Copy(CopyRule::MinCapacity(criterion)))
            }
            MethodSpec::Fixed(m) => m.clone(),
        }
    }
}

fn seb_method(arg: SebArg, epsilon: f64) -> SebMethod {
    match arg {
        SebArg::Exact => SebMethod::ExactLp,
        SebArg::Embed => SebMethod::EmbeddingLp,
        SebArg::Approx => SebMethod::Approx(epsilon),
    }
}

fn adversary_name(arg: AdversaryArg) -> &'static str {
    match arg {
        AdversaryArg::ExactGain => "exact-gain",
        AdversaryArg::ExactLoss => "exact-loss",
        AdversaryArg::SDist => "s-dist",
        AdversaryArg::SDistLoss => "s-dist-loss",
        AdversaryArg::PGain => "p-gain",
        AdversaryArg::PLoss => "p-loss",
    }
}

/// Builds the adversary; `secret` is needed by s-distinguishing ones.
fn build_adversary(
    channel: &Channel,
    arg: AdversaryArg,
    predicate: &[String],
    secret: Option<usize>,
) -> CliResult<Adversary> {
    let mode = match arg {
        AdversaryArg::ExactGain | AdversaryArg::SDist | AdversaryArg::PGain => Mode::Gain,
        _ => Mode::Loss,
    };
    match arg {
        AdversaryArg::ExactGain | AdversaryArg::ExactLoss => Ok(Adversary::exact(mode)),
        AdversaryArg::SDist | AdversaryArg::SDistLoss => match secret {
            Some(s) => Ok(Adversary::s_distinguish(s, mode)),
            None => Err(Failure::Usage(
                ErrorKind::MissingRequiredArgument,
                "--secret is required for s-distinguishing adversaries".into(),
            )),
        },
        AdversaryArg::PGain | AdversaryArg::PLoss => {
            if predicate.is_empty() {
                return Err(Failure::Usage(
                    ErrorKind::MissingRequiredArgument,
                    "--predicate is required for p-gain and p-loss".into(),
                ));
            }
            let subset = predicate
                .iter()
                .map(|id| channel.secret_index(id))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Adversary::predicate(subset, mode))
        }
    }
}

fn load_prior_opt(args: &PriorArgs, channel: &Channel) -> CliResult<Option<Prior>> {
    if args.from_visits && args.prior.is_none() {
        return usage("--from-visits needs --prior");
    }
    Ok(match &args.prior {
        Some(p) => Some(io::load_prior(p, channel.secret_ids(), args.from_visits)?),
        None => None,
    })
}

fn require_prior(args: &PriorArgs, channel: &Channel) -> CliResult<Prior> {
    load_prior_opt(args, channel)?.map_or_else(
        || {
            Err(Failure::Usage(
                ErrorKind::MissingRequiredArgument,
                "--prior is required".into(),
            ))
        },
        Ok,
    )
}

fn build_feasible(args: &FeasibleArgs, channel: &Channel, s: usize) -> CliResult<FeasibleSet> {
    if args.constraints.is_some() && args.feasible != FeasibleArg::Constraints {
        return usage("--constraints needs --feasible constraints");
    }
    Ok(match args.feasible {
        FeasibleArg::Simplex => FeasibleSet::FullSimplex,
        FeasibleArg::Padding => FeasibleSet::padding(channel.row(s).to_vec())?,
        FeasibleArg::Constraints => {
            let path = args.constraints.as_ref().expect("enforced by clap");
            FeasibleSet::linear(io::load_constraints(path, channel.observable_ids())?)?
        }
    })
}

/// The channel with `row` (if given) substituted for the secret's row.
fn channel_with_row(channel: Channel, secret: Option<usize>, row: Option<&Path>) -> CliResult<Channel> {
    match (secret, row) {
        (Some(s), Some(path)) => {
            let q = io::load_row(path, channel.observable_ids())?;
            Ok(channel.with_row(s, &q)?)
        }
        _ => Ok(channel),
    }
}

fn prior_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let res = (|| {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    res.map_err(|e| Failure::Domain(Error::io(path, e)))
}

fn save_row_opt(path: Option<&PathBuf>, channel: &Channel, q: &[f64]) -> CliResult<()> {
    if let Some(p) = path {
        io::save_row(p, channel.observable_ids(), q)?;
    }
    Ok(())
}

fn witness_text(channel: &Channel, prior: &Prior) -> String {
    let mut out = String::new();
    for (id, p) in channel.secret_ids().iter().zip(prior.probs()) {
        if *p > 0.0 {
            if !out.is_empty() {
                out.push(';');
            }
            let _ = write!(out, "{id}={}", fmt_float(*p));
        }
    }
    out
}

fn run_leakage(a: LeakageArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = a.secret.as_deref().map(|id| channel.secret_index(id)).transpose()?;
    let channel = channel_with_row(channel, s, a.row.as_deref())?;
    let prior = require_prior(&a.prior, &channel)?;
    let adv = build_adversary(&channel, a.adversary.adversary, &a.adversary.predicate, s)?;
    let before = prior_value(&prior, &adv)?;
    let after = posterior_value(&prior, &channel, &adv)?;
    let value = leakage(&prior, &channel, &adv)?;
    let name = adversary_name(a.adversary.adversary);
    if let Some(out) = &a.output {
        write_csv(
            out,
            &["adversary", "prior_value", "posterior_value", "leakage"],
            &[vec![name.into(), fmt_float(before), fmt_float(after), fmt_float(value)]],
        )?;
    }
    Ok(format!("{name} leakage {}", fmt_float(value)))
}

fn run_capacity(a: CapacityArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = a.secret.as_deref().map(|id| channel.secret_index(id)).transpose()?;
    let channel = channel_with_row(channel, s, a.row.as_deref())?;
    let adv = build_adversary(&channel, a.adversary.adversary, &a.adversary.predicate, s)?;
    let cap = capacity(&channel, &adv)?;
    let name = adversary_name(a.adversary.adversary);
    if let Some(out) = &a.output {
        write_csv(
            out,
            &["adversary", "capacity", "witness"],
            &[vec![name.into(), fmt_float(cap.value), witness_text(&channel, &cap.witness)]],
        )?;
    }
    Ok(format!("{name} capacity {}", fmt_float(cap.value)))
}

fn run_optimize(a: OptimizeArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    let prior = require_prior(&a.prior, &channel)?;
    let adv = build_adversary(&channel, a.adversary.adversary, &a.adversary.predicate, Some(s))?;
    let feasible = build_feasible(&a.feasible, &channel, s)?;
    let name = a.prior.prior.as_deref().map(prior_name).unwrap_or_default();
    let priors = [(name, prior)];
    let method = Method::OptimalFixedPrior(adv.clone());
    let row = row_for(&method, &channel, s, Some(&priors[0].1), &feasible)?.expect("optimum always exists");
    save_row_opt(a.row_output.as_ref(), &channel, &row.q)?;
    let table = evaluate(
        &channel,
        s,
        &feasible,
        &[method],
        EvalMode::FixedPrior { adversary: &adv, priors: &priors },
        1,
    )?;
    if let Some(out) = &a.output {
        io_save_results(out, &table)?;
    }
    let ResultsTable::Leakage(rows) = &table else { unreachable!() };
    Ok(format!(
        "optimal row for {}: leakage {}, posterior vulnerability {}",
        a.secret.secret,
        fmt_float(rows[0].leakage),
        fmt_float(rows[0].posterior_vulnerability)
    ))
}

fn io_save_results(path: &Path, table: &ResultsTable) -> CliResult<()> {
    Ok(save_results(path, table)?)
}

fn run_optimize_capacity(a: OptimizeCapacityArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    let adv = build_adversary(&channel, a.adversary.adversary, &a.adversary.predicate, Some(s))?;
    let feasible = build_feasible(&a.feasible, &channel, s)?;
    let method = Method::OptimalCapacityExact;
    let row = row_for(&method, &channel, s, None, &feasible)?.expect("optimum always exists");
    save_row_opt(a.row_output.as_ref(), &channel, &row.q)?;
    let table = evaluate(&channel, s, &feasible, &[method], EvalMode::Capacity { adversary: &adv }, 1)?;
    if let Some(out) = &a.output {
        io_save_results(out, &table)?;
    }
    let ResultsTable::Capacity(rows) = &table else { unreachable!() };
    Ok(format!(
        "capacity-optimal row for {}: {} capacity {}",
        a.secret.secret,
        adversary_name(a.adversary.adversary),
        fmt_float(rows[0].capacity)
    ))
}

fn run_seb(a: SebArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    let feasible = build_feasible(&a.feasible, &channel, s)?;
    let method = seb_method(a.method, a.epsilon);
    let sol = seb(&channel.other_rows(s), &feasible, method)?;
    let defended = channel.with_row(s, &sol.center)?;
    let cap = capacity(&defended, &Adversary::s_distinguish(s, Mode::Gain))?.value;
    // Other rows skip `s`, so indices at or past it shift by one.
    let far = sol.farthest_index + usize::from(sol.farthest_index >= s);
    let far_id = &channel.secret_ids()[far];
    let label = Method::Seb(method).to_string();
    save_row_opt(a.row_output.as_ref(), &channel, &sol.center)?;
    if let Some(out) = &a.output {
        write_csv(
            out,
            &["method", "radius", "capacity", "farthest"],
            &[vec![label.clone(), fmt_float(sol.radius), fmt_float(cap), far_id.clone()]],
        )?;
    }
    Ok(format!("{label}: radius {}, s-dist capacity {}", fmt_float(sol.radius), fmt_float(cap)))
}

fn run_baseline(a: BaselineArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    let prior = load_prior_opt(&a.prior, &channel)?;
    let feasible = build_feasible(&a.feasible, &channel, s)?;
    let adv = Adversary::s_distinguish(s, Mode::Gain);
    let method = a.method.resolve(&adv, DEFAULT_EPSILON);
    if !matches!(method, Method::Baseline(_)) {
        return usage(format!("`{method}` is not a baseline"));
    }
    let row = row_for(&method, &channel, s, prior.as_ref(), &feasible)?.expect("baselines always exist");
    save_row_opt(a.output.as_ref(), &channel, &row.q)?;
    let defended = channel.with_row(s, &row.q)?;
    let cap = capacity(&defended, &adv)?.value;
    let projected = if row.diagnostics.projected { ", projected" } else { "" };
    Ok(format!("{method} row for {}: s-dist capacity {}{projected}", a.secret.secret, fmt_float(cap)))
}

fn run_pad_strategy(a: PadStrategyArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    let q = io::load_row(&a.row, channel.observable_ids())?;
    let strategy = extract_strategy(channel.observable_ids(), channel.row(s), &q)?;
    if let Some(out) = &a.output {
        strategy.write_csv(out)?;
    }
    let moved: f64 = strategy
        .transport()
        .iter()
        .enumerate()
        .map(|(o, row)| row[o + 1..].iter().sum::<f64>())
        .sum();
    Ok(format!("padding strategy for {}: moved mass {}", a.secret.secret, fmt_float(moved)))
}

fn run_gen_sites(a: GenSitesArgs) -> CliResult<String> {
    let mut cfg = SyntheticConfig {
        n_sites: a.sites,
        max_size: a.max_size,
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    if let Some(spread) = a.spread {
        cfg.spread = spread;
    }
    if let Some(range) = a.median_range {
        cfg.median_range = range;
    }
    let corpus = synthetic_corpus(&cfg)?;
    let c = &corpus.channel;
    if let Some(out) = &a.output {
        io::save_channel(out, c)?;
    }
    let (name, prior) = corpus
        .priors
        .iter()
        .find(|(n, _)| n == "traffic")
        .or_else(|| corpus.priors.first())
        .expect("corpus carries a prior");
    if let Some(out) = &a.prior_output {
        io::save_prior(out, c.secret_ids(), prior)?;
    }
    Ok(format!(
        "{} sites over {} sizes, seed {}, {name} prior",
        c.n_secrets(),
        c.n_observables(),
        cfg.seed
    ))
}

fn run_evaluate(a: EvaluateArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    let adv = build_adversary(&channel, a.adversary.adversary, &a.adversary.predicate, Some(s))?;
    let feasible = build_feasible(&a.feasible, &channel, s)?;
    let methods: Vec<Method> = a.methods.iter().map(|m| m.resolve(&adv, a.epsilon)).collect();
    let mut priors = Vec::new();
    for p in &a.prior {
        let name = prior_name(p);
        if priors.iter().any(|(n, _)| *n == name) {
            return usage(format!("two priors are named `{name}`"));
        }
        priors.push((name, io::load_prior(p, channel.secret_ids(), a.from_visits)?));
    }
    let mode = match a.mode {
        EvalModeArg::FixedPrior => {
            if priors.is_empty() {
                return Err(Failure::Usage(
                    ErrorKind::MissingRequiredArgument,
                    "--prior is required in fixed-prior mode".into(),
                ));
            }
            EvalMode::FixedPrior { adversary: &adv, priors: &priors }
        }
        EvalModeArg::Capacity => {
            if !priors.is_empty() {
                return usage("capacity mode takes no prior");
            }
            EvalMode::Capacity { adversary: &adv }
        }
    };
    let jobs = usize::try_from(a.jobs).unwrap_or(usize::MAX);
    let table = evaluate(&channel, s, &feasible, &methods, mode, jobs)?;
    if let Some(out) = &a.output {
        io_save_results(out, &table)?;
    }
    let n = match &table {
        ResultsTable::Leakage(r) => r.len(),
        ResultsTable::Capacity(r) => r.len(),
    };
    Ok(format!("{n} result rows for {} methods", methods.len()))
}

/// Probability one half on `s`, the rest spread evenly.
fn attacker_prior(n: usize, s: usize) -> CliResult<Prior> {
    let rest = 0.5 / (n - 1) as f64;
    Ok(Prior::new((0..n).map(|t| if t == s { 0.5 } else { rest }).collect())?)
}

fn run_attack(a: AttackArgs) -> CliResult<String> {
    let channel = io::load_channel(&a.channel.channel)?;
    let s = channel.secret_index(&a.secret.secret)?;
    if channel.n_secrets() < 2 {
        return Err(Error::TooFewSecrets { required: 2, found: channel.n_secrets() }.into());
    }
    let prior = match load_prior_opt(&a.prior, &channel)? {
        Some(p) => p,
        None => attacker_prior(channel.n_secrets(), s)?,
    };
    let feasible = build_feasible(&a.feasible, &channel, s)?;
    let (label, q) = match &a.row {
        Some(path) => (prior_name(path), io::load_row(path, channel.observable_ids())?),
        None => {
            let adv = build_adversary(&channel, a.adversary, &[], Some(s))?;
            let method = a.method.resolve(&adv, a.epsilon);
            let row: Option<RowStrategy> = row_for(&method, &channel, s, Some(&prior), &feasible)?;
            let row = row.ok_or(Error::Infeasible)?;
            (method.to_string(), row.q)
        }
    };
    let report = if a.feasible.feasible == FeasibleArg::Padding {
        let strategy = extract_strategy(channel.observable_ids(), channel.row(s), &q)?;
        simulate_attack(&channel, s, Defense::Padding(&strategy), &prior, a.samples, a.seed)?
    } else {
        simulate_attack(&channel, s, Defense::Row(&q), &prior, a.samples, a.seed)?
    };
    let summary = format!(
        "{label}: accuracy {}, recall {}, f1 {}",
        fmt_float(report.accuracy),
        fmt_float(report.recall),
        fmt_float(report.f1)
    );
    if let Some(out) = &a.output {
        save_attack_reports(out, &[(label, report)])?;
    }
    Ok(summary)
}

fn run_bench_seb(a: BenchSebArgs) -> CliResult<String> {
    let methods: Vec<SebMethod> = a.methods.iter().map(|&m| seb_method(m, a.epsilon)).collect();
    let rows = bench_seb(&a.sizes, &methods, a.padding, a.seed)?;
    if let Some(out) = &a.output {
        save_bench(out, &rows)?;
    }
    let total: f64 = rows.iter().map(|r| r.seconds).sum();
    Ok(format!("{} timings, {:.3} s total", rows.len(), total))
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Leakage(a) => run_leakage(a),
        Command::Capacity(a) => run_capacity(a),
        Command::Optimize(a) => run_optimize(a),
        Command::OptimizeCapacity(a) => run_optimize_capacity(a),
        Command::Seb(a) => run_seb(a),
        Command::Baseline(a) => run_baseline(a),
        Command::PadStrategy(a) => run_pad_strategy(a),
        Command::GenSites(a) => run_gen_sites(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Attack(a) => run_attack(a),
        Command::BenchSeb(a) => run_bench_seb(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(kind, msg)) => {
            let mut cmd = Cli::command();
            cmd.build();
            let sub = std::env::args().nth(1).and_then(|name| cmd.find_subcommand_mut(&name).cloned());
            let _ = sub.unwrap_or(cmd).error(kind, msg).print();
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        let adv = Adversary::exact(Mode::Gain);
        for name in [
            "optimal-capacity", "convex-feasible", "no-defense", "average", "weighted-average", "copy",
            "copy-min-capacity", "pad-5", "seb-exact", "seb-embed", "seb-approx-0.1",
        ] {
            let m = parse_method(name).unwrap().resolve(&adv, 0.5);
            assert_eq!(m.to_string(), name);
        }
        assert_eq!(parse_method("seb-approx").unwrap().resolve(&adv, 0.2).to_string(), "seb-approx-0.2");
        assert_eq!(parse_method("pad").unwrap().resolve(&adv, 0.2).to_string(), "pad-5");
        assert!(parse_method("pad-0").is_err());
        assert!(parse_method("seb").is_err());
    }

    #[test]
    fn copy_criterion_follows_the_adversary() {
        let spec = parse_method("copy-min-capacity").unwrap();
        let exact = spec.resolve(&Adversary::exact(Mode::Gain), DEFAULT_EPSILON);
        let sdist = spec.resolve(&Adversary::s_distinguish(0, Mode::Gain), DEFAULT_EPSILON);
        assert_eq!(exact, Method::Baseline(Baseline::Copy(CopyRule::MinCapacity(CapacityCriterion::ExactGuess))));
        assert_eq!(sdist, Method::Baseline(Baseline::Copy(CopyRule::MinCapacity(CapacityCriterion::SDistinguish))));
    }

    #[test]
    fn sizes_and_ranges() {
        assert_eq!(parse_size("20x300"), Ok((20, 300)));
        assert!(parse_size("20-300").is_err());
        assert_eq!(parse_range("60, 120"), Ok((60.0, 120.0)));
        assert!(parse_range("60").is_err());
    }

    #[test]
    fn attacker_prior_puts_half_on_the_secret() {
        let p = attacker_prior(5, 2).ok().unwrap();
        assert_eq!(p.probs(), &[0.125, 0.125, 0.5, 0.125, 0.125]);
    }

    #[test]
    fn flags_are_consistent() {
        Cli::command().debug_assert();
    }
}
