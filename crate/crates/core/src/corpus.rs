//! Site corpora: the click-depth page model, bundled traffic data, and priors.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::io::parse_key_values;
use crate::qif::{check_distribution, Channel, Prior};

/// Probability of landing at click depth 0 (home page) through 4.
pub const DEFAULT_DEPTH_WEIGHTS: [f64; 5] = [0.3, 0.25, 0.2, 0.15, 0.1];
/// One home page, ten pages at every deeper level.
pub const DEFAULT_PAGES_PER_DEPTH: [usize; 5] = [1, 10, 10, 10, 10];
/// Page sizes are whole KB in `1..=DEFAULT_MAX_SIZE`.
pub const DEFAULT_MAX_SIZE: u32 = 300;

const BUNDLED_VISITS: &str = include_str!("../data/visits.txt");

/// Site labels and monthly visits (millions) of the bundled traffic table.
/// The first entry is the defended site.
pub fn bundled_visits() -> Vec<(String, f64)> {
    parse_key_values(BUNDLED_VISITS, Path::new("data/visits.txt")).expect("bundled visits parse")
}

/// Distribution over `observables` of the size of a visited page.
///
/// Depth `d` is chosen with probability `depth_weights[d]`, then one of its
/// `pages_per_depth[d]` pages uniformly; `size_sampler` draws the size of each
/// page once, so the result is a mixture of point masses.
pub fn generate_site<F>(
    depth_weights: &[f64],
    pages_per_depth: &[usize],
    observables: &[u32],
    mut size_sampler: F,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: FnMut(&mut ChaCha8Rng, usize) -> u32,
{
    if depth_weights.is_empty() {
        return Err(Error::EmptySet);
    }
    if pages_per_depth.len() != depth_weights.len() {
        return Err(Error::LengthMismatch {
            expected: depth_weights.len(),
            found: pages_per_depth.len(),
        });
    }
    check_distribution("depth weights", depth_weights)?;
    if pages_per_depth.contains(&0) {
        return Err(Error::InvalidParameter("every depth needs at least one page".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dist = vec![0.0; observables.len()];
    for (depth, (&w, &pages)) in depth_weights.iter().zip(pages_per_depth).enumerate() {
        for _ in 0..pages {
            let size = size_sampler(&mut rng, depth);
            let idx = observables
                .iter()
                .position(|&o| o == size)
                .ok_or_else(|| Error::UnknownObservable(size.to_string()))?;
            dist[idx] += w / pages as f64;
        }
    }
    Ok(dist)
}

/// A channel of sites over page sizes with named priors.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCorpus {
    pub channel: Channel,
    pub priors: Vec<(String, Prior)>,
    /// Monthly visits per site, when known.
    pub visits: Option<Vec<f64>>,
}

impl SiteCorpus {
    pub fn prior(&self, name: &str) -> Option<&Prior> {
        self.priors.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

/// Prior proportional to visit counts.
pub fn traffic_prior(visits: &[f64]) -> Result<Prior> {
    Prior::from_weights(visits)
}

/// Half the mass on `s`; the other half split across the first `n` other
/// sites in proportion to their visits.
pub fn one_on_n_prior(visits: &[f64], s: usize, n: usize) -> Result<Prior> {
    if s >= visits.len() {
        return Err(Error::SecretOutOfRange { index: s, len: visits.len() });
    }
    if n == 0 || n >= visits.len() {
        return Err(Error::InvalidParameter(format!(
            "n must lie in 1..={}, got {n}",
            visits.len() - 1
        )));
    }
    let chosen: Vec<usize> = (0..visits.len()).filter(|&t| t != s).take(n).collect();
    let total: f64 = chosen.iter().map(|&t| visits[t]).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("selected sites have no visits".into()));
    }
    let mut w = vec![0.0; visits.len()];
    w[s] = 0.5;
    for &t in &chosen {
        w[t] = 0.5 * visits[t] / total;
    }
    // Renormalize so rounding never leaves the sum off one.
    Prior::from_weights(&w)
}

/// Parameters of the synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_sites: usize,
    pub max_size: u32,
    pub seed: u64,
    pub depth_weights: Vec<f64>,
    pub pages_per_depth: Vec<usize>,
    /// Range of per-site median page sizes.
    pub median_range: (f64, f64),
    /// Log-scale spread of page sizes within a site.
    pub spread: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_sites: 20,
            max_size: DEFAULT_MAX_SIZE,
            seed: 7,
            depth_weights: DEFAULT_DEPTH_WEIGHTS.to_vec(),
            pages_per_depth: DEFAULT_PAGES_PER_DEPTH.to_vec(),
            median_range: (60.0, 120.0),
            spread: 1.0,
        }
    }
}

/// Seeded synthetic corpus. Sites take the bundled labels (site 0 is the
/// defended one) and further sites are named `site-NNN`. Every site gets a
/// median page size; pages scatter log-normally around it. The corpus carries
/// a `uniform` prior and, when all sites have bundled visits, a `traffic` one.
pub fn synthetic_corpus(cfg: &SyntheticConfig) -> Result<SiteCorpus> {
    if cfg.n_sites < 2 {
        return Err(Error::TooFewSecrets { required: 2, found: cfg.n_sites });
    }
    if cfg.max_size == 0 || !(cfg.spread >= 0.0) {
        return Err(Error::InvalidParameter("max size and spread must be positive".into()));
    }
    let (lo, hi) = cfg.median_range;
    if !(lo >= 1.0 && hi >= lo && hi <= cfg.max_size as f64) {
        return Err(Error::InvalidParameter(format!("median range ({lo}, {hi}) is invalid")));
    }
    let observables: Vec<u32> = (1..=cfg.max_size).collect();
    let bundled = bundled_visits();
    let mut names = Vec::with_capacity(cfg.n_sites);
    let mut visits = Vec::with_capacity(cfg.n_sites);
    for k in 0..cfg.n_sites {
        match bundled.get(k) {
            Some((name, v)) => {
                names.push(name.clone());
                visits.push(Some(*v));
            }
            None => {
                names.push(format!("site-{:03}", k + 1));
                visits.push(None);
            }
        }
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n_sites);
    for _ in 0..cfg.n_sites {
        let median: f64 = master.gen_range(lo..=hi);
        let site_seed: u64 = master.gen();
        let law = LogNormal::new(median.ln(), cfg.spread)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let max = cfg.max_size;
        let row = generate_site(
            &cfg.depth_weights,
            &cfg.pages_per_depth,
            &observables,
            |rng, _| (law.sample(rng).round() as u32).clamp(1, max),
            site_seed,
        )?;
        rows.push(row);
    }
    let channel = Channel::new(names, observables, rows)?;
    let mut priors = vec![("uniform".to_string(), Prior::uniform(cfg.n_sites)?)];
    let visits: Option<Vec<f64>> = visits.into_iter().collect();
    if let Some(v) = &visits {
        priors.push(("traffic".to_string(), traffic_prior(v)?));
    }
    Ok(SiteCorpus { channel, priors, visits })
}
