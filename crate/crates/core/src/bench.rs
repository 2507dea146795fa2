//! Runtime and quality of the SEB solvers on synthetic corpora.
//!
//! Wall-clock times are hardware-bound; every other column is deterministic
//! for a given seed.

use std::path::Path;
use std::time::Instant;

use crate::corpus::{synthetic_corpus, SyntheticConfig};
use crate::error::{Error, Result};
use crate::feasibility::FeasibleSet;
use crate::io::{csv_writer, fmt_float};
use crate::optimizer::Method;
use crate::seb::{seb, SebMethod, EMBEDDING_LP_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_sites: usize,
    pub n_observables: usize,
    pub method: SebMethod,
    pub seconds: f64,
    pub radius: f64,
    /// s-distinguishing gain capacity of the defended channel.
    pub capacity: f64,
}

/// Times every method on a synthetic corpus per `(n_sites, n_observables)`
/// size, with site 0 defended under non-negative padding when `padding` is
/// set and over the full simplex otherwise. The embedding LP is skipped
/// above its dimension cap.
pub fn bench_seb(sizes: &[(usize, u32)], methods: &[SebMethod], padding: bool, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &(n_sites, max_size) in sizes {
        let hi = (max_size as f64 * 0.4).max(1.0);
        let cfg = SyntheticConfig {
            n_sites,
            max_size,
            seed,
            median_range: ((hi / 2.0).max(1.0), hi),
            ..SyntheticConfig::default()
        };
        let corpus = synthetic_corpus(&cfg)?;
        let c = &corpus.channel;
        let points = c.other_rows(0);
        let feasible = if padding {
            FeasibleSet::padding(c.row(0).to_vec())?
        } else {
            FeasibleSet::FullSimplex
        };
        for &method in methods {
            if method == SebMethod::EmbeddingLp && c.n_observables() > EMBEDDING_LP_CAP {
                continue;
            }
            let start = Instant::now();
            let sol = seb(&points, &feasible, method)?;
            let seconds = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                n_sites,
                n_observables: c.n_observables(),
                method,
                seconds,
                radius: sol.radius,
                capacity: 1.0 + 0.5 * sol.radius,
            });
        }
    }
    Ok(rows)
}

/// Writes `n_sites,n_observables,method,seconds,radius,capacity` rows.
pub fn save_bench(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res = (|| {
        w.write_record(["n_sites", "n_observables", "method", "seconds", "radius", "capacity"])?;
        for r in rows {
            w.write_record([
                r.n_sites.to_string(),
                r.n_observables.to_string(),
                Method::Seb(r.method).to_string(),
                fmt_float(r.seconds),
                fmt_float(r.radius),
                fmt_float(r.capacity),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_cover_sizes_and_methods() {
        let methods = [SebMethod::ExactLp, SebMethod::EmbeddingLp, SebMethod::Approx(0.2)];
        let rows = bench_seb(&[(5, 8), (6, 40)], &methods, true, 1).unwrap();
        // The embedding LP only runs on the small size.
        assert_eq!(rows.len(), 5);
        assert!((rows[0].radius - rows[1].radius).abs() < 1e-7);
        for r in &rows {
            assert!(r.radius >= rows.iter().find(|x| x.n_sites == r.n_sites).unwrap().radius - 1e-7);
            assert!((r.capacity - 1.0 - r.radius / 2.0).abs() < 1e-15);
        }
    }
}
