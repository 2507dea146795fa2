//! File formats: long-form channel CSV, key-value prior files, and the
//! decimal rendering shared by every writer.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::feasibility::RowConstraint;
use crate::lp::Relation;
use crate::qif::{check_distribution, Channel, Prior};

/// Significant digits of every float written by the crate.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal text that reads back as `round_sig(x)`.
pub fn fmt_float(x: f64) -> String {
    let v = round_sig(x);
    if v == 0.0 {
        "0".to_string()
    } else if v.is_finite() && (1e-6..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.position() {
        Some(pos) => Error::Parse {
            path: path.display().to_string(),
            line: pos.line(),
            column: 1,
            message: err.to_string(),
        },
        None => Error::io(path, err),
    }
}

fn parse_error(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Reads a channel from `secret,observable,probability` rows.
///
/// Secrets keep their order of first appearance; observables are sorted
/// ascending; cells that never appear are zero.
pub fn load_channel(path: &Path) -> Result<Channel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["secret", "observable", "probability"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_error(
            path,
            1,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }

    let mut secrets: Vec<String> = Vec::new();
    let mut secret_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, u32), f64> = HashMap::new();
    let mut observables = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_error(path, line, 1, format!("expected 3 fields, found {}", record.len())));
        }
        let secret = record[0].to_string();
        if secret.is_empty() {
            return Err(parse_error(path, line, 1, "empty secret label"));
        }
        let observable: u32 = match record[1].parse() {
            Ok(o) if o > 0 => o,
            _ => {
                return Err(parse_error(
                    path,
                    line,
                    2,
                    format!("observable `{}` is not a positive integer", &record[1]),
                ))
            }
        };
        let p: f64 = record[2].parse().map_err(|_| {
            parse_error(path, line, 3, format!("probability `{}` is not a number", &record[2]))
        })?;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(parse_error(
                path,
                line,
                3,
                format!("probability {p} for secret `{secret}` is outside [0, 1]"),
            ));
        }
        let idx = *secret_pos.entry(secret.clone()).or_insert_with(|| {
            secrets.push(secret.clone());
            secrets.len() - 1
        });
        if cells.insert((idx, observable), p).is_some() {
            return Err(parse_error(
                path,
                line,
                1,
                format!("duplicate cell for secret `{secret}`, observable {observable}"),
            ));
        }
        observables.insert(observable);
    }
    if secrets.is_empty() {
        return Err(Error::MissingInput(format!("{} has no rows", path.display())));
    }
    let observables: Vec<u32> = observables.into_iter().collect();
    let rows = (0..secrets.len())
        .map(|s| {
            observables
                .iter()
                .map(|&o| cells.get(&(s, o)).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    Channel::new(secrets, observables, rows)
}

/// Writes `channel` in long form. Zero cells are omitted except where a
/// column would otherwise vanish.
pub fn save_channel(path: &Path, channel: &Channel) -> Result<()> {
    let mut w = csv_writer(path)?;
    let write = |w: &mut csv::Writer<_>, s: usize, o: usize, p: f64| {
        w.write_record([
            channel.secret_ids()[s].as_str(),
            &channel.observable_ids()[o].to_string(),
            &fmt_float(p),
        ])
    };
    let res = (|| {
        w.write_record(["secret", "observable", "probability"])?;
        let mut column_seen = vec![false; channel.n_observables()];
        for s in 0..channel.n_secrets() {
            for (o, &p) in channel.row(s).iter().enumerate() {
                if round_sig(p) != 0.0 {
                    write(&mut w, s, o, p)?;
                    column_seen[o] = true;
                }
            }
        }
        for (o, seen) in column_seen.iter().enumerate() {
            if !seen {
                write(&mut w, 0, o, 0.0)?;
            }
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, origin: &Path) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_error(origin, line_no, 1, "expected `secret=value`"));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(parse_error(origin, line_no, 1, "empty secret label"));
        }
        let column = raw.find('=').map_or(1, |c| c + 2);
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| parse_error(origin, line_no, column, format!("`{}` is not a number", value.trim())))?;
        if !value.is_finite() || value < 0.0 {
            return Err(parse_error(origin, line_no, column, format!("value {value} must be non-negative")));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(parse_error(origin, line_no, 1, format!("duplicate secret `{key}`")));
        }
        out.push((key.to_string(), value));
    }
    Ok(out)
}

/// Builds a prior over `secret_ids` from key-value entries. Secrets missing
/// from the entries get zero mass. With `from_visits` the values are
/// normalized; otherwise they must already sum to one.
pub fn prior_from_entries(secret_ids: &[String], entries: &[(String, f64)], from_visits: bool) -> Result<Prior> {
    let mut probs = vec![0.0; secret_ids.len()];
    for (key, value) in entries {
        let idx = secret_ids
            .iter()
            .position(|s| s == key)
            .ok_or_else(|| Error::UnknownSecret(key.clone()))?;
        probs[idx] = *value;
    }
    if from_visits {
        Prior::from_weights(&probs)
    } else {
        Prior::new(probs)
    }
}

pub fn load_prior(path: &Path, secret_ids: &[String], from_visits: bool) -> Result<Prior> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    prior_from_entries(secret_ids, &parse_key_values(&text, path)?, from_visits)
}

/// Writes a prior as `secret=probability` lines.
pub fn save_prior(path: &Path, secret_ids: &[String], prior: &Prior) -> Result<()> {
    let mut w = create(path)?;
    for (id, p) in secret_ids.iter().zip(prior.probs()) {
        writeln!(w, "{id}={}", fmt_float(*p)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a row as `observable,probability` lines, zeros included.
pub fn save_row(path: &Path, observable_ids: &[u32], q: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res = (|| {
        w.write_record(["observable", "probability"])?;
        for (o, p) in observable_ids.iter().zip(q) {
            w.write_record([o.to_string(), fmt_float(*p)])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads an `observable,probability` row over the given observables;
/// omitted observables are zero.
pub fn load_row(path: &Path, observable_ids: &[u32]) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["observable", "probability"] {
        return Err(parse_error(path, 1, 1, "expected header `observable,probability`"));
    }
    let mut q = vec![0.0; observable_ids.len()];
    let mut seen = vec![false; observable_ids.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(parse_error(path, line, 1, "expected 2 fields"));
        }
        let o: u32 = record[0]
            .parse()
            .map_err(|_| parse_error(path, line, 1, format!("`{}` is not a positive integer", &record[0])))?;
        let p: f64 = record[1]
            .parse()
            .map_err(|_| parse_error(path, line, 2, format!("`{}` is not a number", &record[1])))?;
        let idx = observable_ids
            .iter()
            .position(|&x| x == o)
            .ok_or_else(|| Error::UnknownObservable(o.to_string()))?;
        if seen[idx] {
            return Err(parse_error(path, line, 1, format!("duplicate observable {o}")));
        }
        seen[idx] = true;
        q[idx] = p;
    }
    check_distribution(&format!("row in {}", path.display()), &q)?;
    Ok(q)
}

/// Parses linear constraints over a row, one per line:
/// `observable:coefficient ... (<=|>=|=) rhs`. Unlisted observables have
/// coefficient zero; `#` starts a comment.
pub fn parse_constraints(text: &str, origin: &Path, observable_ids: &[u32]) -> Result<Vec<RowConstraint>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.split('#').next().unwrap_or("");
        let tokens: Vec<(usize, &str)> = line
            .split_whitespace()
            .map(|t| (t.as_ptr() as usize - line.as_ptr() as usize + 1, t))
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let Some(rel_at) = tokens.iter().position(|(_, t)| matches!(*t, "<=" | ">=" | "=")) else {
            return Err(parse_error(origin, line_no, 1, "missing relation `<=`, `>=` or `=`"));
        };
        let relation = match tokens[rel_at].1 {
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            _ => Relation::Eq,
        };
        if rel_at + 2 != tokens.len() {
            return Err(parse_error(origin, line_no, tokens[rel_at].0, "expected a single right-hand side"));
        }
        let (col, rhs_text) = tokens[rel_at + 1];
        let rhs: f64 = rhs_text
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| parse_error(origin, line_no, col, format!("`{rhs_text}` is not a number")))?;
        let mut coeffs = vec![0.0; observable_ids.len()];
        for &(col, term) in &tokens[..rel_at] {
            let bad = || parse_error(origin, line_no, col, format!("expected `observable:coefficient`, got `{term}`"));
            let (o, c) = term.split_once(':').ok_or_else(bad)?;
            let o: u32 = o.parse().map_err(|_| bad())?;
            let c: f64 = c.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(bad)?;
            let idx = observable_ids
                .iter()
                .position(|&x| x == o)
                .ok_or_else(|| Error::UnknownObservable(o.to_string()))?;
            coeffs[idx] += c;
        }
        out.push(RowConstraint { coeffs, relation, rhs });
    }
    Ok(out)
}

pub fn load_constraints(path: &Path, observable_ids: &[u32]) -> Result<Vec<RowConstraint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_constraints(&text, path, observable_ids)
}
