use std::path::Path;

use ciq_core::pipeline::BetaRow;
use ciq_core::{Error, FactorKey, Month, Result, RollingFactorSeries};

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Records of a CSV with exactly the given header, each with its line number.
fn records(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let csv_err = |e: csv::Error| parse_error(path, e.position().map_or(0, |p| p.line()), e.to_string());
    let found = reader.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_error(path, 1, format!("expected header '{}'", header.join(","))));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(csv_err)?;
            Ok((r.position().map_or(0, |p| p.line()), r))
        })
        .collect()
}

fn month(path: &Path, line: u64, s: &str) -> Result<Month> {
    s.parse().map_err(|e: ciq_core::calendar::MonthParseError| parse_error(path, line, e.to_string()))
}

fn number(path: &Path, line: u64, s: &str, what: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(path, line, format!("invalid {what} '{s}'"))),
    }
}

/// Factor series written by `estimate-factors`, in order of first appearance.
pub fn read_series(path: &Path) -> Result<Vec<RollingFactorSeries>> {
    let mut out: Vec<RollingFactorSeries> = Vec::new();
    for (line, r) in records(path, &["date", "tau", "level", "diff"])? {
        let date = month(path, line, &r[0])?;
        let key: FactorKey = r[1].parse().expect("infallible");
        let level = number(path, line, &r[2], "level")?;
        let k = match out.iter().position(|s| s.key == key) {
            Some(k) => k,
            None => {
                out.push(RollingFactorSeries {
                    key,
                    dates: Vec::new(),
                    levels: Vec::new(),
                    diffs: Vec::new(),
                    flips: 0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[k];
        if let Some(&prev) = s.dates.last() {
            if date != prev.succ() {
                return Err(parse_error(path, line, format!("{date} does not follow {prev} for {}", s.key)));
            }
            s.diffs.push(number(path, line, &r[3], "diff")?);
        }
        s.dates.push(date);
        s.levels.push(level);
    }
    if out.is_empty() {
        return Err(parse_error(path, 1, "no factor rows"));
    }
    Ok(out)
}

/// Exposure rows written as `betas.csv`.
pub fn read_betas(path: &Path) -> Result<Vec<BetaRow>> {
    records(path, &["window_end", "asset_id", "key", "beta", "n_obs"])?
        .into_iter()
        .map(|(line, r)| {
            Ok(BetaRow {
                window_end: month(path, line, &r[0])?,
                asset: r[1].to_string(),
                key: r[2].parse().expect("infallible"),
                beta: number(path, line, &r[3], "beta")?,
                n_obs: r[4]
                    .parse()
                    .map_err(|_| parse_error(path, line, format!("invalid n_obs '{}'", &r[4])))?,
            })
        })
        .collect()
}
