use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use nalgebra::DMatrix;

use crate::calendar::Month;
use crate::error::{Error, Result};

/// Monthly returns of a set of assets. Missing observations are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Consecutive months.
    pub dates: Vec<Month>,
    /// Sorted asset identifiers.
    pub assets: Vec<String>,
    /// T x N simple returns.
    pub returns: DMatrix<f64>,
    pub market_caps: Option<DMatrix<f64>>,
    pub prices: Option<DMatrix<f64>>,
}

impl ReturnPanel {
    pub fn new(
        dates: Vec<Month>,
        assets: Vec<String>,
        returns: DMatrix<f64>,
        market_caps: Option<DMatrix<f64>>,
        prices: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let shape = (dates.len(), assets.len());
        if returns.shape() != shape {
            return Err(Error::dimension("returns do not match dates x assets"));
        }
        for m in [&market_caps, &prices].into_iter().flatten() {
            if m.shape() != shape {
                return Err(Error::dimension("auxiliary matrix does not match dates x assets"));
            }
        }
        if dates.windows(2).any(|w| w[1] != w[0].succ()) {
            return Err(Error::validation("panel dates must be consecutive months"));
        }
        if returns.iter().any(|r| !r.is_nan() && !(*r > -1.0 && r.is_finite())) {
            return Err(Error::validation("returns must be finite and above -1"));
        }
        Ok(Self {
            dates,
            assets,
            returns,
            market_caps,
            prices,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Row index of month `m`.
    pub fn date_index(&self, m: Month) -> Option<usize> {
        let first = *self.dates.first()?;
        let k = m.since(first);
        (k >= 0 && (k as usize) < self.dates.len()).then_some(k as usize)
    }

    pub fn first_date(&self) -> Month {
        self.dates[0]
    }

    pub fn last_date(&self) -> Month {
        *self.dates.last().expect("nonempty panel")
    }
}

/// Observed factor returns and the risk-free rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedFactors {
    /// Consecutive months.
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    /// One series per name.
    pub columns: Vec<Vec<f64>>,
    pub risk_free: Vec<f64>,
}

impl ObservedFactors {
    pub fn new(dates: Vec<Month>, names: Vec<String>, columns: Vec<Vec<f64>>, risk_free: Vec<f64>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::dimension("factor names and columns differ in count"));
        }
        if risk_free.len() != dates.len() || columns.iter().any(|c| c.len() != dates.len()) {
            return Err(Error::dimension("factor series must match the date count"));
        }
        if dates.windows(2).any(|w| w[1] != w[0].succ()) {
            return Err(Error::validation("factor dates must be consecutive months"));
        }
        if risk_free.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::validation("factor values must be present and finite"));
        }
        Ok(Self {
            dates,
            names,
            columns,
            risk_free,
        })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    /// Column by name, or a configuration error naming the missing column.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::config(format!("factor column '{name}' not found")))
    }

    pub fn date_index(&self, m: Month) -> Option<usize> {
        let first = *self.dates.first()?;
        let k = m.since(first);
        (k >= 0 && (k as usize) < self.dates.len()).then_some(k as usize)
    }

    /// Index range of `len` months starting at `start`, if fully covered.
    pub fn range(&self, start: Month, len: usize) -> Result<std::ops::Range<usize>> {
        let a = self.date_index(start);
        let b = self.date_index(start.add(len as i32 - 1));
        match (a, b) {
            (Some(a), Some(_)) => Ok(a..a + len),
            _ => Err(Error::validation(format!(
                "factors do not cover {} months from {start}",
                len
            ))),
        }
    }

    /// Series aligned to `dates`; NaN where the factors have no observation.
    pub fn aligned(&self, name: &str, dates: &[Month]) -> Result<Vec<f64>> {
        let col = if name == "rf" {
            self.risk_free.as_slice()
        } else {
            self.require(name)?
        };
        Ok(dates
            .iter()
            .map(|&m| self.date_index(m).map_or(f64::NAN, |k| col[k]))
            .collect())
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_error(path, line, e.to_string())
}

fn header_positions(path: &Path, headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| parse_error(path, 1, format!("missing column '{name}'")))
        })
        .collect()
}

fn parse_optional(path: &Path, line: u64, field: &str, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(parse_error(path, line, format!("invalid {name} '{field}'"))),
    }
}

fn parse_month(path: &Path, line: u64, field: &str) -> Result<Month> {
    field
        .parse()
        .map_err(|e: crate::calendar::MonthParseError| parse_error(path, line, e.to_string()))
}

struct PanelRow {
    date: Month,
    asset: String,
    ret: Option<f64>,
    price: Option<f64>,
    cap: Option<f64>,
}

/// Reads a long-format panel CSV (`date,asset_id,ret,price,mktcap`).
///
/// Rows must be ordered by date. A return observed when the price is below
/// `penny_threshold` is treated as missing.
pub fn load_panel(path: &Path, penny_threshold: f64) -> Result<ReturnPanel> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let pos = header_positions(path, &headers, &["date", "asset_id", "ret", "price", "mktcap"])?;

    let mut rows = Vec::new();
    let mut seen: HashMap<(Month, String), u64> = HashMap::new();
    let mut last_date: Option<Month> = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(pos[k]).unwrap_or("");
        let date = parse_month(path, line, field(0))?;
        let asset = field(1).to_string();
        if asset.is_empty() {
            return Err(parse_error(path, line, "empty asset_id"));
        }
        if let Some(prev) = last_date {
            if date < prev {
                return Err(Error::validation(format!(
                    "{}:{line}: date {date} appears after {prev}; rows must be ordered by date",
                    path.display()
                )));
            }
        }
        last_date = Some(date);
        if let Some(first) = seen.insert((date, asset.clone()), line) {
            return Err(Error::validation(format!(
                "{}:{line}: duplicate row for date {date}, asset {asset} (first at line {first})",
                path.display()
            )));
        }
        let ret = parse_optional(path, line, field(2), "ret")?;
        if let Some(r) = ret {
            if r <= -1.0 {
                return Err(parse_error(path, line, format!("return {r} is not above -1")));
            }
        }
        let price = parse_optional(path, line, field(3), "price")?;
        let cap = parse_optional(path, line, field(4), "mktcap")?;
        rows.push(PanelRow {
            date,
            asset,
            ret,
            price,
            cap,
        });
    }
    let (Some(first), Some(last)) = (rows.first().map(|r| r.date), last_date) else {
        return Err(parse_error(path, 1, "panel has no data rows"));
    };

    let assets: Vec<String> = rows
        .iter()
        .map(|r| r.asset.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col: BTreeMap<&str, usize> = assets.iter().enumerate().map(|(j, a)| (a.as_str(), j)).collect();
    let dates = first.range(last.since(first) as usize + 1);
    let shape = (dates.len(), assets.len());
    let mut returns = DMatrix::from_element(shape.0, shape.1, f64::NAN);
    let mut caps = DMatrix::from_element(shape.0, shape.1, f64::NAN);
    let mut prices = DMatrix::from_element(shape.0, shape.1, f64::NAN);
    let (mut any_cap, mut any_price) = (false, false);
    for r in &rows {
        let t = r.date.since(first) as usize;
        let j = col[r.asset.as_str()];
        if let Some(p) = r.price {
            prices[(t, j)] = p;
            any_price = true;
        }
        if let Some(c) = r.cap {
            caps[(t, j)] = c;
            any_cap = true;
        }
        let penny = r.price.is_some_and(|p| p.abs() < penny_threshold);
        if let (Some(ret), false) = (r.ret, penny) {
            returns[(t, j)] = ret;
        }
    }
    ReturnPanel::new(
        dates,
        assets,
        returns,
        any_cap.then_some(caps),
        any_price.then_some(prices),
    )
}

/// Reads a factor CSV (`date,mktrf,smb,hml,umd,rf[,extra...]`).
pub fn load_factors(path: &Path) -> Result<ObservedFactors> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let pos = header_positions(path, &headers, &["date", "rf"])?;
    for name in ["mktrf", "smb", "hml", "umd"] {
        header_positions(path, &headers, &[name])?;
    }
    let value_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h != "date" && *h != "rf")
        .map(|(k, h)| (k, h.to_string()))
        .collect();

    let mut dates: Vec<Month> = Vec::new();
    let mut risk_free = Vec::new();
    let mut columns = vec![Vec::new(); value_cols.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let date = parse_month(path, line, record.get(pos[0]).unwrap_or(""))?;
        if let Some(prev) = dates.last() {
            if date != prev.succ() {
                return Err(Error::validation(format!(
                    "{}:{line}: factor dates must be consecutive months ({date} follows {prev})",
                    path.display()
                )));
            }
        }
        dates.push(date);
        let rf = parse_optional(path, line, record.get(pos[1]).unwrap_or(""), "rf")?
            .ok_or_else(|| parse_error(path, line, "missing rf"))?;
        risk_free.push(rf);
        for (k, (c, name)) in value_cols.iter().enumerate() {
            let v = parse_optional(path, line, record.get(*c).unwrap_or(""), name)?
                .ok_or_else(|| parse_error(path, line, format!("missing {name}")))?;
            columns[k].push(v);
        }
    }
    if dates.is_empty() {
        return Err(parse_error(path, 1, "factor file has no data rows"));
    }
    ObservedFactors::new(
        dates,
        value_cols.into_iter().map(|(_, n)| n).collect(),
        columns,
        risk_free,
    )
}
