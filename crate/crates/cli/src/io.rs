//! Price and allocation CSV files.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use mdport::{Allocation, PriceMatrix};
use nalgebra::DMatrix;

use crate::error::CliError;

/// A loaded price file and the tickers dropped for missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub prices: PriceMatrix,
    pub dropped: Vec<String>,
}

pub fn ingest_prices(path: &Path) -> Result<Ingested, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_prices(file, path)
}

/// Parses `date,TICK1,TICK2,...` rows. Blank cells mark a ticker as
/// missing on that day; such tickers are dropped. Rows are sorted by date.
pub fn read_prices(reader: impl Read, path: &Path) -> Result<Ingested, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Header {
        path: path.into(),
        message: e.to_string(),
    })?;
    let bad_header = |message: String| CliError::Header {
        path: path.into(),
        message,
    };
    if header.get(0) != Some("date") {
        return Err(bad_header(format!(
            "first column must be `date`, found {:?}",
            header.get(0).unwrap_or("")
        )));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if tickers.is_empty() {
        return Err(bad_header("no ticker columns".into()));
    }
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() {
            return Err(bad_header("empty ticker name".into()));
        }
        if !seen.insert(t.as_str()) {
            return Err(bad_header(format!("duplicate ticker {t}")));
        }
    }

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| CliError::Parse {
            path: path.into(),
            line,
            message,
        };
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date {:?}: {e}", &record[0])))?;
        let values = record
            .iter()
            .skip(1)
            .zip(&tickers)
            .map(|(cell, ticker)| {
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>()
                    .map(Some)
                    .map_err(|_| parse_err(format!("non-numeric value {cell:?} for {ticker}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((date, values));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CliError::Parse {
            path: path.into(),
            line: 0,
            message: format!("duplicate date {}", w[0].0),
        });
    }

    let complete: Vec<usize> = (0..tickers.len())
        .filter(|&i| rows.iter().all(|(_, v)| v[i].is_some()))
        .collect();
    let dropped: Vec<String> = (0..tickers.len())
        .filter(|i| !complete.contains(i))
        .map(|i| tickers[i].clone())
        .collect();
    if !dropped.is_empty() {
        warn!(
            "dropped {} ticker(s) with missing prices: {}",
            dropped.len(),
            dropped.join(",")
        );
    }
    if rows.len() < 2 {
        return Err(CliError::Parse {
            path: path.into(),
            line: 0,
            message: format!("need at least 2 price rows, got {}", rows.len()),
        });
    }
    if complete.is_empty() {
        return Err(CliError::Parse {
            path: path.into(),
            line: 0,
            message: "every ticker has missing prices".into(),
        });
    }
    let matrix = DMatrix::from_fn(complete.len(), rows.len(), |i, t| {
        rows[t].1[complete[i]].unwrap_or(f64::NAN)
    });
    let prices = PriceMatrix::new(
        complete.iter().map(|&i| tickers[i].clone()).collect(),
        rows.iter().map(|r| r.0).collect(),
        matrix,
    )?;
    Ok(Ingested { prices, dropped })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

/// Writes prices with the shortest decimal that round-trips, so reading
/// the file back reproduces the matrix exactly.
pub fn write_prices(path: &Path, prices: &PriceMatrix) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["date".to_owned()];
    header.extend(prices.tickers().iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, date) in prices.dates().iter().enumerate() {
        let mut row = vec![date.format("%Y-%m-%d").to_string()];
        row.extend(prices.prices().column(t).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// `ticker,weight` rows in ticker order.
pub fn write_allocation(path: &Path, tickers: &[String], x: &Allocation) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["ticker", "weight"])
        .map_err(|e| csv_err(path, e))?;
    for (t, v) in tickers.iter().zip(x.weights()) {
        w.write_record([t.as_str(), &v.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

pub fn read_allocation(path: &Path) -> Result<Vec<(String, f64)>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?;
    if header != vec!["ticker", "weight"] {
        return Err(CliError::Header {
            path: path.into(),
            message: "expected `ticker,weight`".into(),
        });
    }
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| csv_err(path, e))?;
            let line = r.position().map_or(0, |p| p.line());
            let weight = r[1].parse().map_err(|_| CliError::Parse {
                path: path.into(),
                line,
                message: format!("bad weight {:?}", &r[1]),
            })?;
            Ok((r[0].to_owned(), weight))
        })
        .collect()
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}
