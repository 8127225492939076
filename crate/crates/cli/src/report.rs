//! Fixed-header result tables, rendered as CSV or markdown.

use std::path::Path;

use mdport::analytics::{BacktestRow, SensitivityReport, SweepResult};

use crate::error::CliError;

pub const TABLE1: [&str; 6] = [
    "model",
    "exp_return",
    "std_dev",
    "max_drawdown",
    "n_stocks",
    "time_s",
];
pub const TABLE2: [&str; 5] = [
    "model",
    "period_return",
    "daily_return",
    "std_dev",
    "max_drawdown",
];
pub const TABLE3: [&str; 2] = ["model", "avg_abs_alloc_change"];
pub const FRONTIER: [&str; 5] = ["lambda", "std_pct", "return_pct", "distance", "status"];
pub const LAMBDA_STAR: [&str; 5] = [
    "lambda_star",
    "std_pct",
    "return_pct",
    "ideal_std_pct",
    "ideal_return_pct",
];
pub const COVARIANCE: [&str; 3] = ["avg_abs_diff", "avg_abs_before", "relative_change_pct"];

/// Placeholder for values a failed solve cannot provide.
pub const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Fixed-point text that never reads `-0.0000`.
fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_owned(),
        _ => s,
    }
}

fn pct(v: f64) -> String {
    fixed(100.0 * v, 4)
}

fn num(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| MISSING.to_owned(), |v| fixed(v, digits))
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| (*s).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn to_markdown(&self) -> String {
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        let mut out = line(&self.header);
        out.push_str(&line(&vec!["---".to_owned(); self.header.len()]));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    pub fn read_csv(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
        let header = rdr
            .headers()
            .map_err(|e| CliError::io(path, std::io::Error::other(e)))?
            .iter()
            .map(str::to_owned)
            .collect();
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|r| r.iter().map(str::to_owned).collect())
                    .map_err(|e| CliError::io(path, std::io::Error::other(e)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}

/// In-sample table: train-window mean, deviation and worst day in percent,
/// held positions and solve time.
pub fn table1(rows: &[BacktestRow]) -> Table {
    let mut t = Table::new(&TABLE1);
    for r in rows {
        let m = r.in_sample;
        t.push(vec![
            r.report.model.label().to_owned(),
            m.map_or(MISSING.into(), |m| pct(m.mean_daily_return)),
            m.map_or(MISSING.into(), |m| pct(m.std_daily)),
            m.map_or(MISSING.into(), |m| pct(m.max_drawdown)),
            m.map_or(MISSING.into(), |m| m.n_positions.to_string()),
            fixed(r.report.wall_time, 6),
        ]);
    }
    t
}

/// Out-of-sample table, all values in percent.
pub fn table2(rows: &[BacktestRow]) -> Table {
    let mut t = Table::new(&TABLE2);
    for r in rows {
        let m = r.out_of_sample;
        t.push(vec![
            r.report.model.label().to_owned(),
            m.map_or(MISSING.into(), |m| pct(m.cumulative_return)),
            m.map_or(MISSING.into(), |m| pct(m.mean_daily_return)),
            m.map_or(MISSING.into(), |m| pct(m.std_daily)),
            m.map_or(MISSING.into(), |m| pct(m.max_drawdown)),
        ]);
    }
    t
}

pub fn table3(report: &SensitivityReport) -> Table {
    let mut t = Table::new(&TABLE3);
    for row in &report.rows {
        t.push(vec![row.model.label().to_owned(), num(row.change_pct, 4)]);
    }
    t
}

pub fn covariance_table(report: &SensitivityReport) -> Table {
    let c = report.covariance;
    let mut t = Table::new(&COVARIANCE);
    t.push(vec![
        format!("{:e}", c.avg_abs_diff),
        format!("{:e}", c.avg_abs_before),
        pct(c.relative_change),
    ]);
    t
}

pub fn frontier_table(sweep: &SweepResult) -> Table {
    let mut t = Table::new(&FRONTIER);
    for p in &sweep.points {
        t.push(vec![
            format!("{:e}", p.lambda),
            num(p.std_pct, 6),
            num(p.return_pct, 6),
            num(p.distance, 6),
            format!("{:?}", p.status).to_lowercase(),
        ]);
    }
    t
}

pub fn lambda_star_table(sweep: &SweepResult) -> Table {
    let p = sweep.chosen_point();
    let mut t = Table::new(&LAMBDA_STAR);
    t.push(vec![
        format!("{:e}", p.lambda),
        num(p.std_pct, 6),
        num(p.return_pct, 6),
        fixed(sweep.ideal.0, 6),
        fixed(sweep.ideal.1, 6),
    ]);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_negative_zero() {
        assert_eq!(pct(-1e-9), "0.0000");
        assert_eq!(pct(-0.5), "-50.0000");
        assert_eq!(fixed(-0.0, 6), "0.000000");
    }

    #[test]
    fn renderings() {
        let mut t = Table::new(&TABLE3);
        t.push(vec!["MD".into(), "3.7000".into()]);
        assert_eq!(t.to_csv(), "model,avg_abs_alloc_change\nMD,3.7000\n");
        assert_eq!(
            t.to_markdown(),
            "| model | avg_abs_alloc_change |\n| --- | --- |\n| MD | 3.7000 |\n"
        );
    }
}
