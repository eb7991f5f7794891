//! Table rows, CSV emission and the structured JSON run report.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::energy::FlexoEnergy;
use crate::error::{Error, Result};

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 9] = ["method", "zeta", "energy", "l2_error", "min_dev", "max_dev", "wu", "time_s", "converged"];

/// Placeholder for values a diverged or failed run does not have.
pub const DASH: &str = "-";

/// One table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub zeta: Option<f64>,
    pub energy: Option<f64>,
    pub l2_error: Option<f64>,
    pub min_dev: Option<f64>,
    pub max_dev: Option<f64>,
    pub wu: Option<f64>,
    pub time_s: f64,
    pub converged: bool,
}

impl ReportRow {
    /// A row carrying no numeric results.
    pub fn dash(method: impl Into<String>, zeta: Option<f64>, time_s: f64) -> Self {
        Self {
            method: method.into(),
            zeta,
            energy: None,
            l2_error: None,
            min_dev: None,
            max_dev: None,
            wu: None,
            time_s,
            converged: false,
        }
    }

    /// The row as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        let r = |v: Option<f64>| v.map(|x| parse_num(&sig6(x)).expect("formatted number parses"));
        Self {
            method: self.method.clone(),
            zeta: r(self.zeta),
            energy: r(self.energy),
            l2_error: r(self.l2_error),
            min_dev: r(self.min_dev),
            max_dev: r(self.max_dev),
            wu: r(self.wu),
            time_s: parse_num(&sig6(self.time_s)).expect("formatted number parses"),
            converged: self.converged,
        }
    }

    fn record(&self) -> [String; 9] {
        let o = |v: Option<f64>| v.map_or_else(|| DASH.to_string(), sig6);
        [
            self.method.clone(),
            o(self.zeta),
            o(self.energy),
            o(self.l2_error),
            o(self.min_dev),
            o(self.max_dev),
            o(self.wu),
            sig6(self.time_s),
            self.converged.to_string(),
        ]
    }
}

/// Six significant digits, fixed notation for moderate magnitudes.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        let s = format!("{:.*}", (5 - mag).max(0) as usize, v);
        // rounding can carry into a new digit, e.g. 9.999996 -> 10.00000
        let again = s.parse::<f64>().map(|x| x.abs().log10().floor() as i32).unwrap_or(mag);
        if again != mag {
            return format!("{:.*}", (5 - again).max(0) as usize, v);
        }
        s
    } else {
        format!("{v:.5e}")
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Report(format!("bad number '{s}': {e}")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == DASH || s.is_empty() {
        Ok(None)
    } else {
        parse_num(s).map(Some)
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for row in rows {
        w.write_record(row.record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))
}

pub fn csv_string(rows: &[ReportRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Report(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let io = |e: csv::Error| Error::Report(e.to_string());
    let header = r.headers().map_err(io)?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::Report(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        rows.push(ReportRow {
            method: f(0).to_string(),
            zeta: parse_opt(f(1))?,
            energy: parse_opt(f(2))?,
            l2_error: parse_opt(f(3))?,
            min_dev: parse_opt(f(4))?,
            max_dev: parse_opt(f(5))?,
            wu: parse_opt(f(6))?,
            time_s: parse_num(f(7))?,
            converged: f(8).parse().map_err(|_| Error::Report(format!("bad flag '{}'", f(8))))?,
        });
    }
    Ok(rows)
}

/// Per-level counters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub cells: usize,
    pub iterations: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub final_residual: f64,
    pub nnz: usize,
    pub converged: bool,
    pub mg_cycles: Vec<usize>,
    /// Optimality residual before each linearization and at exit.
    pub residuals: Vec<f64>,
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub stepping: String,
    pub nested: bool,
    pub finest_cells: usize,
    pub row: ReportRow,
    pub levels: Vec<LevelSummary>,
    pub reference_energy: Option<f64>,
    pub diverged: bool,
    /// Flexoelectric terms when the problem has a potential.
    pub flexo: Option<FlexoEnergy<f64>>,
    pub error: Option<String>,
}

/// Reports of one command, e.g. a sweep or a reproduced table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub title: String,
    pub runs: Vec<RunReport>,
}

impl TableReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs.iter().map(|r| r.row.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Report(e.to_string()))
    }
}

/// Average multigrid cycles for one relaxation weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma_b: f64,
    pub avg_cycles: f64,
    pub cycles: Vec<usize>,
    pub converged: bool,
}

pub fn gamma_csv(rows: &[GammaRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(["gamma_b", "avg_cycles", "converged"]).map_err(io)?;
    for r in rows {
        w.write_record([sig6(r.gamma_b), sig6(r.avg_cycles), r.converged.to_string()]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.37011), "0.370110");
        assert_eq!(sig6(3.59294), "3.59294");
        assert_eq!(sig6(16.413), "16.4130");
        assert_eq!(sig6(2.076e-11), "2.07600e-11");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(-0.0396), "-0.0396000");
        assert_eq!(sig6(1e9), "1.00000e9");
    }

    #[test]
    fn dash_fields_stay_empty() {
        let row = ReportRow::dash("penalty/damped", Some(1e6), 1.5);
        let s = csv_string(&[row.clone()]).unwrap();
        assert!(s.lines().nth(1).unwrap().starts_with("penalty/damped,1.00000e6,-,-,-,-,-,"));
        assert_eq!(read_csv(s.as_bytes()).unwrap(), vec![row]);
    }
}
