//! Run artifacts: CSV tables, the JSON summary, the config echo and the run log.

use serde::Serialize;
use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
        }
    }
}

/// One CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV text: a `#` hash line, the header, then one line per row with 17 significant digits.
    pub fn render(&self, config_hash: &str) -> String {
        let mut out = format!("# config_hash: {config_hash}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
            writeln!(out, "{}", cells.join(",")).expect("writing to a string");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// A measured quantity compared against an acceptance band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub band: String,
    pub status: Status,
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, band: format!("<= {limit:e}"), status: status(value <= limit) }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, band: format!(">= {limit:e}"), status: status(value >= limit) }
    }

    pub fn within(name: &str, value: f64, band: [f64; 2]) -> Self {
        Self { name: name.into(), value, band: format!("[{}, {}]", band[0], band[1]), status: status(value >= band[0] && value <= band[1]) }
    }

    /// A yes/no property; `value` is 1 when it holds.
    pub fn holds(name: &str, ok: bool, band: &str) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, band: band.into(), status: status(ok) }
    }

    pub fn skipped(name: &str, reason: &str) -> Self {
        Self { name: name.into(), value: f64::NAN, band: reason.into(), status: Status::Skipped }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub name: String,
    pub kind: String,
    pub metrics: Map<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).and_then(Value::as_f64)
    }
}

/// Everything a run produces before it touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub tables: Vec<Table>,
    /// Phase name and wall-clock seconds, for the run log only.
    pub timings: Vec<(String, f64)>,
}

/// Writes `config.json`, `summary.json`, one CSV per table and `run.log` into `dir`.
pub fn write_artifacts(dir: &Path, config_echo: &Value, output: &RunOutput, log_lines: &[String]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let hash = &output.summary.config_hash;
    let echo = serde_json::json!({ "config_hash": hash, "config": config_echo });
    fs::write(dir.join("config.json"), pretty(&echo)?)?;
    fs::write(dir.join("summary.json"), pretty(&output.summary)?)?;
    for table in &output.tables {
        fs::write(dir.join(format!("{}.csv", table.name)), table.render(hash))?;
    }
    let mut log = format!("# config_hash: {hash}\n");
    for line in log_lines {
        log.push_str(line);
        log.push('\n');
    }
    for (phase, secs) in &output.timings {
        writeln!(log, "timing {phase}: {secs:.3} s").expect("writing to a string");
    }
    fs::write(dir.join("run.log"), log)
}

fn pretty<T: Serialize>(value: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}
