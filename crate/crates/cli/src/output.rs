//! Tables with a summary, written as `#`-commented CSV or a JSON document.

use std::io::Write;

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // Debug formatting is the shortest string that parses back to the same f64
            Cell::Num(x) => format!("{x:?}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered key/value lines; values are JSON.
    pub summary: Vec<(String, Value)>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Report { columns: columns.iter().map(|c| c.to_string()).collect(), ..Report::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.push((key.to_string(), value.into()));
    }
}

pub struct Header<'a> {
    pub command: &'a str,
    pub config_hash: &'a str,
}

pub fn write(report: &Report, header: &Header, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Csv => write_csv(report, header, out),
        Format::Json => write_json(report, header, out),
    }
}

fn write_csv(report: &Report, header: &Header, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "# maupertuis {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# command: {}", header.command)?;
    writeln!(out, "# config_sha256: {}", header.config_hash)?;
    for (k, v) in &report.summary {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "{}", report.columns.join(","))?;
    for row in &report.rows {
        let line: Vec<String> = row.iter().map(Cell::csv).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn write_json(report: &Report, header: &Header, out: &mut dyn Write) -> std::io::Result<()> {
    let mut summary = Map::new();
    for (k, v) in &report.summary {
        summary.insert(k.clone(), v.clone());
    }
    let rows: Vec<Value> = report.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
    let doc = serde_json::json!({
        "tool": "maupertuis",
        "version": env!("CARGO_PKG_VERSION"),
        "command": header.command,
        "config_sha256": header.config_hash,
        "summary": summary,
        "columns": report.columns,
        "rows": rows,
    });
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)
}
