//! Rows and their table, CSV and JSON renderings.

use serde_json::{json, Map, Value};

use crate::config::CONFIG_VERSION;
use crate::error::CliError;

/// Fixed CSV header shared by every command.
pub const CSV_HEADER: [&str; 8] = ["command", "label", "sweep", "value", "status", "residual", "restarts_used", "wall_time_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub sweep: String,
    pub value: f64,
    pub status: String,
    pub residual: Option<f64>,
    pub restarts_used: Option<usize>,
    pub wall_time_ms: Option<f64>,
}

impl Row {
    pub fn new(label: impl Into<String>, sweep: &str, value: f64, status: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            sweep: sweep.to_string(),
            value,
            status: status.into(),
            residual: None,
            restarts_used: None,
            wall_time_ms: None,
        }
    }
}

/// Everything one command emits.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub rows: Vec<Row>,
    pub details: Vec<Value>,
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        return "+inf".to_string();
    }
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{}", x + 0.0)
    }
}

fn fmt_opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_num)
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_num(x))
    }
}

impl Report {
    fn cells(&self, r: &Row) -> [String; 8] {
        [
            self.command.to_string(),
            r.label.clone(),
            r.sweep.clone(),
            fmt_num(r.value),
            r.status.clone(),
            fmt_opt_num(r.residual),
            r.restarts_used.map_or_else(|| "NA".to_string(), |n| n.to_string()),
            fmt_opt_num(r.wall_time_ms),
        ]
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Table => Ok(self.table()),
            Format::Csv => self.csv(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json()).map_err(|e| CliError::Config(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
        }
    }

    fn table(&self) -> String {
        let rows: Vec<[String; 8]> = self.rows.iter().map(|r| self.cells(r)).collect();
        let mut width: Vec<usize> = CSV_HEADER.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| -> String {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(CSV_HEADER.to_vec());
        for r in &rows {
            out += &line(r.iter().map(String::as_str).collect());
        }
        out
    }

    fn csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record(self.cells(r)).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "label": r.label,
                    "sweep": r.sweep,
                    "value": json_num(r.value),
                    "status": r.status,
                    "residual": r.residual.map_or(Value::Null, json_num),
                    "restarts_used": r.restarts_used,
                    "wall_time_ms": r.wall_time_ms.map_or(json!("NA"), json_num),
                })
            })
            .collect();
        json!({
            "version": CONFIG_VERSION,
            "command": self.command,
            "rows": rows,
            "details": self.details,
        })
    }
}

/// Replaces every `wall_time_ms` entry by `"NA"`, so that repeated runs
/// print identical bytes.
pub fn scrub_timing(v: &mut Value) {
    match v {
        Value::Object(m) => scrub_map(m),
        Value::Array(a) => a.iter_mut().for_each(scrub_timing),
        _ => {}
    }
}

fn scrub_map(m: &mut Map<String, Value>) {
    for (k, v) in m.iter_mut() {
        if k == "wall_time_ms" {
            *v = json!("NA");
        } else {
            scrub_timing(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> Report {
        let mut r = Row::new("upper", "alpha=2", 0.8, "converged");
        r.residual = Some(0.0);
        r.restarts_used = Some(4);
        Report { command: "posterior", rows: vec![r, Row::new("lower", "", f64::NEG_INFINITY, "infeasible")], details: vec![] }
    }

    #[test]
    fn csv_has_fixed_header_and_na_cells() {
        let s = report().render(Format::Csv).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "command,label,sweep,value,status,residual,restarts_used,wall_time_ms");
        assert_eq!(lines[1], "posterior,upper,alpha=2,0.8,converged,0,4,NA");
        assert_eq!(lines[2], "posterior,lower,,-inf,infeasible,NA,NA,NA");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(5.551115123125783e-17), "5.551115123125783e-17");
        assert_eq!(fmt_num(f64::INFINITY), "+inf");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn json_encodes_non_finite_values_as_strings() {
        let v = report().json();
        assert_eq!(v["rows"][1]["value"], json!("-inf"));
        assert_eq!(v["rows"][0]["wall_time_ms"], json!("NA"));
        assert_eq!(v["version"], json!(1));
    }

    #[test]
    fn table_aligns_columns() {
        let s = report().render(Format::Table).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        let col = lines[0].find("label").unwrap();
        assert_eq!(&lines[1][col..col + 5], "upper");
        assert_eq!(&lines[2][col..col + 5], "lower");
    }

    #[test]
    fn timing_is_scrubbed_recursively() {
        let mut v = json!({"a": [{"wall_time_ms": 3.5, "b": 1}], "wall_time_ms": 2});
        scrub_timing(&mut v);
        assert_eq!(v, json!({"a": [{"wall_time_ms": "NA", "b": 1}], "wall_time_ms": "NA"}));
    }
}
