//! Result tables and the CSV/JSON writers.
//!
//! CSV output carries a `#`-prefixed preamble recording the library
//! version, experiment, seed and every resolved parameter, followed by a
//! header row and data rows with numbers at 9 significant digits. JSON
//! output records the same metadata as object fields. Output is
//! byte-identical for identical configuration and seed.

use std::io::Write;

use anyhow::{Context, Result};
use serde_json::json;

use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

/// One experiment's resolved parameters, column names and data rows.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    /// Resolved (defaulted) parameters, recorded in the output preamble.
    pub resolved: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
            resolved: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.resolved.push((key.to_string(), value.to_string()));
    }
}

/// Format with 9 significant digits, decimal where compact (like `%.9g`).
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.8e}", v);
    let (mantissa, exponent) = sci.split_once('e').expect("exponential format");
    let exponent: i32 = exponent.parse().expect("numeric exponent");
    if (-4..9).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        let fixed = format!("{:.*}", decimals, v);
        let fixed = fixed.trim_end_matches('0').trim_end_matches('.');
        if fixed == "-0" { "0".to_string() } else { fixed.to_string() }
    } else {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Num(x) => fmt_sig(*x),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) => s.clone(),
    }
}

fn json_cell(v: &Value) -> serde_json::Value {
    match v {
        Value::Num(x) => json!(x),
        Value::Int(i) => json!(i),
        Value::Bool(b) => json!(b),
        Value::Text(s) => json!(s),
    }
}

pub fn write_table(config: &RunConfig, table: &Table) -> Result<()> {
    let mut file = std::fs::File::create(&config.out)
        .with_context(|| format!("cannot write output file {}", config.out.display()))?;
    match config.format {
        Format::Csv => write_csv(&mut file, config, table)?,
        Format::Json => write_json(&mut file, config, table)?,
    }
    Ok(())
}

fn write_csv(w: &mut impl Write, config: &RunConfig, table: &Table) -> Result<()> {
    writeln!(w, "# eprlab {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# experiment: {}", config.experiment)?;
    writeln!(w, "# seed: {}", config.seed)?;
    for (key, value) in &table.resolved {
        writeln!(w, "# param {key}: {value}")?;
    }
    writeln!(w, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn write_json(w: &mut impl Write, config: &RunConfig, table: &Table) -> Result<()> {
    let params: serde_json::Map<String, serde_json::Value> = table
        .resolved
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            serde_json::Value::Object(
                table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), json_cell(v)))
                    .collect(),
            )
        })
        .collect();
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment,
        "seed": config.seed,
        "parameters": params,
        "columns": table.columns,
        "rows": rows,
    });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(2.0f64.sqrt()), "1.41421356");
        assert_eq!(fmt_sig(-0.618033988), "-0.618033988");
        assert_eq!(fmt_sig(1234.5), "1234.5");
        assert_eq!(fmt_sig(1.23456789012e-7), "1.23456789e-7");
        assert_eq!(fmt_sig(9.87654321e12), "9.87654321e12");
    }
}
