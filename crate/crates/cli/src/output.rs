use std::io::Write;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Cli;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A result as one JSON document plus the rows of its CSV rendering.
pub struct Report {
    json: Value,
    rows: Vec<Value>,
}

impl Report {
    /// A single record; the CSV has one row.
    pub fn single<T: Serialize>(value: &T) -> Result<Self> {
        let json = serde_json::to_value(value)?;
        Ok(Self { rows: vec![json.clone()], json })
    }

    /// A document whose CSV form is `rows`.
    pub fn table<T: Serialize, R: Serialize>(value: &T, rows: &[R]) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_value(value)?,
            rows: rows.iter().map(serde_json::to_value).collect::<Result<_, _>>()?,
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json)? + "\n"),
            Format::Csv => render_csv(&self.rows),
        }
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(_) | Value::Number(_) | Value::Array(_) => out.push((prefix.to_string(), value.to_string())),
    }
}

fn render_csv(rows: &[Value]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Option<Vec<String>> = None;
    for row in rows {
        let mut cells = Vec::new();
        match row {
            Value::Object(_) => flatten("", row, &mut cells),
            other => flatten("", &Value::Object(Map::from_iter([("value".to_string(), other.clone())])), &mut cells),
        }
        let keys: Vec<String> = cells.iter().map(|(k, _)| k.clone()).collect();
        match &header {
            None => {
                w.write_record(&keys)?;
                header = Some(keys);
            }
            Some(h) if *h != keys => anyhow::bail!("csv rows disagree on their columns"),
            Some(_) => {}
        }
        w.write_record(cells.iter().map(|(_, v)| v))?;
    }
    let bytes = w.into_inner().context("flushing csv")?;
    Ok(String::from_utf8(bytes)?)
}

pub fn emit(cli: &Cli, report: &Report) -> Result<()> {
    let text = report.render(cli.format)?;
    match &cli.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
