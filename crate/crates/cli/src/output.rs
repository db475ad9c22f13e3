use std::io::Write;

use anyhow::Context;
use serde_json::{Map, Value};

use crate::args::{Common, Format};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("PRELOG_GIT_REV"), ")");

/// Tabular view of a result, used for `--format csv`.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Key-value table over the scalar top-level fields of `value`.
pub fn scalar_table(value: &Value) -> Table {
    let mut t = Table::new(vec!["field", "value"]);
    if let Value::Object(map) = value {
        for (k, v) in map {
            let cell = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            t.push(vec![k.clone(), cell]);
        }
    }
    t
}

pub struct Report {
    pub command: &'static str,
    pub body: Value,
    pub table: Option<Table>,
}

fn envelope(common: &Common, command: &'static str, config: Option<Value>, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), Value::from(prelog_core::SCHEMA));
    map.insert("version".into(), Value::from(format!("prelog-lab {VERSION}")));
    map.insert("command".into(), Value::from(command));
    map.insert("config".into(), config.unwrap_or(Value::Null));
    map.insert("q_source".into(), Value::from(common.q_source().label()));
    map.insert("seed".into(), Value::from(common.seed));
    match body {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    Value::Object(map)
}

pub fn emit(common: &Common, config: Option<Value>, report: Report) -> anyhow::Result<()> {
    let text = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&envelope(common, report.command, config, report.body))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let table = report.table.unwrap_or_else(|| scalar_table(&report.body));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            String::from_utf8(w.into_inner().context("flushing csv")?)?
        }
    };
    match &common.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
