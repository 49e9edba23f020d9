//! Tabular output rendered as CSV or JSON.

use std::io::Write;

use nonconv_core::numeric::fmt_sig9;
use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i128),
    Num(f64),
    Str(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt_sig9(*v),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => match i64::try_from(*v) {
                Ok(i) => Value::from(i),
                Err(_) => Value::String(v.to_string()),
            },
            // JSON has no infinities; they are spelled out as strings
            Cell::Num(v) => {
                Number::from_f64(*v).map_or_else(|| Value::String(fmt_sig9(*v)), Value::Number)
            }
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u128> for Cell {
    fn from(v: u128) -> Self {
        i128::try_from(v).map_or_else(|_| Cell::Str(v.to_string()), Cell::Int)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// One command's output: scalar metadata plus one or more tables.
///
/// CSV puts the metadata on a leading `#` line and separates tables with a
/// blank line; JSON nests everything in one object.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub meta: Vec<(&'static str, Cell)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn single(table: Table) -> Self {
        Self {
            meta: Vec::new(),
            tables: vec![table],
        }
    }

    pub fn meta(mut self, key: &'static str, value: impl Into<Cell>) -> Self {
        self.meta.push((key, value.into()));
        self
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                writeln!(out)
            }
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        if !self.meta.is_empty() {
            let parts: Vec<String> = self
                .meta
                .iter()
                .map(|(k, v)| format!("{k}={}", v.csv()))
                .collect();
            writeln!(out, "# {}", parts.join(" "))?;
        }
        for (i, table) in self.tables.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        for (k, v) in &self.meta {
            obj.insert((*k).to_string(), v.json());
        }
        for table in &self.tables {
            let rows = table
                .rows
                .iter()
                .map(|row| {
                    Value::Object(
                        table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| ((*c).to_string(), v.json()))
                            .collect(),
                    )
                })
                .collect();
            obj.insert(table.name.to_string(), Value::Array(rows));
        }
        Value::Object(obj)
    }
}
