use std::io::Write;

use kgamma::numeric::format_decimal;
use kgamma::{Float, LogScalar};
use serde_json::{json, Map, Value};

/// One table cell. Reals are kept as decimal strings in both formats.
#[derive(Clone, Debug)]
pub enum Cell {
    Real(String),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn real(x: &Float) -> Cell {
        Cell::Real(format_decimal(x))
    }

    /// `log2 |x|`, `-inf` at zero.
    pub fn log2_abs(x: &Float) -> Cell {
        if x.is_zero() {
            return Cell::Real("-inf".into());
        }
        Cell::real(&Float::with_val(x.prec(), x.abs_ref()).log2())
    }

    pub fn value(x: &LogScalar) -> Cell {
        Cell::real(&x.value())
    }

    pub fn log2(x: &LogScalar) -> Cell {
        Cell::real(&x.log2())
    }

    fn text(&self) -> String {
        match self {
            Cell::Real(s) | Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Real(s) | Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => json!(i),
            Cell::Bool(b) => json!(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A rectangular result plus `key: value` metadata.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &'static str, columns: &[&'static str]) -> Self {
        Report {
            command,
            meta: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with `# key: value` comment lines ahead of the header.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "# command: {}", self.command)?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.flush()
    }

    pub fn write_json(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut meta = Map::new();
        for (k, v) in &self.meta {
            meta.insert(k.clone(), Value::String(v.clone()));
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let doc = json!({
            "command": self.command,
            "meta": meta,
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }
}
