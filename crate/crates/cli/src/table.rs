//! CSV output: `#` metadata lines, a header row, then `%.12e` values.

use std::fmt::Write as _;
use std::io::{self, Write};

pub const CSV_SCHEMA: &str = "nverc-csv/1";

/// C-style `%.12e` rendering, e.g. `1.500000000000e+00`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn meta_f(&mut self, key: &str, value: f64) -> &mut Self {
        self.meta(key, fmt_float(value))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# schema: {CSV_SCHEMA}").unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.render().as_bytes())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Parses a CSV written by [`Table::render`].
pub fn parse(text: &str) -> Option<Table> {
    let mut t = Table::default();
    let mut lines = text.lines();
    for line in lines.by_ref() {
        if let Some(m) = line.strip_prefix("# ") {
            let (k, v) = m.split_once(": ")?;
            t.meta.push((k.to_string(), v.to_string()));
        } else {
            t.columns = line.split(',').map(str::to_string).collect();
            break;
        }
    }
    for line in lines {
        t.rows.push(line.split(',').map(|v| v.parse().ok()).collect::<Option<Vec<f64>>>()?);
    }
    t.meta.retain(|(k, _)| k != "schema");
    Some(t)
}
