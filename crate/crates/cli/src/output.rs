//! Result tables and their CSV/JSON encodings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use branchlab_core::Point;
use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "nan".into(),
            Cell::Float(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(_) => Value::Null,
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<Point> for Cell {
    fn from(p: Point) -> Self {
        Cell::Text(p.to_string())
    }
}

/// One subcommand's output: a table, a summary (fits, totals), and optional
/// extra files.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Map<String, Value>,
    /// `(file name, contents)`.
    pub extra: Vec<(String, String)>,
    /// Further `# key = value` header lines.
    pub meta: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &str, columns: Vec<&'static str>) -> Self {
        Self {
            command: command.into(),
            columns,
            rows: Vec::new(),
            summary: Map::new(),
            extra: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn csv(&self, config_hash: &str, seed: u64) -> String {
        let mut s = String::new();
        writeln!(s, "# branchlab {}", self.command).unwrap();
        writeln!(s, "# config_sha256 = {config_hash}").unwrap();
        writeln!(s, "# seed = {seed}").unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "# {k} = {v}").unwrap();
        }
        writeln!(s, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }

    pub fn json(&self, config_hash: &str, seed: u64) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert((*c).into(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let doc = json!({
            "command": self.command,
            "config_sha256": config_hash,
            "seed": seed,
            "meta": meta,
            "columns": self.columns,
            "rows": rows,
            "summary": self.summary,
        });
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }

    /// Writes `<command>.csv`, `<command>.json` and the extra files into
    /// `dir`, returning their paths.
    pub fn write(&self, dir: &Path, config_hash: &str, seed: u64) -> Result<Vec<PathBuf>, CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut files = vec![
            (format!("{}.csv", self.command), self.csv(config_hash, seed)),
            (format!("{}.json", self.command), self.json(config_hash, seed)),
        ];
        files.extend(self.extra.iter().cloned());
        let mut paths = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(io)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Parses the `(a b c ...)` form used for points in tables.
pub fn parse_point(s: &str) -> Option<Point> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let coords: Option<Vec<i32>> = inner.split_whitespace().map(|c| c.parse().ok()).collect();
    Point::new(&coords?).ok()
}

/// Reads a table written by [`Report::csv`]: header comments, column names,
/// rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CliError::Validation("input: empty table".into()))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<String> = l.split(',').map(str::to_string).collect();
        if row.len() != columns.len() {
            return Err(CliError::Validation(format!("input: row {} has {} cells, expected {}", i + 1, row.len(), columns.len())));
        }
        rows.push(row);
    }
    Ok((columns, rows))
}
