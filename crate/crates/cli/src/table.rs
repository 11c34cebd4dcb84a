//! Plain CSV tables with a `# key=value` metadata block.

use std::fmt::Write as _;

use s3bell::curve::fmt_sig9;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig9(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(metadata: Vec<(String, String)>, header: &[&str]) -> Self {
        Table {
            metadata,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Table, CliError> {
        let mut t = Table::default();
        let mut have_header = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta.trim_start().split_once('=').ok_or_else(|| {
                    CliError::Parse(format!("line {}: metadata without `=`", i + 1))
                })?;
                t.metadata.push((k.to_string(), v.to_string()));
                continue;
            }
            let fields: Vec<String> = line.split(',').map(str::to_string).collect();
            if !have_header {
                t.header = fields;
                have_header = true;
            } else if fields.len() != t.header.len() {
                return Err(CliError::Parse(format!(
                    "line {}: {} fields, header has {}",
                    i + 1,
                    fields.len(),
                    t.header.len()
                )));
            } else {
                t.rows.push(fields);
            }
        }
        if !have_header {
            return Err(CliError::Parse("missing header".into()));
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric value of `name` in every row.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let c = self
            .column(name)
            .ok_or_else(|| CliError::Parse(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| CliError::Parse(format!("`{}`: {e}", r[c])))
            })
            .collect()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}
