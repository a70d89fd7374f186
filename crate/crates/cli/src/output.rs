use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// A CSV table. `suffix` distinguishes the tables of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub suffix: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(suffix: Option<&str>, header: &[&str]) -> Self {
        Self {
            suffix: suffix.map(String::from),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Column by header name, parsed as numbers.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[j].parse().ok()).collect()
    }

    fn render(&self, config_hash: &str, seed: u64) -> CliResult<Vec<u8>> {
        let mut buf = format!("# config_hash={config_hash} seed={seed}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::internal(e.to_string()))?;
        }
        Ok(buf)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::internal(e.to_string())
}

/// Everything a command produces.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub json: Option<Value>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

/// Writes `<command>_<hash>[_<suffix>].csv` and `<command>_<hash>.json`.
pub fn write_report(report: &Report, dir: &Path, command: &str, config_hash: &str, seed: u64) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create output directory {}: {e}", dir.display())))?;
    let stem = format!("{command}_{config_hash}");
    let mut paths = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> CliResult<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display())))?;
        paths.push(p);
        Ok(())
    };
    for t in &report.tables {
        let name = match &t.suffix {
            Some(s) => format!("{stem}_{s}.csv"),
            None => format!("{stem}.csv"),
        };
        put(name, t.render(config_hash, seed)?)?;
    }
    if let Some(v) = &report.json {
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), Value::from(config_hash));
        doc.insert("seed".into(), Value::from(seed));
        doc.insert("command".into(), Value::from(command));
        match v {
            Value::Object(m) => doc.extend(m.clone()),
            other => {
                doc.insert("result".into(), other.clone());
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| CliError::internal(e.to_string()))?;
        text.push('\n');
        put(format!("{stem}.json"), text.into_bytes())?;
    }
    Ok(paths)
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}
