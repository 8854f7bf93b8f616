//! Deterministic CSV and JSON writers. Every file starts with the config hash:
//! CSV as a `# config_hash=…` comment line, JSON as a top-level field.

use crate::error::{CliError, Result};
use serde_json::{Map, Value};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Round-trip float formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const HASH_PREFIX: &str = "# config_hash=";

pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::new();
    writeln!(buf, "{HASH_PREFIX}{hash}")?;
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Wrap `body` as `{"config_hash": hash, ...body}` and write it pretty-printed.
pub fn write_json(path: &Path, hash: &str, body: Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut m = Map::new();
    m.insert("config_hash".into(), Value::String(hash.to_string()));
    match body {
        Value::Object(o) => m.extend(o),
        other => {
            m.insert("data".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(m))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_text(path: &Path, hash: &str, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, format!("{HASH_PREFIX}{hash}\n{body}"))?;
    Ok(())
}

/// A CSV written by [`write_csv`]: hash, header and string rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub hash: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_csv(path: &Path) -> Result<Table> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    let hash = first.trim_end().strip_prefix(HASH_PREFIX).map(str::to_string);
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(Table { hash, header, rows })
}
