use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

/// CSV table collected in memory and written once.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.header)?;
        for r in &self.rows {
            wr.write_record(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => self.write_to(fs::File::create(p).map_err(|e| io_at(p, e))?),
            None => match self.write_to(io::stdout().lock()) {
                Err(CliError::BrokenPipe) => Ok(()),
                r => r,
            },
        }
    }
}

fn io_at(p: &Path, e: io::Error) -> CliError {
    CliError::Validation(format!("cannot write {}: {e}", p.display()))
}

pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// `out.csv` → `out.manifest.json` in the same directory.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.manifest.json"))
}

/// Run manifest: tool version, command, resolved configuration and results.
/// Output paths are reduced to file names so the manifest does not depend on
/// where the run was made.
pub fn manifest<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> Result<Value, CliError> {
    let mut config = serde_json::to_value(config)?;
    if let Some(map) = config.as_object_mut() {
        for (key, value) in map.iter_mut() {
            if key.ends_with("output") {
                if let Some(p) = value.as_str() {
                    let name = Path::new(p).file_name().map(|n| n.to_string_lossy().into_owned());
                    *value = json!(name);
                }
            }
        }
    }
    Ok(json!({
        "tool": "delaytherm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "result": serde_json::to_value(result)?,
    }))
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_at(path, e))
}

pub fn print_json(value: &Value) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
