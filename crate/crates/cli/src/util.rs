//! Output envelopes, config loading, CSV emission and exit-code mapping.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use memulsion_core::Error as CoreError;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Directory joined onto relative `--out`/`--csv` paths when set.
pub const OUT_DIR_ENV: &str = "MEMULSION_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing parameters: exit 2.
    Schema(String),
    /// A computation failed: exit 1.
    Compute(String),
    /// A result violated a model invariant: exit 3.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Compute(m) | CliError::Invariant(m) => m,
        }
    }
}

/// Map a core error raised while validating parameters.
pub fn schema(e: CoreError) -> CliError {
    CliError::Schema(e.to_string())
}

/// Map a core error raised mid-computation; invariant breaches keep their
/// dedicated exit code.
pub fn compute(e: CoreError) -> CliError {
    match e {
        CoreError::InvariantViolated(m) => CliError::Invariant(m),
        other => CliError::Compute(other.to_string()),
    }
}

pub fn require<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Schema(format!("missing required parameter --{flag}")))
}

pub fn parse_ratio_arg(s: &str, flag: &str) -> Result<num_rational::Rational64, CliError> {
    memulsion_core::column::parse_ratio(s)
        .map_err(|e| CliError::Schema(format!("--{flag}: {e}")))
}

/// Load a stored config: either a bare parameter object or a full output
/// record (whose `config` field is then taken).
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| CliError::Schema(format!("{} is not JSON: {e}", path.display())))?;
    let config = match value.get("config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(config)
        .map_err(|e| CliError::Schema(format!("{} does not match the schema: {e}", path.display())))
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

/// Write (or print) the run record. The record is byte-deterministic for a
/// fixed config and seed; wall-clock time lives in the separate `meta`
/// field so records can be compared after stripping it.
pub fn emit<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    result: &R,
    started: Instant,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let record = serde_json::json!({
        "command": command,
        "config": config,
        "result": result,
        "meta": { "elapsed_ms": started.elapsed().as_millis() as u64 },
    });
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::Compute(format!("serialization failed: {e}")))?;
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)
                        .map_err(|e| CliError::Compute(format!("mkdir {}: {e}", parent.display())))?;
                }
            }
            fs::write(&path, text)
                .map_err(|e| CliError::Compute(format!("write {}: {e}", path.display())))
        }
    }
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Write a CSV table with a fixed column order and RFC-style quoting.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let path = resolve_out(path);
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| csv_quote(c)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Compute(format!("mkdir {}: {e}", parent.display())))?;
        }
    }
    fs::write(&path, text).map_err(|e| CliError::Compute(format!("write {}: {e}", path.display())))
}

/// Merge an optional config-file value with a CLI override.
pub fn pick<T>(cli: Option<T>, file: Option<T>) -> Option<T> {
    cli.or(file)
}
