use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use specdiv::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Top-level JSON document written by every command.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub status: &'a str,
    pub seed: u64,
    pub report: T,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// `key,value` rows for every scalar leaf, with nested keys joined by dots.
pub fn flatten_csv(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), child, out);
                }
            }
            Value::String(s) => {
                let _ = writeln!(out, "{prefix},{s}");
            }
            other => {
                let _ = writeln!(out, "{prefix},{other}");
            }
        }
    }
    let mut out = String::from("key,value\n");
    walk("", value, &mut out);
    out
}

pub fn default_path(command: &str, format: Format) -> PathBuf {
    PathBuf::from(format!("{command}.{}", format.extension()))
}

/// Writes the report file, then echoes it to stdout.
pub fn emit(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    print!("{body}");
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    status: &'a str,
    exit_code: i32,
    kind: &'a str,
    message: String,
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::Io(_) => "io",
        e if e.is_probabilistic() => "probabilistic_failure",
        _ => "contract_violation",
    }
}

pub fn report_error(e: &Error) {
    let report = ErrorReport {
        status: "error",
        exit_code: e.exit_code(),
        kind: kind(e),
        message: e.to_string(),
    };
    match serde_json::to_string(&report) {
        Ok(s) => eprintln!("{s}"),
        Err(_) => eprintln!("{e}"),
    }
}
