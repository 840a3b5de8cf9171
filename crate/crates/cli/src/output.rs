//! Result documents: one JSON document per run, embedding the resolved
//! configuration and tool version so every run is self-describing.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

/// Round a float to 12 significant digits for serialization; keeps output
/// documents stable across refactorings of intermediate arithmetic order.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// JSON number carrying 12 significant digits; non-finite values become
/// strings so the document stays valid JSON.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(sig12(x))
    } else {
        json!(x.to_string())
    }
}

pub fn num_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn num_matrix(m: &[Vec<f64>]) -> Value {
    Value::Array(m.iter().map(|row| num_vec(row)).collect())
}

/// Assemble the run document.
pub fn document(command: &str, config_echo: Value, results: Value) -> Value {
    json!({
        "tool": {
            "name": "senbd",
            "version": env!("CARGO_PKG_VERSION"),
        },
        "command": command,
        "config": config_echo,
        "results": results,
    })
}

/// Serialize with a trailing newline; `None` writes to stdout.
pub fn emit(doc: &Value, output: Option<&PathBuf>) -> CliResult<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(doc).expect("serializable"));
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Write a small CSV table (header plus preformatted rows).
pub fn write_table(path: &Path, header: &str, rows: &[String]) -> CliResult<()> {
    let mut out = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Format a float for CSV cells with 12 significant digits.
pub fn cell(x: f64) -> String {
    if x.is_finite() {
        let rounded = sig12(x);
        format!("{rounded}")
    } else {
        x.to_string()
    }
}

/// Echo helper: drop `null` entries from a serialized config section so the
/// document only shows what was resolved.
pub fn compact(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                if !v.is_null() {
                    out.insert(k, compact(v));
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(compact).collect()),
        other => other,
    }
}
