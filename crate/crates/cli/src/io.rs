//! CSV ingestion and emission of count panels.
//!
//! Input schema: UTF-8, comma-separated, one header row of either
//! `period,<name1>,...,<nameD>` or `<name1>,...,<nameD>`, then one row per
//! period of integer counts (optionally prefixed by the period label).
//! Negative, fractional, or non-numeric cells are rejected with their row
//! and column coordinates; rows are rejected when their width disagrees with
//! the header.

use std::path::Path;

use senbd::EventSeries;

use crate::error::{CliError, CliResult};

/// Read a count panel. Row numbers in errors are 1-based file lines
/// (the header is line 1).
pub fn ingest_csv(path: &Path) -> CliResult<EventSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;

    let mut records = reader.records();
    let header = match records.next() {
        Some(record) => record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?,
        None => return Err(CliError::data(format!("{}: empty file", path.display()))),
    };
    let fields: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if fields.is_empty() || fields.iter().all(|f| f.is_empty()) {
        return Err(CliError::data(format!("{}: empty header row", path.display())));
    }
    let has_period = fields[0].eq_ignore_ascii_case("period");
    let names: Vec<String> = if has_period {
        fields[1..].to_vec()
    } else {
        fields.clone()
    };
    let dim = names.len();
    if dim == 0 {
        return Err(CliError::data(format!(
            "{}: header declares no count columns",
            path.display()
        )));
    }

    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (idx, record) in records.enumerate() {
        let line = idx + 2;
        let record =
            record.map_err(|e| CliError::data(format!("{}: row {line}: {e}", path.display())))?;
        let expected = dim + usize::from(has_period);
        if record.len() != expected {
            return Err(CliError::data(format!(
                "{}: row {line} has {} fields, expected {expected}",
                path.display(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(dim);
        for (col, cell) in record.iter().enumerate() {
            if has_period && col == 0 {
                labels.push(cell.to_string());
                continue;
            }
            let column_name = &names[col - usize::from(has_period)];
            let cell = cell.trim();
            let value: i64 = match cell.parse() {
                Ok(v) => v,
                Err(_) => {
                    let kind = if cell.parse::<f64>().is_ok() {
                        "non-integer count"
                    } else {
                        "invalid count"
                    };
                    return Err(CliError::data(format!(
                        "{}: {kind} \"{cell}\" at row {line}, column \"{column_name}\"",
                        path.display()
                    )));
                }
            };
            if value < 0 {
                return Err(CliError::data(format!(
                    "{}: negative count {value} at row {line}, column \"{column_name}\"",
                    path.display()
                )));
            }
            row.push(value as u64);
        }
        rows.push(row);
    }

    let labels = if has_period { Some(labels) } else { None };
    EventSeries::new(rows, dim, Some(names), labels).map_err(CliError::from)
}

/// Write a count panel with a `period` label column; the output round-trips
/// through [`ingest_csv`] losslessly.
pub fn write_series_csv(path: &Path, series: &EventSeries) -> CliResult<()> {
    let mut out = String::new();
    out.push_str("period");
    for name in series.sector_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for t in 0..series.num_periods() {
        match series.labels() {
            Some(labels) => out.push_str(&labels[t]),
            None => out.push_str(&(t + 1).to_string()),
        }
        for &x in series.row(t) {
            out.push(',');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}
