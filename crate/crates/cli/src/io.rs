//! File readers for measurement and covariance CSVs.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

fn input_error(path: &Path, message: String) -> CliError {
    CliError::Input {
        path: path.display().to_string(),
        message,
    }
}

/// Numeric CSV matrix with an optional header row. Rows and columns in
/// diagnostics are 1-based, counting the header if present.
pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(path, format!("cannot read file: {e}")))?;
    parse_matrix(&text).map_err(|m| input_error(path, m))
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| format!("row {line}: {e}"))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if i == 0 && parsed.iter().all(Result::is_err) {
            continue; // header
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (j, (value, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match value {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(format!("row {line}, column {}: cannot parse '{raw}' as a number", j + 1)),
            }
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "row {line}: expected {} columns, found {}",
                    first.len(),
                    row.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no numeric rows".into());
    }
    let (n, k) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}
