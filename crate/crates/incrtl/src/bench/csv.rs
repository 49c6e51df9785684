//! CSV ingestion and atomic file output.
//!
//! Input files are UTF-8, comma-separated, with a header row and one declared
//! label column; every other column must parse as a finite decimal number
//! (scientific notation accepted, no thousands separators). Non-numeric cells
//! are rejected with their row and column, never imputed.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::Dataset;

/// Load a CSV file into a dataset with `d_hist = d` (feature removal happens
/// later in the split). Also returns the feature column names in order.
pub fn load_csv_with_headers(path: &Path, label_column: &str) -> Result<(Dataset, Vec<String>)> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no such file: {}", path.display()),
        )));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |cell: &str, column: &str| -> Result<f64> {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::Parse {
                    row: row_idx + 1,
                    column: column.to_string(),
                    value: cell.to_string(),
                })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: row_idx + 1,
                    column: column.to_string(),
                    value: cell.to_string(),
                });
            }
            Ok(value)
        };
        let mut row = Vec::with_capacity(feature_names.len());
        for (col_idx, cell) in record.iter().enumerate() {
            let column = headers.get(col_idx).map(String::as_str).unwrap_or("?");
            if col_idx == label_idx {
                labels.push(parse(cell, column)?);
            } else {
                row.push(parse(cell, column)?);
            }
        }
        if row.len() != feature_names.len() || labels.len() != row_idx + 1 {
            return Err(Error::Parse {
                row: row_idx + 1,
                column: "<row>".to_string(),
                value: format!("expected {} cells, got {}", headers.len(), record.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = rows.len();
    let d = feature_names.len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let y = DVector::from_vec(labels);
    Ok((Dataset::new(x, y, d)?, feature_names))
}

/// See [`load_csv_with_headers`].
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    Ok(load_csv_with_headers(path, label_column)?.0)
}

/// Write a dataset as CSV with 17 significant digits, which round-trips
/// finite doubles exactly.
pub fn write_dataset_csv(
    data: &Dataset,
    feature_names: &[String],
    label_name: &str,
    path: &Path,
) -> Result<()> {
    if feature_names.len() != data.d() {
        return Err(Error::DimensionMismatch {
            what: "feature name count",
            expected: data.d(),
            actual: feature_names.len(),
        });
    }
    let mut out = String::new();
    out.push_str(&feature_names.join(","));
    out.push(',');
    out.push_str(label_name);
    out.push('\n');
    for i in 0..data.n() {
        for j in 0..data.d() {
            out.push_str(&format!("{:.16e},", data.x()[(i, j)]));
        }
        out.push_str(&format!("{:.16e}\n", data.y()[i]));
    }
    write_atomic(path, out.as_bytes())
}

/// Write a file through a temporary sibling plus rename, so readers never see
/// a truncated file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}
