use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Reads a rectangular numeric CSV. With `has_labels` the last column holds
/// nonnegative integer class labels. Values must already lie in `[0, 1]`;
/// nothing is clipped. Row and column numbers in errors are 1-based and
/// count data rows only.
pub fn load_matrix_csv(path: impl AsRef<Path>, has_header: bool, has_labels: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_matrix_csv(&text, has_header, has_labels).map_err(|e| match e {
        Error::Empty(_) => Error::Empty(path.display().to_string()),
        other => other,
    })
}

pub fn parse_matrix_csv(text: &str, has_header: bool, has_labels: bool) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut width = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow { row, expected, found: record.len() });
        }
        let features = if has_labels { expected.saturating_sub(1) } else { expected };
        for (j, cell) in record.iter().enumerate() {
            let col = j + 1;
            if j < features {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    row,
                    col,
                    cell: cell.to_string(),
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange { row, col, value: v });
                }
                values.push(v);
            } else {
                let l: usize = cell.parse().map_err(|_| Error::NonNumeric {
                    row,
                    col,
                    cell: cell.to_string(),
                })?;
                labels.push(l);
            }
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    let features = if has_labels { width.saturating_sub(1) } else { width };
    if rows == 0 || features == 0 {
        return Err(Error::Empty("csv".into()));
    }
    let x = Matrix::from_vec(rows, features, values)?;
    Dataset::new(x, has_labels.then_some(labels))
}
