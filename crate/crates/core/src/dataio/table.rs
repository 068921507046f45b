//! CSV feature tables.
//!
//! Rows are comma-separated floats. A first row that does not parse as
//! numbers is a header; when its last column is named `label`, that column
//! holds integer ground-truth labels.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{Dataset, Pixels};
use crate::backbone::Shape;
use crate::error::{Error, Result};

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    parse_csv(f, name)
}

pub fn parse_csv<R: Read>(reader: R, name: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut width: Option<usize> = None;
    let mut has_label = false;
    let mut values = Vec::new();
    let mut labels = Vec::new();

    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            has_label = rec.iter().next_back() == Some("label");
            width = Some(rec.len());
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} columns, found {}", rec.len()),
            });
        }
        let n_features = if has_label { expected - 1 } else { expected };
        for field in rec.iter().take(n_features) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value `{field}`"),
                });
            }
            values.push(v);
        }
        if has_label {
            let field = &rec[expected - 1];
            labels.push(field.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("label is not a non-negative integer: `{field}`"),
            })?);
        }
    }

    let width = width.ok_or(Error::Empty("csv"))?;
    let dim = if has_label { width - 1 } else { width };
    if dim == 0 || values.is_empty() {
        return Err(Error::Empty("csv"));
    }
    Dataset::new(
        name,
        Shape::new(1, dim, 1),
        Pixels::Floats(values),
        has_label.then_some(labels),
    )
}
