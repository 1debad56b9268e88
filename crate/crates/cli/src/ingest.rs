//! CSV ingestion onto the model scale.
//!
//! Continuous columns are min-max mapped to `[0, 1]` (after an optional
//! `ln(1 + v)`); binary columns must already hold only 0 and 1. Rows with
//! any missing cell are dropped and counted.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ocmt::basis::{rescale_to_unit, VariableKind};
use ocmt::dataset::{ColumnTransform, Dataset};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestOptions {
    /// Response column; the first column when absent.
    pub response: Option<String>,
    pub binary: Vec<String>,
    pub log: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub response: String,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub warnings: Vec<String>,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Ingested, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, options)
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty()
        || ["na", "nan", "null", "."]
            .iter()
            .any(|m| cell.eq_ignore_ascii_case(m))
}

pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.len() < 2 {
        return Err(CliError::Config(
            "need a response column and at least one covariate".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(CliError::Config(format!("duplicate column '{dup}'")));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("unknown column '{name}'")))
    };
    let response = match &options.response {
        Some(name) => find(name)?,
        None => 0,
    };
    let mut binary = vec![false; headers.len()];
    for name in &options.binary {
        binary[find(name)?] = true;
    }
    let mut log = vec![false; headers.len()];
    for name in &options.log {
        log[find(name)?] = true;
    }
    if binary[response] {
        return Err(CliError::Config(format!(
            "response '{}' cannot be binary-flagged",
            headers[response]
        )));
    }
    if let Some(c) = (0..headers.len()).find(|&c| binary[c] && log[c]) {
        return Err(CliError::Config(format!(
            "column '{}' is flagged both binary and log",
            headers[c]
        )));
    }

    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    let (mut rows_read, mut rows_dropped) = (0, 0);
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = k + 2;
        rows_read += 1;
        if record.iter().any(is_missing) {
            rows_dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(headers.len());
        for (c, cell) in record.iter().enumerate() {
            let fail = |message: String| CliError::Parse {
                row: line,
                column: headers[c].clone(),
                message,
            };
            let v: f64 = cell
                .parse()
                .map_err(|_| fail(format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(fail(format!("'{cell}' is not finite")));
            }
            if binary[c] && v != 0.0 && v != 1.0 {
                return Err(fail(format!("binary column holds {cell}, expected 0 or 1")));
            }
            if log[c] && v <= -1.0 {
                return Err(fail(format!("ln(1 + v) is undefined at {cell}")));
            }
            row.push(v);
        }
        for (col, v) in raw.iter_mut().zip(row) {
            col.push(v);
        }
    }
    if raw[0].is_empty() {
        return Err(CliError::NoCompleteRows {
            dropped: rows_dropped,
        });
    }

    let mut warnings = Vec::new();
    if rows_dropped > 0 {
        warnings.push(format!(
            "dropped {rows_dropped} of {rows_read} rows with missing cells"
        ));
    }
    let mut y = std::mem::take(&mut raw[response]);
    if log[response] {
        y.iter_mut().for_each(|v| *v = v.ln_1p());
    }

    let (mut columns, mut kinds, mut transforms, mut names) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (c, col) in raw.into_iter().enumerate() {
        if c == response {
            continue;
        }
        names.push(headers[c].clone());
        if binary[c] {
            columns.push(col);
            kinds.push(VariableKind::BinaryLinear);
            transforms.push(ColumnTransform::default());
            continue;
        }
        let col: Vec<f64> = if log[c] {
            col.iter().map(|v| v.ln_1p()).collect()
        } else {
            col
        };
        kinds.push(VariableKind::Continuous);
        match rescale_to_unit(&col) {
            Ok((mapped, map)) => {
                columns.push(mapped);
                transforms.push(ColumnTransform {
                    log1p: log[c],
                    unit_map: Some(map),
                });
            }
            Err(_) => {
                warnings.push(format!("column '{}' is constant", headers[c]));
                columns.push(vec![0.0; col.len()]);
                transforms.push(ColumnTransform {
                    log1p: log[c],
                    unit_map: None,
                });
            }
        }
    }
    let dataset = Dataset::with_metadata(y, columns, kinds, transforms, names)?;
    Ok(Ingested {
        dataset,
        response: headers[response].clone(),
        rows_read,
        rows_dropped,
        warnings,
    })
}
