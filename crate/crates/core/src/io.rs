//! Delimited-text ingestion.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Which columns of a delimited file form the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub response: String,
    pub covariates: Vec<String>,
    /// Prepend a constant-1 column to X.
    pub intercept: bool,
    pub delimiter: u8,
}

impl CsvSchema {
    pub fn new(response: impl Into<String>, covariates: &[&str], intercept: bool) -> Self {
        CsvSchema {
            response: response.into(),
            covariates: covariates.iter().map(|c| c.to_string()).collect(),
            intercept,
            delimiter: b',',
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.intercept {
            names.push("intercept".to_string());
        }
        names.extend(self.covariates.iter().cloned());
        names
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, schema)
}

/// Rows are numbered from 1 for the first data line after the header.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    if schema.covariates.is_empty() && !schema.intercept {
        return Err(Error::Config {
            field: "covariates".into(),
            message: "need at least one covariate or an intercept".into(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Io(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 0,
            column: name.to_string(),
            message: format!("column not found in header {header:?}"),
        })
    };
    let yi = find(&schema.response)?;
    let xi = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); xi.len()];
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let cell = |i: usize| -> Result<f64> {
            let raw = &record[i];
            let column = header[i].clone();
            if raw.is_empty() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: "missing value".into(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: header[i].clone(),
                message: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[i].clone(),
                    message: format!("non-finite value '{raw}'"),
                });
            }
            Ok(v)
        };
        y.push(cell(yi)?);
        for (c, &i) in xi.iter().enumerate() {
            cols[c].push(cell(i)?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Parse {
            row: 1,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let offset = usize::from(schema.intercept);
    let x = DMatrix::from_fn(n, xi.len() + offset, |t, j| {
        if j < offset {
            1.0
        } else {
            cols[j - offset][t]
        }
    });
    Dataset::new(DVector::from_vec(y), x)
}
