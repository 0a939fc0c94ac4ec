//! CSV ingestion.

use std::io::Read;
use std::path::Path;

use sipipe_core::{Matrix, MaskedDataset};

use crate::error::{AppError, AppResult};

pub const DEFAULT_MISSING_TOKEN: &str = "NaN";

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Response cells equal to this token are missing. Case-sensitive.
    pub missing_token: String,
    /// Response column name; the last column when `None`.
    pub target: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { missing_token: DEFAULT_MISSING_TOKEN.to_string(), target: None }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: MaskedDataset,
    pub feature_names: Vec<String>,
    pub response_name: String,
}

pub fn load_dataset(path: &Path, options: &LoadOptions) -> AppResult<LoadedData> {
    let file = std::fs::File::open(path).map_err(|source| AppError::Io { path: path.display().to_string(), source })?;
    read_dataset(file, options)
}

pub fn read_dataset(input: impl Read, options: &LoadOptions) -> AppResult<LoadedData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers: Vec<String> =
        reader.headers().map_err(|e| AppError::Csv(e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
    if headers.len() < 2 {
        return Err(sipipe_core::Error::EmptyData("need at least one feature column and a response column").into());
    }
    let target = match &options.target {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Usage(format!("no column named {name:?} in the header")))?,
        None => headers.len() - 1,
    };
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != target).collect();

    let mut values = Vec::new();
    let mut y_obs = Vec::new();
    let mut missing = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AppError::Csv(e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line());
        let cell = |c: usize| -> AppResult<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(AppError::Malformed {
                    row,
                    column: headers[c].clone(),
                    message: format!("{raw:?} is not a finite number"),
                }),
            }
        };
        for &c in &feature_cols {
            values.push(cell(c)?);
        }
        if record.get(target).map(str::trim) == Some(options.missing_token.as_str()) {
            missing.push(true);
        } else {
            y_obs.push(cell(target)?);
            missing.push(false);
        }
    }
    let n = missing.len();
    if n == 0 {
        return Err(sipipe_core::Error::EmptyData("no data rows").into());
    }
    let x = Matrix::from_vec(n, feature_cols.len(), values)?;
    Ok(LoadedData {
        dataset: MaskedDataset::new(x, y_obs, missing)?,
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        response_name: headers[target].clone(),
    })
}
