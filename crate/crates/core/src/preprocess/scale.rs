//! Z-score standardization with population standard deviation.

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    /// Population SD (divides by N).
    pub sd: f64,
    pub constant: bool,
}

impl ColumnStats {
    pub fn apply(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (x - self.mean) / self.sd
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<ColumnStats>,
}

impl Standardizer {
    pub fn fit(matrix: &FeatureMatrix) -> Result<Self> {
        Self::fit_rows(&matrix.rows, matrix.n_features())
    }

    pub fn fit_rows(rows: &[Vec<f64>], p: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoSamples);
        }
        let n = rows.len() as f64;
        let columns = (0..p)
            .map(|j| {
                let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                ColumnStats {
                    mean,
                    sd,
                    constant: sd <= 1e-12 * mean.abs().max(1.0),
                }
            })
            .collect();
        Ok(Standardizer { columns })
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.columns)
            .map(|(&x, s)| s.apply(x))
            .collect())
    }

    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let rows = matrix
            .rows
            .iter()
            .map(|r| self.apply_row(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            rows,
            feature_names: matrix.feature_names.clone(),
        })
    }
}

/// Fits column statistics on `matrix` and returns it standardized. Constant
/// columns map to 0 and are flagged.
pub fn zscore_fit_apply(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, Standardizer)> {
    let s = Standardizer::fit(matrix)?;
    Ok((s.apply(matrix)?, s))
}
