use crate::error::{Error, Result};

/// Dense row-major feature table with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    /// Validates shape and finiteness.
    pub fn new(rows: Vec<Vec<f64>>, feature_names: Vec<String>) -> Result<Self> {
        let p = feature_names.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "row {i}, feature {}",
                    feature_names[j]
                )));
            }
        }
        Ok(FeatureMatrix {
            rows,
            feature_names,
        })
    }

    /// Names `x0, x1, ...`.
    pub fn unnamed(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        Self::new(rows, (0..p).map(|j| format!("x{j}")).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}
