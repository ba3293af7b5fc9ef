//! Variance inflation factors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Reported in place of +inf for perfectly collinear columns.
pub const VIF_CAP: f64 = 1e12;

/// `1 / (1 - R²_j)` where `R²_j` comes from regressing column `j` on every other
/// column plus an intercept. Constant and perfectly collinear columns get [`VIF_CAP`].
pub fn vif(matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    let p = matrix.n_features();
    if p < 2 {
        return Err(Error::VifTooFewFeatures);
    }
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::NoSamples);
    }
    Ok((0..p)
        .into_par_iter()
        .map(|j| {
            let y = DVector::from_iterator(n, matrix.rows.iter().map(|r| r[j]));
            let design = DMatrix::from_fn(n, p, |i, c| match c {
                0 => 1.0,
                c if c <= j => matrix.rows[i][c - 1],
                c => matrix.rows[i][c],
            });
            vif_from_r_squared(r_squared(&design, &y))
        })
        .collect())
}

fn r_squared(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<f64> {
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (design.nrows().max(design.ncols()) as f64) * f64::EPSILON;
    let beta = svd.solve(y, eps).ok()?;
    let resid = y - design * beta;
    let ss_res = resid.norm_squared();
    Some(1.0 - ss_res / ss_tot)
}

fn vif_from_r_squared(r2: Option<f64>) -> f64 {
    match r2 {
        None => VIF_CAP,
        Some(r2) => {
            let tol = 1.0 - r2;
            if tol <= 1.0 / VIF_CAP {
                VIF_CAP
            } else {
                (1.0 / tol).max(1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_columns() {
        // ±1 Hadamard-style columns: mutually orthogonal and centered
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                vec![
                    if i & 1 == 0 { 1.0 } else { -1.0 },
                    if i & 2 == 0 { 1.0 } else { -1.0 },
                    if i & 4 == 0 { 1.0 } else { -1.0 },
                ]
            })
            .collect();
        let v = vif(&FeatureMatrix::unnamed(rows).unwrap()).unwrap();
        for x in v {
            assert!((x - 1.0).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn duplicated_column_capped() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = (i as f64 * 0.7).sin();
                vec![a, a, (i as f64 * 1.3).cos()]
            })
            .collect();
        let v = vif(&FeatureMatrix::unnamed(rows).unwrap()).unwrap();
        assert_eq!(v[0], VIF_CAP);
        assert_eq!(v[1], VIF_CAP);
        assert!(v[2] < 10.0);
    }

    #[test]
    fn too_few_features() {
        let m = FeatureMatrix::unnamed(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(vif(&m), Err(Error::VifTooFewFeatures)));
    }

    #[test]
    fn permuting_columns_permutes_vif() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (0.5 * t).cos() + 0.3 * t.sin(), (t * 0.1).powi(2)]
            })
            .collect();
        let perm = [2usize, 0, 1];
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| perm.iter().map(|&j| r[j]).collect())
            .collect();
        let v = vif(&FeatureMatrix::unnamed(rows).unwrap()).unwrap();
        let vp = vif(&FeatureMatrix::unnamed(permuted).unwrap()).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            assert!((vp[k] - v[j]).abs() < 1e-9 * v[j]);
        }
        assert!(v.iter().all(|&x| x >= 1.0));
    }
}
