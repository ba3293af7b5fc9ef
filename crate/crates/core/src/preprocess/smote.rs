//! SMOTE: synthetic minority rows on segments between a minority row and one
//! of its nearest minority neighbours.

use rand::Rng;

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow {
    pub values: Vec<f64>,
    /// Index of the minority row `x`.
    pub base: usize,
    /// Index of the chosen neighbour `x_N`.
    pub neighbor: usize,
    /// Interpolation weight `w` in [0, 1].
    pub weight: f64,
}

/// `x + w (x_N - x)`, evaluated as `(1 - w) x + w x_N` so `w = 0` and `w = 1`
/// return the endpoints exactly, then clamped to the segment's bounding box.
pub fn interpolate(x: &[f64], x_n: &[f64], w: f64) -> Vec<f64> {
    x.iter()
        .zip(x_n)
        .map(|(&a, &b)| {
            let v = (1.0 - w) * a + w * b;
            v.clamp(a.min(b), a.max(b))
        })
        .collect()
}

fn neighbour_lists(rows: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let m = rows.len();
    (0..m)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist: f64 = rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Generates `n_synthetic` rows. Base rows are taken round-robin; the neighbour
/// is drawn uniformly from the base's `k_neighbors` nearest minority rows
/// (capped at `m - 1`) and `w` uniformly from [0, 1].
pub fn smote_rows(
    minority: &[Vec<f64>],
    k_neighbors: usize,
    n_synthetic: usize,
    seed: u64,
) -> Result<Vec<SyntheticRow>> {
    if minority.len() < 2 {
        return Err(Error::SmoteTooFewSamples(minority.len()));
    }
    if k_neighbors == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be ≥ 1".into()));
    }
    let p = minority[0].len();
    if let Some(r) = minority.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: r.len(),
        });
    }
    let k = k_neighbors.min(minority.len() - 1);
    let neighbours = neighbour_lists(minority, k);
    let mut rng = seed::rng(seed);
    Ok((0..n_synthetic)
        .map(|s| {
            let base = s % minority.len();
            let neighbor = neighbours[base][rng.random_range(0..k)];
            let weight: f64 = rng.random_range(0.0..=1.0);
            SyntheticRow {
                values: interpolate(&minority[base], &minority[neighbor], weight),
                base,
                neighbor,
                weight,
            }
        })
        .collect())
}

/// Matrix form of [`smote_rows`]; returns only the synthetic rows.
pub fn smote(
    minority: &FeatureMatrix,
    k_neighbors: usize,
    n_synthetic: usize,
    seed: u64,
) -> Result<FeatureMatrix> {
    let rows = smote_rows(&minority.rows, k_neighbors, n_synthetic, seed)?
        .into_iter()
        .map(|r| r.values)
        .collect();
    Ok(FeatureMatrix {
        rows,
        feature_names: minority.feature_names.clone(),
    })
}
