//! Train/test protocol shared by sweeps and the `train` command:
//! stratified split, standardization fit on the training rows only, then SMOTE
//! on the standardized training rows only.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{interpolate, smote_rows, Standardizer};
use crate::sample::{Coord, LabeledSample};
use crate::seed;

const STREAM_SMOTE: u64 = 0x0073_6d6f_7465;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteSettings {
    pub k_neighbors: usize,
}

impl Default for SmoteSettings {
    fn default() -> Self {
        SmoteSettings { k_neighbors: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainProtocol {
    pub test_fraction: f64,
    pub standardize: bool,
    /// Oversample the training minority class to parity when set.
    pub smote: Option<SmoteSettings>,
}

impl Default for TrainProtocol {
    fn default() -> Self {
        TrainProtocol {
            test_fraction: 0.2,
            standardize: true,
            smote: Some(SmoteSettings::default()),
        }
    }
}

/// Per-class shuffle, `round(test_fraction * n_class)` rows of each class to test.
/// Both index lists are returned ascending.
pub fn stratified_split(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} must be in [0, 1)"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Output of [`prepare`].
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    /// Standardized training rows followed by SMOTE rows.
    pub train: Vec<LabeledSample>,
    /// Standardized test rows, in `test_indices` order.
    pub test: Vec<LabeledSample>,
    pub standardizer: Option<Standardizer>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Input rows the standardizer was fit on.
    pub standardizer_fit_indices: Vec<usize>,
    /// Input rows handed to SMOTE as the minority set.
    pub smote_input_indices: Vec<usize>,
    pub n_synthetic: usize,
}

pub fn prepare(
    samples: &[LabeledSample],
    protocol: &TrainProtocol,
    split_seed: u64,
) -> Result<PreparedSplit> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let p = samples[0].features.len();
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let (train_indices, test_indices) =
        stratified_split(&labels, protocol.test_fraction, split_seed)?;
    if train_indices.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }

    let (standardizer, standardizer_fit_indices) = if protocol.standardize {
        let rows: Vec<Vec<f64>> = train_indices
            .iter()
            .map(|&i| samples[i].features.clone())
            .collect();
        (
            Some(Standardizer::fit_rows(&rows, p)?),
            train_indices.clone(),
        )
    } else {
        (None, Vec::new())
    };
    let transform = |s: &LabeledSample| -> Result<LabeledSample> {
        let features = match &standardizer {
            Some(st) => st.apply_row(&s.features)?,
            None => s.features.clone(),
        };
        Ok(LabeledSample::new(features, s.coord, s.label))
    };
    let mut train: Vec<LabeledSample> = train_indices
        .iter()
        .map(|&i| transform(&samples[i]))
        .collect::<Result<_>>()?;
    let test: Vec<LabeledSample> = test_indices
        .iter()
        .map(|&i| transform(&samples[i]))
        .collect::<Result<_>>()?;

    let mut smote_input_indices = Vec::new();
    let mut n_synthetic = 0;
    if let Some(settings) = &protocol.smote {
        let ones = train.iter().filter(|s| s.label == 1).count();
        let zeros = train.len() - ones;
        if ones > 0 && zeros > 0 && ones != zeros {
            let minority_label = u8::from(ones < zeros);
            let positions: Vec<usize> = (0..train.len())
                .filter(|&k| train[k].label == minority_label)
                .collect();
            smote_input_indices = positions.iter().map(|&k| train_indices[k]).collect();
            n_synthetic = ones.max(zeros) - ones.min(zeros);
            let minority_rows: Vec<Vec<f64>> = positions
                .iter()
                .map(|&k| train[k].features.clone())
                .collect();
            let synthetic = smote_rows(
                &minority_rows,
                settings.k_neighbors,
                n_synthetic,
                seed::derive(split_seed, STREAM_SMOTE),
            )?;
            for row in synthetic {
                let a = train[positions[row.base]].coord;
                let b = train[positions[row.neighbor]].coord;
                let c = interpolate(&[a.u, a.v], &[b.u, b.v], row.weight);
                train.push(LabeledSample::new(
                    row.values,
                    Coord::new(c[0], c[1]),
                    minority_label,
                ));
            }
        }
    }

    Ok(PreparedSplit {
        train,
        test,
        standardizer,
        train_indices,
        test_indices,
        standardizer_fit_indices,
        smote_input_indices,
        n_synthetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize) -> Vec<LabeledSample> {
        (0..n)
            .map(|i| {
                LabeledSample::new(
                    vec![i as f64, (i % 3) as f64 * 10.0],
                    Coord::new(i as f64, 0.0),
                    u8::from(i % 5 == 0),
                )
            })
            .collect()
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 5 == 0)).collect();
        let (train, test) = stratified_split(&labels, 0.2, 1).unwrap();
        assert_eq!(train.len() + test.len(), 100);
        assert_eq!(test.len(), 20);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 4);
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(stratified_split(&labels, 0.2, 1).unwrap().1, test);
    }

    #[test]
    fn no_leakage_and_parity() {
        let s = data(100);
        let p = prepare(&s, &TrainProtocol::default(), 9).unwrap();
        for i in &p.test_indices {
            assert!(!p.standardizer_fit_indices.contains(i));
            assert!(!p.smote_input_indices.contains(i));
        }
        let ones = p.train.iter().filter(|s| s.label == 1).count();
        assert_eq!(ones * 2, p.train.len());
        assert_eq!(p.train.len(), p.train_indices.len() + p.n_synthetic);
    }

    #[test]
    fn smote_coordinates_on_segments() {
        let s = data(60);
        let p = prepare(&s, &TrainProtocol::default(), 2).unwrap();
        let (min_u, max_u) = p.train[..p.train_indices.len()]
            .iter()
            .filter(|s| s.label == 1)
            .fold((f64::MAX, f64::MIN), |(a, b), s| {
                (a.min(s.coord.u), b.max(s.coord.u))
            });
        for syn in &p.train[p.train_indices.len()..] {
            assert!(syn.coord.u >= min_u && syn.coord.u <= max_u);
            assert_eq!(syn.coord.v, 0.0);
        }
    }
}
