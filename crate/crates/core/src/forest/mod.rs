//! Bootstrap-aggregated classification forests.

mod tree;

pub use tree::{best_split, gini_impurity, Split, TrainingSet, Tree, TreeNode};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::LabeledSample;
use crate::seed;
use tree::{grow_tree, GrowParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub b_trees: usize,
    /// Features sampled per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    /// `None` grows until leaves are pure or `min_leaf` stops them.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            b_trees: 100,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Resolves `mtry` for `p` features and checks the parameter ranges.
    pub fn resolved_mtry(&self, p: usize) -> Result<usize> {
        let mtry = self
            .mtry
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .max(1);
        if p == 0 || mtry > p {
            return Err(Error::InvalidParameter(format!(
                "mtry {mtry} must be in [1, {p}]"
            )));
        }
        Ok(mtry)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.b_trees == 0 {
            return Err(Error::InvalidParameter("b_trees must be ≥ 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter("min_leaf must be ≥ 1".into()));
        }
        self.resolved_mtry(p).map(|_| ())
    }
}

/// A trained ensemble. Predictions are the mean class-1 leaf fraction over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub feature_count: usize,
    /// Out-of-bag row indices per tree. Empty when not retained.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oob_indices: Vec<Vec<u32>>,
    pub params: ForestParams,
}

/// Fits `params.b_trees` trees, each on a bootstrap of `samples.len()` rows.
/// Tree `t` draws from a random stream keyed by `(params.seed, t)`.
pub fn fit_forest(samples: &[LabeledSample], params: &ForestParams) -> Result<Forest> {
    let data = TrainingSet::from_samples(samples)?;
    fit_forest_on(&data, params)
}

pub fn fit_forest_on(data: &TrainingSet, params: &ForestParams) -> Result<Forest> {
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    let p = data.feature_count();
    params.validate(p)?;
    let grow = GrowParams {
        mtry: params.resolved_mtry(p)?,
        min_leaf: params.min_leaf,
        max_depth: params.max_depth,
    };
    let n = data.len();
    let (trees, oob_indices): (Vec<Tree>, Vec<Vec<u32>>) = (0..params.b_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(params.seed, t as u64));
            let mut in_bag = vec![false; n];
            let rows: Vec<usize> = (0..n)
                .map(|_| {
                    let r = rng.random_range(0..n);
                    in_bag[r] = true;
                    r
                })
                .collect();
            let oob = (0..n as u32).filter(|&i| !in_bag[i as usize]).collect();
            (grow_tree(data, rows, &grow, &mut rng), oob)
        })
        .unzip();
    Ok(Forest {
        trees,
        feature_count: p,
        oob_indices,
        params: params.clone(),
    })
}

impl Forest {
    /// Assembles a forest from already-built trees.
    pub fn from_trees(
        trees: Vec<Tree>,
        feature_count: usize,
        params: ForestParams,
    ) -> Result<Self> {
        let forest = Forest {
            trees,
            feature_count,
            oob_indices: Vec::new(),
            params,
        };
        forest.validate()?;
        Ok(forest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::InvalidModel("forest has no trees".into()));
        }
        for tree in &self.trees {
            tree.validate(self.feature_count)?;
        }
        if !self.oob_indices.is_empty() && self.oob_indices.len() != self.trees.len() {
            return Err(Error::InvalidModel(
                "oob index lists do not match tree count".into(),
            ));
        }
        Ok(())
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|x| self.predict_proba(x)).collect()
    }

    /// Out-of-bag class-1 probability for each training row, `None` for rows
    /// that were in-bag for every tree. `rows` must be the training rows in order.
    pub fn oob_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<Option<f64>>> {
        if self.oob_indices.is_empty() {
            return Err(Error::InvalidModel(
                "forest carries no out-of-bag indices".into(),
            ));
        }
        let mut sums = vec![0.0; rows.len()];
        let mut counts = vec![0usize; rows.len()];
        for (tree, oob) in self.trees.iter().zip(&self.oob_indices) {
            for &i in oob {
                let i = i as usize;
                let x = rows.get(i).ok_or_else(|| {
                    Error::Data(format!("oob index {i} beyond {} rows", rows.len()))
                })?;
                if x.len() != self.feature_count {
                    return Err(Error::DimensionMismatch {
                        expected: self.feature_count,
                        got: x.len(),
                    });
                }
                sums[i] += tree.predict(x);
                counts[i] += 1;
            }
        }
        Ok(sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect())
    }

    /// Gini importance: per-feature impurity decrease weighted by node sample
    /// share, summed over all trees and normalized to 1. All zeros when no tree split.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.feature_count];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let TreeNode::Split {
                    feature,
                    weighted_decrease,
                    ..
                } = node
                {
                    totals[*feature] += *weighted_decrease;
                }
            }
        }
        let sum: f64 = totals.iter().sum();
        if sum > 0.0 {
            totals.iter_mut().for_each(|v| *v /= sum);
        }
        totals
    }
}
