//! CART induction for binary classification with Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::LabeledSample;

/// Decreases at or below this are treated as zero (float noise on balanced splits).
const MIN_DECREASE: f64 = 1e-12;

/// A tree node. Children are indices into the owning [`Tree`]'s node array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
        /// Impurity decrease of this split weighted by the node's share of the tree's samples.
        weighted_decrease: f64,
    },
    Leaf {
        class1_fraction: f64,
        sample_count: usize,
    },
}

/// A trained tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(class1_fraction: f64, sample_count: usize) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf {
                class1_fraction,
                sample_count,
            }],
        }
    }

    /// Class-1 fraction of the leaf reached by `x`. Values `<= threshold` go left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf {
                    class1_fraction, ..
                } => return *class1_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut max_depth = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, d)) = stack.pop() {
            max_depth = max_depth.max(d);
            if let TreeNode::Split { left, right, .. } = &self.nodes[idx] {
                stack.push((*left as usize, d + 1));
                stack.push((*right as usize, d + 1));
            }
        }
        max_depth
    }

    /// Checks structural invariants: children in range and acyclic (children
    /// always point forward), leaf fractions in [0,1], features in range.
    pub fn validate(&self, feature_count: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidModel("tree has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf {
                    class1_fraction, ..
                } => {
                    if !(0.0..=1.0).contains(class1_fraction) {
                        return Err(Error::InvalidModel(format!(
                            "leaf fraction {class1_fraction} outside [0,1]"
                        )));
                    }
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= feature_count {
                        return Err(Error::InvalidModel(format!(
                            "split feature {feature} >= feature count {feature_count}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::InvalidModel("non-finite threshold".into()));
                    }
                    let n = self.nodes.len();
                    let (l, r) = (*left as usize, *right as usize);
                    if l <= i || r <= i || l >= n || r >= n || l == r {
                        return Err(Error::InvalidModel(format!(
                            "node {i} has invalid children ({l}, {r})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Column-major training data: `columns[f][row]`.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl TrainingSet {
    pub fn from_samples(samples: &[LabeledSample]) -> Result<Self> {
        let first = samples.first().ok_or(Error::NoSamples)?;
        let p = first.features.len();
        let mut columns = vec![Vec::with_capacity(samples.len()); p];
        let mut labels = Vec::with_capacity(samples.len());
        for s in samples {
            if s.features.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.features.len(),
                });
            }
            if s.label > 1 {
                return Err(Error::Data(format!("label {} is not binary", s.label)));
            }
            for (col, &x) in columns.iter_mut().zip(&s.features) {
                col.push(x);
            }
            labels.push(s.label);
        }
        Ok(TrainingSet { columns, labels })
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `1 - p0² - p1²` over binary labels.
pub fn gini_impurity(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyNode);
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok(gini_from_counts(ones, labels.len()))
}

fn gini_from_counts(ones: usize, total: usize) -> f64 {
    let p1 = ones as f64 / total as f64;
    let p0 = 1.0 - p1;
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature_index: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

fn better(candidate: &Split, incumbent: Option<&Split>) -> bool {
    match incumbent {
        None => true,
        Some(best) => {
            candidate.impurity_decrease > best.impurity_decrease
                || (candidate.impurity_decrease == best.impurity_decrease
                    && (candidate.feature_index, candidate.threshold)
                        < (best.feature_index, best.threshold))
        }
    }
}

/// Best threshold on one feature, or `None` when the feature is constant on
/// `rows` or no threshold leaves `min_leaf` rows per side with a positive decrease.
fn best_split_on_feature(
    data: &TrainingSet,
    rows: &[usize],
    feature: usize,
    min_leaf: usize,
    parent_gini: f64,
    scratch: &mut Vec<(f64, u8)>,
) -> Option<Split> {
    let column = &data.columns[feature];
    scratch.clear();
    scratch.extend(rows.iter().map(|&r| (column[r], data.labels[r])));
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    if scratch[0].0 == scratch[n - 1].0 {
        return None;
    }
    let total_ones = scratch.iter().filter(|(_, l)| *l == 1).count();
    let mut left_ones = 0usize;
    let mut best: Option<Split> = None;
    for i in 0..n - 1 {
        left_ones += scratch[i].1 as usize;
        let (lo, hi) = (scratch[i].0, scratch[i + 1].0);
        if lo == hi {
            continue;
        }
        let n_left = i + 1;
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let g_left = gini_from_counts(left_ones, n_left);
        let g_right = gini_from_counts(total_ones - left_ones, n_right);
        let weighted = (n_left as f64 * g_left + n_right as f64 * g_right) / n as f64;
        let decrease = parent_gini - weighted;
        if decrease <= MIN_DECREASE {
            continue;
        }
        let mut threshold = 0.5 * (lo + hi);
        if threshold >= hi || !threshold.is_finite() {
            threshold = lo;
        }
        let candidate = Split {
            feature_index: feature,
            threshold,
            impurity_decrease: decrease,
        };
        if best.is_none_or(|b| decrease > b.impurity_decrease) {
            best = Some(candidate);
        }
    }
    best
}

/// Split over `candidate_features` maximizing the weighted Gini decrease.
///
/// Thresholds are midpoints between consecutive distinct values. Ties go to the
/// lowest feature index, then the lowest threshold.
pub fn best_split(
    data: &TrainingSet,
    rows: &[usize],
    candidate_features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let labels: Vec<u8> = rows.iter().map(|&r| data.labels[r]).collect();
    let parent = gini_impurity(&labels).ok()?;
    if parent == 0.0 {
        return None;
    }
    let mut scratch = Vec::with_capacity(rows.len());
    let mut best: Option<Split> = None;
    for &f in candidate_features {
        if let Some(s) = best_split_on_feature(data, rows, f, min_leaf.max(1), parent, &mut scratch)
        {
            if better(&s, best.as_ref()) {
                best = Some(s);
            }
        }
    }
    best
}

pub(crate) struct GrowParams {
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

/// Grows one tree on `rows` (may contain repeats, as in a bootstrap draw).
pub(crate) fn grow_tree<R: Rng>(
    data: &TrainingSet,
    rows: Vec<usize>,
    params: &GrowParams,
    rng: &mut R,
) -> Tree {
    let total = rows.len() as f64;
    let p = data.feature_count();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut order: Vec<usize> = (0..p).collect();
    let mut scratch = Vec::with_capacity(rows.len());
    // (rows, depth, slot to patch in parent)
    // (rows, depth, parent node and whether this is its left child)
    type Pending = (Vec<usize>, usize, Option<(usize, bool)>);
    let mut stack: Vec<Pending> = vec![(rows, 0, None)];

    while let Some((node_rows, depth, parent)) = stack.pop() {
        let idx = nodes.len();
        if let Some((pi, is_left)) = parent {
            if let TreeNode::Split { left, right, .. } = &mut nodes[pi] {
                if is_left {
                    *left = idx as u32;
                } else {
                    *right = idx as u32;
                }
            }
        }
        let n = node_rows.len();
        let ones = node_rows.iter().filter(|&&r| data.labels[r] == 1).count();
        let leaf = TreeNode::Leaf {
            class1_fraction: ones as f64 / n as f64,
            sample_count: n,
        };
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if ones == 0 || ones == n || n < 2 * params.min_leaf || depth_capped {
            nodes.push(leaf);
            continue;
        }
        let parent_gini = gini_from_counts(ones, n);

        order.shuffle(rng);
        let mut best: Option<Split> = None;
        let mut evaluated = 0usize;
        for &f in &order {
            if evaluated >= params.mtry && best.is_some() {
                break;
            }
            let column = &data.columns[f];
            let first = column[node_rows[0]];
            if node_rows.iter().all(|&r| column[r] == first) {
                continue;
            }
            evaluated += 1;
            if let Some(s) = best_split_on_feature(
                data,
                &node_rows,
                f,
                params.min_leaf,
                parent_gini,
                &mut scratch,
            ) {
                if better(&s, best.as_ref()) {
                    best = Some(s);
                }
            }
        }

        let Some(split) = best else {
            nodes.push(leaf);
            continue;
        };
        let column = &data.columns[split.feature_index];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = node_rows
            .iter()
            .partition(|&&r| column[r] <= split.threshold);
        nodes.push(TreeNode::Split {
            feature: split.feature_index,
            threshold: split.threshold,
            left: 0,
            right: 0,
            weighted_decrease: split.impurity_decrease * n as f64 / total,
        });
        // right pushed first so the left subtree is laid out first
        stack.push((right_rows, depth + 1, Some((idx, false))));
        stack.push((left_rows, depth + 1, Some((idx, true))));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Coord;

    fn set(points: &[(&[f64], u8)]) -> TrainingSet {
        let samples: Vec<_> = points
            .iter()
            .map(|(x, y)| LabeledSample::new(x.to_vec(), Coord::new(0.0, 0.0), *y))
            .collect();
        TrainingSet::from_samples(&samples).unwrap()
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[1, 1, 0, 0]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[1, 1, 1]).unwrap(), 0.0);
        // 1 - 0.25² - 0.75²
        assert!((gini_impurity(&[1, 0, 0, 0]).unwrap() - 0.375).abs() < 1e-15);
        assert!(matches!(gini_impurity(&[]), Err(Error::EmptyNode)));
    }

    #[test]
    fn perfect_separation_split() {
        let data = set(&[(&[0.0], 0), (&[1.0], 1)]);
        let s = best_split(&data, &[0, 1], &[0], 1).unwrap();
        assert_eq!(s.feature_index, 0);
        assert_eq!(s.threshold, 0.5);
        assert!((s.impurity_decrease - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_rows_have_no_split() {
        let data = set(&[(&[0.0], 1), (&[1.0], 1), (&[2.0], 1)]);
        assert!(best_split(&data, &[0, 1, 2], &[0], 1).is_none());
    }

    #[test]
    fn four_row_split_matches_enumeration() {
        let data = set(&[(&[0.0], 0), (&[1.0], 0), (&[2.0], 1), (&[3.0], 1)]);
        // enumerate thresholds 0.5, 1.5, 2.5 by hand
        let parent = 0.5;
        let candidates = [
            (
                0.5,
                parent - (1.0 * 0.0 + 3.0 * gini_from_counts(2, 3)) / 4.0,
            ),
            (1.5, parent - 0.0),
            (2.5, parent - (3.0 * gini_from_counts(1, 3) + 0.0) / 4.0),
        ];
        let (best_t, best_d) = candidates
            .iter()
            .copied()
            .fold(
                (f64::NAN, f64::MIN),
                |acc, c| if c.1 > acc.1 { c } else { acc },
            );
        let s = best_split(&data, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.threshold, best_t);
        assert_eq!(best_t, 1.5);
        assert!((s.impurity_decrease - best_d).abs() < 1e-15);
    }

    #[test]
    fn min_leaf_blocks_split() {
        let data = set(&[(&[0.0], 0), (&[1.0], 1), (&[2.0], 1)]);
        assert!(best_split(&data, &[0, 1, 2], &[0], 2).is_none());
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features separate perfectly
        let data = set(&[(&[0.0, 0.0], 0), (&[1.0, 1.0], 1)]);
        let s = best_split(&data, &[0, 1], &[1, 0], 1).unwrap();
        assert_eq!(s.feature_index, 0);
    }

    #[test]
    fn constant_feature_skipped() {
        let data = set(&[(&[5.0, 0.0], 0), (&[5.0, 1.0], 1)]);
        let s = best_split(&data, &[0, 1], &[0, 1], 1).unwrap();
        assert_eq!(s.feature_index, 1);
        assert!(best_split(&data, &[0, 1], &[0], 1).is_none());
    }

    #[test]
    fn validate_rejects_bad_children() {
        let tree = Tree {
            nodes: vec![TreeNode::Split {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 5,
                weighted_decrease: 0.1,
            }],
        };
        assert!(tree.validate(1).is_err());
        assert!(Tree::leaf(0.3, 2).validate(1).is_ok());
        assert!(Tree::leaf(1.3, 2).validate(1).is_err());
    }
}
