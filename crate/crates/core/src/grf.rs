//! Geographical random forest.
//!
//! One global forest is fit on every training row. For each training row
//! (the anchor) a local forest is fit on the `bandwidth_n` training rows nearest
//! to it, the anchor included. A query at coordinate `c` is answered by
//! `a * local(c) + (1 - a) * global`, where `local(c)` is the local forest of the
//! anchor nearest to `c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest_on, Forest, ForestParams, TrainingSet};
use crate::sample::{Coord, LabeledSample};
use crate::seed;
use crate::spatial::SpatialIndex;

/// How local forests are seeded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSeeding {
    /// Each local forest gets its own stream keyed by anchor index.
    #[default]
    PerAnchor,
    /// Every local forest reuses the global forest's seed.
    Shared,
}

/// How the local component is formed at prediction time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalMixing {
    /// Local forest of the single nearest anchor.
    #[default]
    Nearest,
    /// Inverse-distance-weighted mean over the `k` nearest anchors' local forests.
    InverseDistance { k: usize, power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrfHyperParams {
    pub bandwidth_n: usize,
    pub local_weight_a: f64,
    pub forest_params: ForestParams,
    #[serde(default)]
    pub local_seeding: LocalSeeding,
    #[serde(default)]
    pub local_mixing: LocalMixing,
}

impl GrfHyperParams {
    pub fn new(bandwidth_n: usize, local_weight_a: f64, forest_params: ForestParams) -> Self {
        GrfHyperParams {
            bandwidth_n,
            local_weight_a,
            forest_params,
            local_seeding: LocalSeeding::default(),
            local_mixing: LocalMixing::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_n < 2 {
            return Err(Error::InvalidParameter("bandwidth_n must be ≥ 2".into()));
        }
        check_weight(self.local_weight_a)?;
        if let LocalMixing::InverseDistance { k, power } = self.local_mixing {
            if k == 0 || !(power.is_finite() && power > 0.0) {
                return Err(Error::InvalidParameter(
                    "inverse-distance mixing needs k ≥ 1 and power > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

fn check_weight(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "localization weight {a} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `a * local + (1 - a) * global`.
#[inline]
pub fn blend(a: f64, local: f64, global: f64) -> f64 {
    a * local + (1.0 - a) * global
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalForest {
    pub anchor: Coord,
    /// Training-row indices of the kernel, ascending.
    pub kernel: Vec<u32>,
    pub forest: Forest,
}

/// Components of one prediction, for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionTrace {
    /// Nearest anchor (training row index).
    pub anchor: usize,
    pub local: f64,
    pub global: f64,
    pub blended: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrfModel {
    pub global_forest: Forest,
    pub local_forests: Vec<LocalForest>,
    pub hyper: GrfHyperParams,
    pub feature_names: Vec<String>,
    #[serde(skip)]
    index: SpatialIndex,
}

impl PartialEq for GrfModel {
    fn eq(&self, other: &Self) -> bool {
        self.global_forest == other.global_forest
            && self.local_forests == other.local_forests
            && self.hyper == other.hyper
            && self.feature_names == other.feature_names
    }
}

#[derive(Deserialize)]
struct GrfModelRepr {
    global_forest: Forest,
    local_forests: Vec<LocalForest>,
    hyper: GrfHyperParams,
    feature_names: Vec<String>,
}

impl<'de> Deserialize<'de> for GrfModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = GrfModelRepr::deserialize(deserializer)?;
        GrfModel::from_parts(
            repr.global_forest,
            repr.local_forests,
            repr.hyper,
            repr.feature_names,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Fits the global forest and one local forest per training row.
pub fn fit_grf(samples: &[LabeledSample], hyper: &GrfHyperParams, seed: u64) -> Result<GrfModel> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if hyper.bandwidth_n > samples.len() {
        return Err(Error::BandwidthExceedsSamples {
            bandwidth: hyper.bandwidth_n,
            samples: samples.len(),
        });
    }
    if let Some(s) = samples.iter().find(|s| !s.coord.is_finite()) {
        return Err(Error::NonFinite(format!("coordinate {:?}", s.coord)));
    }
    let first = samples[0].coord;
    if samples.iter().all(|s| s.coord == first) {
        log::warn!("all training coordinates are identical; local kernels coincide");
    }

    let data = TrainingSet::from_samples(samples)?;
    let global_params = hyper
        .forest_params
        .clone()
        .with_seed(seed::derive(seed, seed::STREAM_GLOBAL));
    let global_forest = fit_forest_on(&data, &global_params)?;

    let anchors: Vec<Coord> = samples.iter().map(|s| s.coord).collect();
    let index = SpatialIndex::new(anchors.clone());
    let local_forests = anchors
        .par_iter()
        .enumerate()
        .map(|(i, &anchor)| {
            let mut kernel = index.knn(anchor, hyper.bandwidth_n)?;
            kernel.sort_unstable();
            let local_data = subset(&data, &kernel);
            let local_seed = match hyper.local_seeding {
                LocalSeeding::PerAnchor => seed::derive(seed, seed::STREAM_LOCAL ^ i as u64),
                LocalSeeding::Shared => global_params.seed,
            };
            let mut forest = fit_forest_on(
                &local_data,
                &hyper.forest_params.clone().with_seed(local_seed),
            )?;
            forest.oob_indices = Vec::new();
            Ok(LocalForest {
                anchor,
                kernel: kernel.into_iter().map(|k| k as u32).collect(),
                forest,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GrfModel {
        global_forest,
        local_forests,
        hyper: hyper.clone(),
        feature_names: Vec::new(),
        index,
    })
}

fn subset(data: &TrainingSet, rows: &[usize]) -> TrainingSet {
    TrainingSet {
        columns: data
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect(),
        labels: rows.iter().map(|&r| data.labels[r]).collect(),
    }
}

impl GrfModel {
    /// Rebuilds a model from its stored parts, checking invariants.
    pub fn from_parts(
        global_forest: Forest,
        local_forests: Vec<LocalForest>,
        hyper: GrfHyperParams,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        hyper.validate()?;
        global_forest.validate()?;
        if local_forests.is_empty() {
            return Err(Error::InvalidModel("no local forests".into()));
        }
        if hyper.bandwidth_n > local_forests.len() {
            return Err(Error::InvalidModel(format!(
                "bandwidth {} exceeds {} anchors",
                hyper.bandwidth_n,
                local_forests.len()
            )));
        }
        let p = global_forest.feature_count;
        for lf in &local_forests {
            if !lf.anchor.is_finite() {
                return Err(Error::InvalidModel("non-finite anchor".into()));
            }
            if lf.forest.feature_count != p {
                return Err(Error::InvalidModel(
                    "local forest feature count differs from global".into(),
                ));
            }
            if lf.kernel.len() != hyper.bandwidth_n
                || lf.kernel.iter().any(|&k| k as usize >= local_forests.len())
            {
                return Err(Error::InvalidModel(
                    "kernel inconsistent with bandwidth".into(),
                ));
            }
            lf.forest.validate()?;
        }
        if !feature_names.is_empty() && feature_names.len() != p {
            return Err(Error::InvalidModel(format!(
                "{} feature names for {p} features",
                feature_names.len()
            )));
        }
        let index = SpatialIndex::new(local_forests.iter().map(|l| l.anchor).collect());
        Ok(GrfModel {
            global_forest,
            local_forests,
            hyper,
            feature_names,
            index,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_count() {
            return Err(Error::InvalidParameter(format!(
                "{} feature names for {} features",
                names.len(),
                self.feature_count()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn feature_count(&self) -> usize {
        self.global_forest.feature_count
    }

    pub fn anchors(&self) -> impl Iterator<Item = Coord> + '_ {
        self.local_forests.iter().map(|l| l.anchor)
    }

    pub fn spatial_index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn nearest_anchor(&self, coord: Coord) -> Result<usize> {
        self.index.nearest(coord)
    }

    fn check_input(&self, x: &[f64], coord: Coord) -> Result<()> {
        if x.len() != self.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count(),
                got: x.len(),
            });
        }
        if !coord.is_finite() {
            return Err(Error::NonFinite(format!("query coordinate {coord:?}")));
        }
        Ok(())
    }

    fn local_component(&self, x: &[f64], coord: Coord) -> Result<(usize, f64)> {
        match self.hyper.local_mixing {
            LocalMixing::Nearest => {
                let anchor = self.index.nearest(coord)?;
                Ok((
                    anchor,
                    self.local_forests[anchor].forest.predict_unchecked(x),
                ))
            }
            LocalMixing::InverseDistance { k, power } => {
                let hits = self.index.knn_with_dist_sq(coord, k)?;
                let anchor = hits[0].0;
                if hits[0].1.sqrt() < 1e-9 {
                    return Ok((
                        anchor,
                        self.local_forests[anchor].forest.predict_unchecked(x),
                    ));
                }
                let (mut num, mut den) = (0.0, 0.0);
                for (i, d2) in hits {
                    let w = d2.sqrt().powf(-power);
                    num += w * self.local_forests[i].forest.predict_unchecked(x);
                    den += w;
                }
                Ok((anchor, num / den))
            }
        }
    }

    /// Global and local components without blending.
    pub fn components(&self, x: &[f64], coord: Coord) -> Result<PredictionTrace> {
        self.check_input(x, coord)?;
        let global = self.global_forest.predict_unchecked(x);
        let (anchor, local) = self.local_component(x, coord)?;
        Ok(PredictionTrace {
            anchor,
            local,
            global,
            blended: blend(self.hyper.local_weight_a, local, global),
        })
    }

    pub fn predict_traced(&self, x: &[f64], coord: Coord) -> Result<PredictionTrace> {
        self.components(x, coord)
    }

    /// Blended class-1 probability using the model's localization weight.
    pub fn predict(&self, x: &[f64], coord: Coord) -> Result<f64> {
        self.predict_with_weight(x, coord, self.hyper.local_weight_a)
    }

    /// Blended class-1 probability with an explicit localization weight.
    pub fn predict_with_weight(&self, x: &[f64], coord: Coord, a: f64) -> Result<f64> {
        check_weight(a)?;
        let t = self.components(x, coord)?;
        Ok(blend(a, t.local, t.global))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>], coords: &[Coord]) -> Result<Vec<f64>> {
        if rows.len() != coords.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: coords.len(),
            });
        }
        rows.par_iter()
            .zip(coords.par_iter())
            .map(|(x, &c)| self.predict(x, c))
            .collect()
    }

    pub fn set_local_weight(&mut self, a: f64) -> Result<()> {
        check_weight(a)?;
        self.hyper.local_weight_a = a;
        Ok(())
    }

    /// Global-forest Gini importance.
    pub fn feature_importance(&self) -> Vec<f64> {
        self.global_forest.feature_importance()
    }
}
