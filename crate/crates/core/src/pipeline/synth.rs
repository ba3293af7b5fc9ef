//! Synthetic data with planted spatial heterogeneity.
//!
//! `regions`: disc-shaped regions with iid standard-normal features. One
//! feature acts the same everywhere; a few others change sign between
//! regions, so a single global model sees little net effect from them.
//!
//! `city`: a small study area with point layers, an events file, a boundary
//! and a ready-to-run config.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::commands::{featurize_points, FEATURES_CSV, FEATURES_MANIFEST};
use super::config::{LayerSpec, PipelineConfig, SCHEMA_VERSION};
use super::io::{
    write_boundary, write_events, write_json, EventRecord, FeatureManifest, FeatureTable, Severity,
};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::geo::{AggregateMode, Boundary, GeoLayer, GeoPoint, Polygon};
use crate::grf::GrfHyperParams;
use crate::sample::Coord;
use crate::seed;

const STREAM_LAYOUT: u64 = 1;
const STREAM_FEATURES: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_SEVERITY: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionsParams {
    pub n: usize,
    pub n_regions: usize,
    pub n_features: usize,
    /// Share of rows labelled high severity.
    pub minority_fraction: f64,
    /// Coefficient of feature 0 in every region.
    pub global_coef: f64,
    /// Magnitude of the region-specific coefficients.
    pub local_coef: f64,
    /// Scale of the logistic noise added to the latent score.
    pub noise_scale: f64,
    pub region_radius_m: f64,
    pub region_spacing_m: f64,
}

impl Default for RegionsParams {
    fn default() -> Self {
        RegionsParams {
            n: 600,
            n_regions: 3,
            n_features: 10,
            minority_fraction: 0.17,
            global_coef: 1.0,
            local_coef: 1.0,
            noise_scale: 0.7,
            region_radius_m: 1000.0,
            region_spacing_m: 5000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub table: FeatureTable,
    pub region: Vec<usize>,
    /// `coefficients[r][j]`: planted effect of feature `j` in region `r`.
    pub coefficients: Vec<Vec<f64>>,
    pub centers: Vec<Coord>,
}

impl RegionsParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_regions == 0 || self.n < self.n_regions || self.n_features == 0 {
            return Err(Error::InvalidParameter(
                "need n ≥ n_regions ≥ 1 and at least one feature".into(),
            ));
        }
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 1.0) {
            return Err(Error::InvalidParameter(
                "minority_fraction must be in (0, 1)".into(),
            ));
        }
        if !(self.noise_scale >= 0.0 && self.region_radius_m > 0.0 && self.region_spacing_m > 0.0) {
            return Err(Error::InvalidParameter(
                "noise and geometry parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Region `r` raises the score with feature `1 + r mod m` and lowers it
    /// with feature `1 + (r+1) mod m`, where `m = min(3, p-1)`.
    pub fn coefficients(&self) -> Vec<Vec<f64>> {
        let m = (self.n_features - 1).min(3);
        (0..self.n_regions)
            .map(|r| {
                let mut c = vec![0.0; self.n_features];
                c[0] = self.global_coef;
                if m >= 1 {
                    c[1 + r % m] += self.local_coef;
                }
                if m >= 2 {
                    c[1 + (r + 1) % m] -= self.local_coef;
                }
                c
            })
            .collect()
    }
}

fn logistic_noise<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
    (u / (1.0 - u)).ln()
}

fn point_in_disc<R: Rng>(rng: &mut R, center: Coord, radius: f64) -> Coord {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    Coord::new(center.u + r * theta.cos(), center.v + r * theta.sin())
}

/// Labels the top `round(fraction · n)` scores 1 (ties to the lower index).
fn top_fraction(scores: &[f64], fraction: f64) -> Vec<u8> {
    let n_pos = (fraction * scores.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; scores.len()];
    for &i in &order[..n_pos] {
        labels[i] = 1;
    }
    labels
}

pub fn synth_regions(params: &RegionsParams, seed_value: u64) -> Result<SynthData> {
    params.validate()?;
    let coefficients = params.coefficients();
    let centers: Vec<Coord> = (0..params.n_regions)
        .map(|r| Coord::new(r as f64 * params.region_spacing_m, 0.0))
        .collect();
    let mut layout = seed::rng(seed::derive(seed_value, STREAM_LAYOUT));
    let mut feat_rng = seed::rng(seed::derive(seed_value, STREAM_FEATURES));
    let mut noise_rng = seed::rng(seed::derive(seed_value, STREAM_NOISE));

    let mut region = Vec::with_capacity(params.n);
    let mut coords = Vec::with_capacity(params.n);
    let mut rows = Vec::with_capacity(params.n);
    let mut scores = Vec::with_capacity(params.n);
    for i in 0..params.n {
        let r = i % params.n_regions;
        let coord = point_in_disc(&mut layout, centers[r], params.region_radius_m);
        let x: Vec<f64> = (0..params.n_features)
            .map(|_| StandardNormal.sample(&mut feat_rng))
            .collect();
        let z: f64 = x
            .iter()
            .zip(&coefficients[r])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + params.noise_scale * logistic_noise(&mut noise_rng);
        region.push(r);
        coords.push(coord);
        rows.push(x);
        scores.push(z);
    }
    let labels = top_fraction(&scores, params.minority_fraction);
    let table = FeatureTable {
        ids: (0..params.n).map(|i| format!("e{i}")).collect(),
        coords,
        labels,
        feature_names: (0..params.n_features).map(|j| format!("x{j}")).collect(),
        rows,
    };
    Ok(SynthData {
        table,
        region,
        coefficients,
        centers,
    })
}

fn severity_for<R: Rng>(label: u8, rng: &mut R) -> Severity {
    match (label, rng.random_bool(0.5)) {
        (1, true) => Severity::Major,
        (1, false) => Severity::Moderate,
        (_, true) => Severity::Minor,
        (_, false) => Severity::NoDamage,
    }
}

fn events_of(table: &FeatureTable, seed_value: u64) -> Vec<EventRecord> {
    let mut rng = seed::rng(seed::derive(seed_value, STREAM_SEVERITY));
    (0..table.len())
        .map(|i| EventRecord {
            id: table.ids[i].clone(),
            coord: table.coords[i],
            severity_raw: severity_for(table.labels[i], &mut rng),
            severity_binary: table.labels[i],
        })
        .collect()
}

/// Writes `features.csv`, `features.manifest.json` and `events.csv` under `dir`.
pub fn write_regions(dir: &Path, params: &RegionsParams, seed_value: u64) -> Result<SynthData> {
    let data = synth_regions(params, seed_value)?;
    data.table.write_csv(&dir.join(FEATURES_CSV))?;
    write_json(
        &dir.join(FEATURES_MANIFEST),
        &FeatureManifest {
            schema_version: SCHEMA_VERSION,
            features: data.table.feature_names.clone(),
            buffer_radius_m: None,
        },
    )?;
    write_events(&dir.join("events.csv"), &events_of(&data.table, seed_value))?;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityParams {
    pub n_events: usize,
    pub extent_m: f64,
    pub points_per_layer: usize,
    pub hotspots_per_layer: usize,
    pub minority_fraction: f64,
    pub buffer_radius_m: f64,
    pub bandwidth_n: usize,
    pub b_trees: usize,
}

impl Default for CityParams {
    fn default() -> Self {
        CityParams {
            n_events: 500,
            extent_m: 4000.0,
            points_per_layer: 600,
            hotspots_per_layer: 5,
            minority_fraction: 0.17,
            buffer_radius_m: 400.0,
            bandwidth_n: 100,
            b_trees: 100,
        }
    }
}

pub const CITY_LAYERS: [(&str, AggregateMode); 6] = [
    ("poi", AggregateMode::Count),
    ("shop", AggregateMode::Count),
    ("landuse", AggregateMode::WeightSum),
    ("parking", AggregateMode::WeightMean),
    ("intersection", AggregateMode::Count),
    ("transit", AggregateMode::Count),
];
pub const CITY_CATEGORIES: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone)]
pub struct CityFiles {
    pub config_path: PathBuf,
    pub events: Vec<EventRecord>,
}

/// L-shaped boundary: the square extent minus its upper-right quarter.
fn city_boundary(extent: f64) -> Boundary {
    let h = extent / 2.0;
    Boundary {
        polygons: vec![Polygon::new(vec![
            Coord::new(0.0, 0.0),
            Coord::new(extent, 0.0),
            Coord::new(extent, h),
            Coord::new(h, h),
            Coord::new(h, extent),
            Coord::new(0.0, extent),
        ])],
    }
}

fn write_layer_csv(path: &Path, layer: &GeoLayer) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{other:?}")),
    })?;
    w.write_record(["u", "v", "weight", "category"])?;
    for f in &layer.features {
        w.write_record([
            f.coord.u.to_string(),
            f.coord.v.to_string(),
            f.weight.map_or_else(String::new, |x| x.to_string()),
            f.category.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes layers, events, a boundary and `config.json` under `dir`.
pub fn write_city(dir: &Path, params: &CityParams, seed_value: u64) -> Result<CityFiles> {
    if params.n_events < 10 || params.extent_m.is_nan() || params.extent_m <= 0.0 {
        return Err(Error::InvalidParameter(
            "city scenario needs ≥10 events and a positive extent".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let boundary = city_boundary(params.extent_m);
    let mut rng = seed::rng(seed::derive(seed_value, STREAM_LAYOUT));
    let sample_inside = |rng: &mut rand_chacha::ChaCha8Rng| loop {
        let c = Coord::new(
            rng.random_range(0.0..params.extent_m),
            rng.random_range(0.0..params.extent_m),
        );
        if boundary.contains(c) {
            return c;
        }
    };

    let spread = Normal::new(0.0, params.extent_m / 10.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut layers = Vec::new();
    let mut specs = Vec::new();
    for (name, mode) in CITY_LAYERS {
        let hotspots: Vec<Coord> = (0..params.hotspots_per_layer.max(1))
            .map(|_| sample_inside(&mut rng))
            .collect();
        let mut features = Vec::with_capacity(params.points_per_layer);
        for k in 0..params.points_per_layer {
            let h = hotspots[k % hotspots.len()];
            let coord = if rng.random_bool(0.7) {
                Coord::new(h.u + spread.sample(&mut rng), h.v + spread.sample(&mut rng))
            } else {
                sample_inside(&mut rng)
            };
            let weight = match mode {
                AggregateMode::Count => None,
                _ => Some((rng.random_range(1.0..50.0_f64) * 100.0).round() / 100.0),
            };
            let category = CITY_CATEGORIES[rng.random_range(0..CITY_CATEGORIES.len())].to_string();
            features.push(GeoPoint {
                coord,
                weight,
                category: Some(category),
            });
        }
        let file = format!("layer_{name}.csv");
        let layer = GeoLayer::new(name, features)?;
        write_layer_csv(&dir.join(&file), &layer)?;
        let spec = LayerSpec {
            name: name.to_string(),
            path: PathBuf::from(file),
            mode,
            categories: CITY_CATEGORIES.iter().map(|c| c.to_string()).collect(),
        };
        layers.push((spec.clone(), layer));
        specs.push(spec);
    }

    let coords: Vec<Coord> = (0..params.n_events)
        .map(|_| sample_inside(&mut rng))
        .collect();
    let feats = featurize_points(&layers, &coords, params.buffer_radius_m)?;
    // Standardize columns, then score with coefficients that flip across the
    // left and right halves of the area.
    let p = feats.names.len();
    let n = coords.len() as f64;
    let stats: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let mean = feats.rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = feats
                .rows
                .iter()
                .map(|r| (r[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt().max(1e-9))
        })
        .collect();
    let mut noise_rng = seed::rng(seed::derive(seed_value, STREAM_NOISE));
    let scores: Vec<f64> = coords
        .iter()
        .zip(&feats.rows)
        .map(|(c, row)| {
            let z = |j: usize| (row[j] - stats[j].0) / stats[j].1;
            let side = if c.u < params.extent_m / 2.0 {
                1.0
            } else {
                -1.0
            };
            z(0) + 0.8 * z(8) + side * (z(4) - z(20)) + 0.5 * logistic_noise(&mut noise_rng)
        })
        .collect();
    let labels = top_fraction(&scores, params.minority_fraction);
    let mut sev_rng = seed::rng(seed::derive(seed_value, STREAM_SEVERITY));
    let events: Vec<EventRecord> = coords
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (&coord, &label))| EventRecord {
            id: format!("c{i}"),
            coord,
            severity_raw: severity_for(label, &mut sev_rng),
            severity_binary: label,
        })
        .collect();
    write_events(&dir.join("events.csv"), &events)?;
    write_boundary(&dir.join("boundary.geojson"), &boundary)?;

    let mut config = PipelineConfig {
        events: PathBuf::from("events.csv"),
        layers: specs,
        boundary: Some(PathBuf::from("boundary.geojson")),
        output_dir: PathBuf::from("out"),
        buffer_radius_m: params.buffer_radius_m,
        grf: GrfHyperParams::new(
            params.bandwidth_n,
            0.5,
            ForestParams {
                b_trees: params.b_trees,
                seed: seed_value,
                ..Default::default()
            },
        ),
        split_seed: seed_value,
        ..Default::default()
    };
    config.base_dir = dir.to_path_buf();
    config.validate()?;
    let config_path = dir.join("config.json");
    config.save(&config_path)?;
    Ok(CityFiles {
        config_path,
        events,
    })
}
