//! The pipeline stages. Each command reads its inputs from files, writes its
//! artifacts under the configured output directory and returns what it wrote.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{LayerSpec, PipelineConfig, SCHEMA_VERSION};
use super::io::{
    read_boundary, read_events, read_grid_csv, read_json_as, read_layer, write_grid_csv,
    write_grid_geojson, write_json, FeatureManifest, FeatureTable, GridTable,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, evaluate_forest, sweep_localization, write_sweep_csv, zone_association_ttest,
    Direction, Evaluation, SweepRow, DEFAULT_THRESHOLD,
};
use crate::geo::{
    buffer_aggregate, make_grid, make_grid_clipped, AggregateMode, BBox, GeoLayer, IdwInterpolator,
    RiskGrid,
};
use crate::grf::{fit_grf, GrfModel};
use crate::preprocess::{feature_report, FeatureMatrix, SelectionReport, Standardizer};
use crate::protocol::{prepare, PreparedSplit};
use crate::sample::Coord;

pub const MODEL_FORMAT: &str = "grf-risk-model";

pub const FEATURES_CSV: &str = "features.csv";
pub const FEATURES_MANIFEST: &str = "features.manifest.json";
pub const SELECTION_CSV: &str = "selection.csv";
pub const SELECTED_MANIFEST: &str = "selected_features.json";
pub const MODEL_JSON: &str = "model.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const RISK_GEOJSON: &str = "risk.geojson";
pub const RISK_CSV: &str = "risk.csv";
pub const RISK_IDW_GEOJSON: &str = "risk_idw.geojson";
pub const IMPORTANCE_CSV: &str = "importance.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ))
    }
}

/// Loads every configured layer, resolving paths against the config directory.
pub fn load_layers(config: &PipelineConfig) -> Result<Vec<(LayerSpec, GeoLayer)>> {
    config
        .layers
        .iter()
        .map(|spec| {
            let path = config.resolve(&spec.path);
            require(&path)?;
            Ok((spec.clone(), read_layer(&path, &spec.name)?))
        })
        .collect()
}

/// Buffer aggregates for every layer column at each center.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferFeatures {
    pub names: Vec<String>,
    pub modes: Vec<AggregateMode>,
    /// Row-major, one row per center.
    pub rows: Vec<Vec<f64>>,
    /// `empty[i][j]`: no layer feature of column `j` within range of center `i`.
    pub empty: Vec<Vec<bool>>,
}

pub fn featurize_points(
    layers: &[(LayerSpec, GeoLayer)],
    centers: &[Coord],
    radius: f64,
) -> Result<BufferFeatures> {
    let mut names = Vec::new();
    let mut modes = Vec::new();
    let mut columns = Vec::new();
    for (spec, layer) in layers {
        let parts: Vec<GeoLayer> = if spec.categories.is_empty() {
            vec![layer.clone()]
        } else {
            spec.categories
                .iter()
                .map(|c| layer.with_category(c))
                .collect()
        };
        for (name, part) in spec.column_names().into_iter().zip(parts) {
            columns.push(buffer_aggregate(&part, centers, radius, spec.mode)?);
            names.push(name);
            modes.push(spec.mode);
        }
    }
    let rows = (0..centers.len())
        .map(|i| columns.iter().map(|c| c[i].value).collect())
        .collect();
    let empty = (0..centers.len())
        .map(|i| columns.iter().map(|c| c[i].empty).collect())
        .collect();
    Ok(BufferFeatures {
        names,
        modes,
        rows,
        empty,
    })
}

/// Events → one buffer-aggregated feature row each. Writes the feature table
/// and its column manifest.
pub fn cmd_featurize(config: &PipelineConfig) -> Result<FeatureTable> {
    let events_path = config.resolve(&config.events);
    require(&events_path)?;
    let events = read_events(&events_path, &config.severity_mapping)?;
    if events.is_empty() {
        return Err(Error::NoSamples);
    }
    let layers = load_layers(config)?;
    for (spec, layer) in &layers {
        if layer.features.is_empty() {
            log::warn!("layer {} is empty; its columns will be all zero", spec.name);
        }
    }
    let centers: Vec<Coord> = events.iter().map(|e| e.coord).collect();
    let feats = featurize_points(&layers, &centers, config.buffer_radius_m)?;
    let table = FeatureTable {
        ids: events.iter().map(|e| e.id.clone()).collect(),
        coords: centers,
        labels: events.iter().map(|e| e.severity_binary).collect(),
        feature_names: feats.names,
        rows: feats.rows,
    };
    table.write_csv(&config.out_path(FEATURES_CSV))?;
    write_json(
        &config.out_path(FEATURES_MANIFEST),
        &FeatureManifest {
            schema_version: SCHEMA_VERSION,
            features: table.feature_names.clone(),
            buffer_radius_m: Some(config.buffer_radius_m),
        },
    )?;
    log::info!(
        "featurized {} events into {} columns",
        table.len(),
        table.feature_names.len()
    );
    Ok(table)
}

fn table_or_default(config: &PipelineConfig, table: Option<&Path>) -> Result<FeatureTable> {
    let path = table.map_or_else(|| config.out_path(FEATURES_CSV), Path::to_path_buf);
    require(&path)?;
    FeatureTable::read_csv(&path)
}

fn manifest_or_default(
    config: &PipelineConfig,
    manifest: Option<&Path>,
) -> Result<FeatureManifest> {
    let path = manifest.map_or_else(|| config.out_path(SELECTED_MANIFEST), Path::to_path_buf);
    require(&path)?;
    let m: FeatureManifest = read_json_as(&path)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidParameter(format!(
            "{}: manifest schema_version {} unsupported",
            path.display(),
            m.schema_version
        )));
    }
    if m.features.is_empty() {
        return Err(Error::Data(format!(
            "{}: feature manifest is empty; nothing to train on",
            path.display()
        )));
    }
    Ok(m)
}

/// MWU + VIF per feature; writes the report CSV and the selected-feature manifest.
pub fn cmd_select(config: &PipelineConfig, table: Option<&Path>) -> Result<SelectionReport> {
    let table = table_or_default(config, table)?;
    let matrix = FeatureMatrix::new(table.rows.clone(), table.feature_names.clone())?;
    let report = feature_report(&matrix, &table.labels, &config.selection)?;
    report.write_csv(create(&config.out_path(SELECTION_CSV))?)?;
    let selected = report.selected_names();
    if selected.is_empty() {
        log::warn!("no feature passed selection");
    }
    write_json(
        &config.out_path(SELECTED_MANIFEST),
        &FeatureManifest {
            schema_version: SCHEMA_VERSION,
            features: selected,
            buffer_radius_m: None,
        },
    )?;
    Ok(report)
}

/// Persisted model: the fitted GRF plus what is needed to featurize new locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub standardizer: Option<Standardizer>,
    pub layers: Vec<LayerSpec>,
    pub buffer_radius_m: f64,
    pub model: GrfModel,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<ModelFile> {
        require(path)?;
        let m: ModelFile = read_json_as(path)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT || self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!(
                "expected format {MODEL_FORMAT} v{SCHEMA_VERSION}, got {} v{}",
                self.format, self.schema_version
            )));
        }
        if self.feature_names.len() != self.model.feature_count() {
            return Err(Error::InvalidModel(format!(
                "{} feature names for a {}-feature model",
                self.feature_names.len(),
                self.model.feature_count()
            )));
        }
        if let Some(st) = &self.standardizer {
            if st.columns.len() != self.feature_names.len() {
                return Err(Error::InvalidModel(
                    "standardizer width differs from feature count".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: ModelFile,
    pub evaluation: Evaluation,
    pub global_evaluation: Evaluation,
    pub split: PreparedSplit,
}

fn opt6(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn write_metrics_csv(
    path: &Path,
    a: f64,
    e: &Evaluation,
    g: &Evaluation,
    split: &PreparedSplit,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "a",
        "accuracy",
        "precision",
        "recall",
        "r2",
        "r2_global",
        "tp",
        "fp",
        "tn",
        "fn",
        "n_train",
        "n_test",
        "n_synthetic",
    ])?;
    w.write_record([
        format!("{a:.6}"),
        opt6(e.metrics.accuracy),
        opt6(e.metrics.precision),
        opt6(e.metrics.recall),
        opt6(e.r2),
        opt6(g.r2),
        e.confusion.tp.to_string(),
        e.confusion.fp.to_string(),
        e.confusion.tn.to_string(),
        e.confusion.fn_.to_string(),
        split.train_indices.len().to_string(),
        split.test_indices.len().to_string(),
        split.n_synthetic.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Split → standardize (train) → SMOTE (train) → fit → evaluate on the test split.
pub fn cmd_train(
    config: &PipelineConfig,
    table: Option<&Path>,
    manifest: Option<&Path>,
) -> Result<TrainReport> {
    let manifest = manifest_or_default(config, manifest)?;
    let table = table_or_default(config, table)?.select(&manifest.features)?;
    let samples = table.samples();
    let split = prepare(&samples, &config.protocol, config.split_seed)?;
    let bw = config.grf.bandwidth_n;
    if bw > split.train_indices.len() {
        return Err(Error::InvalidParameter(format!(
            "bandwidth_n = {bw} exceeds the {} training rows left after the {:.0}% test split; \
             lower grf.bandwidth_n to at most {} or supply more events",
            split.train_indices.len(),
            config.protocol.test_fraction * 100.0,
            split.train_indices.len()
        )));
    }
    let model = fit_grf(&split.train, &config.grf, config.grf.forest_params.seed)?
        .with_feature_names(manifest.features.clone())?;
    let labels: Vec<u8> = split.test.iter().map(|s| s.label).collect();
    let preds = split
        .test
        .iter()
        .map(|s| model.predict(&s.features, s.coord))
        .collect::<Result<Vec<_>>>()?;
    let evaluation = evaluate(&preds, &labels)?;
    let global_evaluation = evaluate_forest(&model.global_forest, &split.test)?;
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        schema_version: SCHEMA_VERSION,
        feature_names: manifest.features,
        standardizer: split.standardizer.clone(),
        layers: config.layers.clone(),
        buffer_radius_m: config.buffer_radius_m,
        model,
    };
    file.save(&config.out_path(MODEL_JSON))?;
    write_metrics_csv(
        &config.out_path(METRICS_CSV),
        config.grf.local_weight_a,
        &evaluation,
        &global_evaluation,
        &split,
    )?;
    Ok(TrainReport {
        model: file,
        evaluation,
        global_evaluation,
        split,
    })
}

/// Localization sweep over `a_values` (the configured list when `None`).
pub fn cmd_sweep(
    config: &PipelineConfig,
    table: Option<&Path>,
    manifest: Option<&Path>,
    a_values: Option<&[f64]>,
) -> Result<Vec<SweepRow>> {
    let manifest = manifest_or_default(config, manifest)?;
    let table = table_or_default(config, table)?.select(&manifest.features)?;
    let a_values = a_values.unwrap_or(&config.sweep_a_values);
    let sweep = sweep_localization(
        &table.samples(),
        &config.grf,
        a_values,
        config.split_seed,
        &config.protocol,
    )?;
    write_sweep_csv(&sweep.rows, create(&config.out_path(SWEEP_CSV))?)?;
    Ok(sweep.rows)
}

#[derive(Debug, Clone)]
pub struct RiskMap {
    pub grid: RiskGrid,
    /// Raw (unstandardized) cell features, model column order.
    pub features: Vec<Vec<f64>>,
    pub refined: Option<RiskGrid>,
}

fn study_grid(config: &PipelineConfig, spacing: f64) -> Result<RiskGrid> {
    match &config.boundary {
        Some(b) => {
            let path = config.resolve(b);
            require(&path)?;
            make_grid_clipped(&read_boundary(&path)?, spacing)
        }
        None => {
            log::warn!("no boundary configured; using the bounding box of the events");
            let path = config.resolve(&config.events);
            require(&path)?;
            let events = read_events(&path, &config.severity_mapping)?;
            let bbox = BBox::of_points(events.iter().map(|e| &e.coord)).ok_or(Error::NoSamples)?;
            make_grid(&bbox, spacing)
        }
    }
}

/// Cell features in model column order, standardized with the training stats.
/// Empty weight-mean buffers take the standardized mean, 0.
type Rows = Vec<Vec<f64>>;

fn cell_inputs(model: &ModelFile, feats: &BufferFeatures) -> Result<(Rows, Rows)> {
    let idx = model
        .feature_names
        .iter()
        .map(|n| {
            feats.names.iter().position(|f| f == n).ok_or_else(|| {
                Error::Data(format!(
                    "model feature {n:?} is not produced by the configured layers"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut n_filled = 0usize;
    let mut raw = Vec::with_capacity(feats.rows.len());
    let mut inputs = Vec::with_capacity(feats.rows.len());
    for (row, empty) in feats.rows.iter().zip(&feats.empty) {
        let r: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
        let mut x = match &model.standardizer {
            Some(st) => st.apply_row(&r)?,
            None => r.clone(),
        };
        for (k, &j) in idx.iter().enumerate() {
            if empty[j] && feats.modes[j] == AggregateMode::WeightMean {
                x[k] = 0.0;
                n_filled += 1;
            }
        }
        raw.push(r);
        inputs.push(x);
    }
    if n_filled > 0 {
        log::info!("{n_filled} empty weight-mean cell values set to the standardized mean");
    }
    Ok((raw, inputs))
}

/// Featurizes a lattice over the study area and predicts risk per cell.
pub fn cmd_riskmap(config: &PipelineConfig, model_path: Option<&Path>) -> Result<RiskMap> {
    let model_path = model_path.map_or_else(|| config.out_path(MODEL_JSON), Path::to_path_buf);
    let model = ModelFile::load(&model_path)?;
    let mut grid = study_grid(config, config.grid_spacing_m)?;
    if grid.cells.is_empty() {
        return Err(Error::Data(
            "risk grid has no cells inside the study area".into(),
        ));
    }
    let layers = load_layers(config)?;
    let centers = grid.coords();
    let feats = featurize_points(&layers, &centers, model.buffer_radius_m)?;
    let (raw, inputs) = cell_inputs(&model, &feats)?;
    let risks = model.model.predict_batch(&inputs, &centers)?;
    for (cell, r) in grid.cells.iter_mut().zip(&risks) {
        cell.risk = Some(*r);
    }
    write_grid_geojson(&config.out_path(RISK_GEOJSON), &grid)?;
    write_grid_csv(
        &config.out_path(RISK_CSV),
        &grid,
        &model.feature_names,
        Some(&raw),
    )?;

    let refined = if config.idw.enabled {
        let refine = config.idw.refine.max(1);
        let mut fine = study_grid(config, config.grid_spacing_m / refine as f64)?;
        let samples: Vec<(Coord, f64)> =
            centers.iter().copied().zip(risks.iter().copied()).collect();
        let idw = IdwInterpolator::new(&samples, config.idw.power, Some(config.idw.k))?;
        let values = idw.interpolate_many(&fine.coords())?;
        for (cell, v) in fine.cells.iter_mut().zip(values) {
            cell.risk = Some(v);
        }
        write_grid_geojson(&config.out_path(RISK_IDW_GEOJSON), &fine)?;
        Some(fine)
    } else {
        None
    };
    Ok(RiskMap {
        grid,
        features: raw,
        refined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub importance: f64,
    pub direction: Option<Direction>,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

/// Global-forest Gini importances, descending. When a risk CSV is given, each
/// feature's direction comes from the high/low risk-zone t-test.
pub fn cmd_importance(
    config: &PipelineConfig,
    model_path: Option<&Path>,
    risk_csv: Option<&Path>,
) -> Result<Vec<ImportanceRow>> {
    let model_path = model_path.map_or_else(|| config.out_path(MODEL_JSON), Path::to_path_buf);
    let model = ModelFile::load(&model_path)?;
    let importance = model.model.feature_importance();
    let zones = match risk_csv {
        Some(path) => {
            require(path)?;
            let GridTable {
                risks,
                feature_names: names,
                rows,
                ..
            } = read_grid_csv(path)?;
            let idx = model
                .feature_names
                .iter()
                .map(|n| {
                    names.iter().position(|f| f == n).ok_or_else(|| {
                        Error::Data(format!("{}: missing column {n:?}", path.display()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let cells = FeatureMatrix::new(
                rows.iter()
                    .map(|r| idx.iter().map(|&j| r[j]).collect())
                    .collect(),
                model.feature_names.clone(),
            )?;
            Some(zone_association_ttest(&risks, &cells, DEFAULT_THRESHOLD)?)
        }
        None => None,
    };
    let mut rows: Vec<ImportanceRow> = model
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let zt = zones.as_ref().map(|z| &z.tests[j]);
            ImportanceRow {
                feature: name.clone(),
                importance: importance[j],
                direction: zt.map(|z| z.direction),
                t: zt.and_then(|z| z.test.map(|t| t.t)),
                p: zt.and_then(|z| z.test.map(|t| t.p_two_sided)),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.importance.total_cmp(&a.importance));

    let path = config.out_path(IMPORTANCE_CSV);
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["feature", "importance", "direction", "t", "p"])?;
    for r in &rows {
        w.write_record([
            r.feature.clone(),
            format!("{:.6}", r.importance),
            r.direction.map_or("NA", |d| d.as_str()).to_string(),
            opt6(r.t),
            opt6(r.p),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

/// Artifacts of a full featurize → select → train → riskmap → importance run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
}

pub fn run_all(config: &PipelineConfig) -> Result<RunArtifacts> {
    cmd_featurize(config)?;
    cmd_select(config, None)?;
    cmd_train(config, None, None)?;
    cmd_riskmap(config, None)?;
    let risk = config.out_path(RISK_CSV);
    cmd_importance(config, None, Some(&risk))?;
    let mut files = vec![
        FEATURES_CSV,
        FEATURES_MANIFEST,
        SELECTION_CSV,
        SELECTED_MANIFEST,
        MODEL_JSON,
        METRICS_CSV,
        RISK_GEOJSON,
        RISK_CSV,
        IMPORTANCE_CSV,
    ];
    if config.idw.enabled {
        files.push(RISK_IDW_GEOJSON);
    }
    Ok(RunArtifacts {
        files: files.into_iter().map(|f| config.out_path(f)).collect(),
    })
}
