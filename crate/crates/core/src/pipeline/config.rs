use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::geo::AggregateMode;
use crate::grf::GrfHyperParams;
use crate::preprocess::SelectionThresholds;
use crate::protocol::TrainProtocol;

pub const SCHEMA_VERSION: u32 = 1;

/// Localization weights swept by default.
pub const DEFAULT_SWEEP: [f64; 6] = [0.01, 0.16, 0.25, 0.50, 0.75, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    /// CSV (`u,v[,weight][,category]`) or GeoJSON point layer.
    pub path: PathBuf,
    pub mode: AggregateMode,
    /// One column per listed category; empty aggregates the whole layer into one column.
    #[serde(default)]
    pub categories: Vec<String>,
}

impl LayerSpec {
    pub fn column_names(&self) -> Vec<String> {
        if self.categories.is_empty() {
            vec![self.name.clone()]
        } else {
            self.categories
                .iter()
                .map(|c| format!("{}_{}", self.name, c))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdwSettings {
    /// Also write an IDW-interpolated surface at `grid_spacing_m / refine`.
    pub enabled: bool,
    pub power: f64,
    pub k: usize,
    pub refine: u32,
}

impl Default for IdwSettings {
    fn default() -> Self {
        IdwSettings {
            enabled: false,
            power: 2.0,
            k: 12,
            refine: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub events: PathBuf,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub boundary: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub buffer_radius_m: f64,
    pub grid_spacing_m: f64,
    pub grf: GrfHyperParams,
    pub selection: SelectionThresholds,
    pub protocol: TrainProtocol,
    pub split_seed: u64,
    /// Raw severity label → binary class.
    pub severity_mapping: BTreeMap<String, u8>,
    pub sweep_a_values: Vec<f64>,
    pub idw: IdwSettings,
    /// Relative paths resolve against this directory (the config file's).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub fn default_severity_mapping() -> BTreeMap<String, u8> {
    [
        ("no_damage", 0u8),
        ("minor", 0),
        ("moderate", 1),
        ("major", 1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            events: PathBuf::from("events.csv"),
            layers: Vec::new(),
            boundary: None,
            output_dir: PathBuf::from("out"),
            buffer_radius_m: 400.0,
            grid_spacing_m: 100.0,
            grf: GrfHyperParams::new(50, 0.5, ForestParams::default()),
            selection: SelectionThresholds::default(),
            protocol: TrainProtocol::default(),
            split_seed: 0,
            severity_mapping: default_severity_mapping(),
            sweep_a_values: DEFAULT_SWEEP.to_vec(),
            idw: IdwSettings::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)?;
        config.validate()?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "config schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if [self.buffer_radius_m, self.grid_spacing_m]
            .iter()
            .any(|x| x.is_nan() || *x <= 0.0)
        {
            return Err(Error::InvalidParameter(
                "buffer_radius_m and grid_spacing_m must be > 0".into(),
            ));
        }
        self.grf.validate()?;
        if self.severity_mapping.values().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "severity mapping values must be 0 or 1".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for col in self.layers.iter().flat_map(LayerSpec::column_names) {
            if !names.insert(col.clone()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate feature column {col}"
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    /// Feature column names, in featurize order.
    pub fn feature_columns(&self) -> Vec<String> {
        self.layers
            .iter()
            .flat_map(LayerSpec::column_names)
            .collect()
    }
}
