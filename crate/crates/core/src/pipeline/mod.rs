//! File-based pipeline: featurize, select, train, sweep, riskmap, importance
//! and synthetic-data generation.

pub mod commands;
pub mod config;
pub mod io;
pub mod synth;

pub use commands::{
    cmd_featurize, cmd_importance, cmd_riskmap, cmd_select, cmd_sweep, cmd_train, featurize_points,
    load_layers, run_all, BufferFeatures, ImportanceRow, ModelFile, RiskMap, RunArtifacts,
    TrainReport,
};
pub use config::{IdwSettings, LayerSpec, PipelineConfig, DEFAULT_SWEEP, SCHEMA_VERSION};
pub use io::{EventRecord, FeatureManifest, FeatureTable, Severity};
pub use synth::{synth_regions, write_city, write_regions, CityParams, RegionsParams, SynthData};
