//! Spatially localized random forests for geolocated binary outcomes.
//!
//! The crate covers the whole modelling pipeline:
//!
//! - [`forest`]: CART classification trees and bootstrap forests emitting class-1 probabilities.
//! - [`grf`]: the geographical random forest, a global forest blended with per-location
//!   local forests fit on n-nearest-neighbour kernels.
//! - [`preprocess`]: SMOTE rebalancing, z-score standardization, Mann-Whitney U, VIF and
//!   the feature-selection rule.
//! - [`geo`]: buffer aggregation, prediction grids, IDW and KDE surfaces.
//! - [`eval`]: confusion matrices, recall/precision/accuracy, R², localization sweeps and
//!   zone t-tests.
//! - [`pipeline`]: file formats and the batch commands driven by the CLI.
//!
//! Coordinates are planar, in meters (a projected CRS).

pub mod error;
pub mod eval;
pub mod forest;
pub mod geo;
pub mod grf;
pub mod pipeline;
pub mod preprocess;
pub mod protocol;
pub mod sample;
pub mod spatial;

mod seed;

pub use error::{Error, Result};
pub use forest::{Forest, ForestParams, TreeNode};
pub use grf::{GrfHyperParams, GrfModel};
pub use sample::{Coord, LabeledSample};
pub use spatial::SpatialIndex;
