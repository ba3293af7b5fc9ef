//! Pre-model stages: standardization, SMOTE rebalancing and statistical
//! feature selection.

mod matrix;
pub mod mwu;
pub mod scale;
pub mod select;
pub mod smote;
pub mod vif;

pub use matrix::FeatureMatrix;
pub use mwu::{mann_whitney_u, GreaterIn, MwuMethod, MwuResult};
pub use scale::{zscore_fit_apply, ColumnStats, Standardizer};
pub use select::{
    feature_report, is_selected, select_features, FeatureStats, SelectionReport, SelectionRow,
    SelectionThresholds, SeverityGroup,
};
pub use smote::{interpolate, smote, smote_rows, SyntheticRow};
pub use vif::{vif, VIF_CAP};
