//! Feature selection: keep a feature when `VIF < vif_max` or `p < p_max`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, vif, FeatureMatrix, GreaterIn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionThresholds {
    pub p_max: f64,
    pub vif_max: f64,
}

impl Default for SelectionThresholds {
    fn default() -> Self {
        SelectionThresholds {
            p_max: 0.2,
            vif_max: 10.0,
        }
    }
}

/// Which severity group has the larger mean rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityGroup {
    High,
    Low,
    None,
}

impl SeverityGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeverityGroup::High => "high",
            SeverityGroup::Low => "low",
            SeverityGroup::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" | "high severity" => Some(SeverityGroup::High),
            "low" | "low severity" => Some(SeverityGroup::Low),
            "" | "none" => Some(SeverityGroup::None),
            _ => None,
        }
    }
}

/// Per-feature test statistics fed to the selection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub feature: String,
    pub u_statistic: f64,
    pub p_value: f64,
    pub greater_in: SeverityGroup,
    pub vif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub feature: String,
    pub greater_in: SeverityGroup,
    pub u_statistic: f64,
    pub p_value: f64,
    pub vif: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
}

pub fn is_selected(p_value: f64, vif: f64, thresholds: &SelectionThresholds) -> bool {
    vif < thresholds.vif_max || p_value < thresholds.p_max
}

/// Applies the rule to precomputed statistics; output rows keep input order.
pub fn select_features(
    inputs: &[FeatureStats],
    thresholds: &SelectionThresholds,
) -> SelectionReport {
    SelectionReport {
        rows: inputs
            .iter()
            .map(|s| SelectionRow {
                feature: s.feature.clone(),
                greater_in: s.greater_in,
                u_statistic: s.u_statistic,
                p_value: s.p_value,
                vif: s.vif,
                selected: is_selected(s.p_value, s.vif, thresholds),
            })
            .collect(),
    }
}

/// Computes MWU (high-severity rows as sample A, so U is the high group's U)
/// and VIF for every column, then applies the rule.
pub fn feature_report(
    matrix: &FeatureMatrix,
    labels: &[u8],
    thresholds: &SelectionThresholds,
) -> Result<SelectionReport> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch {
            left: matrix.n_rows(),
            right: labels.len(),
        });
    }
    let n_high = labels.iter().filter(|&&l| l == 1).count();
    if n_high == 0 || n_high == labels.len() {
        return Err(Error::Data(
            "feature selection needs both severity classes".into(),
        ));
    }
    let vifs = vif(matrix)?;
    let stats = (0..matrix.n_features())
        .map(|j| {
            let (mut high, mut low) = (Vec::new(), Vec::new());
            for (row, &l) in matrix.rows.iter().zip(labels) {
                if l == 1 {
                    high.push(row[j]);
                } else {
                    low.push(row[j]);
                }
            }
            let r = mann_whitney_u(&high, &low)?;
            Ok(FeatureStats {
                feature: matrix.feature_names[j].clone(),
                u_statistic: r.u,
                p_value: r.p_two_sided,
                greater_in: match r.greater_in {
                    GreaterIn::SampleA => SeverityGroup::High,
                    GreaterIn::SampleB => SeverityGroup::Low,
                    GreaterIn::Neither => SeverityGroup::None,
                },
                vif: vifs[j],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(select_features(&stats, thresholds))
}

impl SelectionReport {
    pub fn selected_names(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| r.selected)
            .map(|r| r.feature.clone())
            .collect()
    }

    /// CSV with columns `feature,greater_in,U,p,VIF,selected`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "greater_in", "U", "p", "VIF", "selected"])?;
        for r in &self.rows {
            w.write_record([
                r.feature.clone(),
                r.greater_in.as_str().to_string(),
                r.u_statistic.to_string(),
                format!("{:.6}", r.p_value),
                format!("{:.6}", r.vif),
                r.selected.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<selection report>", e))?;
        Ok(())
    }
}
