//! Binary-classification evaluation, localization sweeps and zone t-tests.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::grf::{blend, fit_grf, GrfHyperParams, GrfModel};
use crate::preprocess::FeatureMatrix;
use crate::protocol::{prepare, TrainProtocol};
use crate::sample::LabeledSample;

/// Decision threshold: probabilities `>=` this are class 1.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(predictions: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} must be in (0, 1)"
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Recall, precision and accuracy; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    Metrics {
        recall: ratio(cm.tp, cm.tp + cm.fn_),
        precision: ratio(cm.tp, cm.tp + cm.fp),
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
    }
}

/// `1 - SS_res / SS_tot`; `None` for fewer than 2 labels or zero label variance.
pub fn r_squared(predictions: &[f64], labels: &[f64]) -> Result<Option<f64>> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if labels.len() < 2 {
        return Ok(None);
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let ss_tot: f64 = labels.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(None);
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (y - p).powi(2))
        .sum();
    Ok(Some(1.0 - ss_res / ss_tot))
}

/// Scores of one model on one labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub r2: Option<f64>,
}

pub fn evaluate(predictions: &[f64], labels: &[u8]) -> Result<Evaluation> {
    let cm = confusion(predictions, labels, DEFAULT_THRESHOLD)?;
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    Ok(Evaluation {
        confusion: cm,
        metrics: metrics(&cm),
        r2: r_squared(predictions, &y)?,
    })
}

pub fn evaluate_forest(forest: &Forest, samples: &[LabeledSample]) -> Result<Evaluation> {
    let preds = samples
        .iter()
        .map(|s| forest.predict_proba(&s.features))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    evaluate(&preds, &labels)
}

pub fn evaluate_grf(model: &GrfModel, samples: &[LabeledSample], a: f64) -> Result<Evaluation> {
    let preds = samples
        .iter()
        .map(|s| model.predict_with_weight(&s.features, s.coord, a))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    evaluate(&preds, &labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    /// R² of the blended predictions on the test split.
    pub r2: Option<f64>,
    /// R² of the global forest alone on the test split.
    pub r2_global: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub remarks: String,
}

pub const BEST_ACCURACY: &str = "Best Accuracy";
pub const BEST_RECALL: &str = "Best Recall";

/// Index of the maximum defined value; ties go to the lower `a`, then the earlier row.
fn argmax_by(rows: &[SweepRow], key: impl Fn(&SweepRow) -> Option<f64>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let Some(v) = key(row) else { continue };
        best = match best {
            None => Some(i),
            Some(b) => {
                let bv = key(&rows[b]).unwrap_or(f64::NEG_INFINITY);
                if v > bv || (v == bv && row.a < rows[b].a) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Rewrites `remarks` with "Best Accuracy" / "Best Recall" at the argmax rows.
pub fn annotate_best(rows: &mut [SweepRow]) {
    let acc = argmax_by(rows, |r| r.accuracy);
    let rec = argmax_by(rows, |r| r.recall);
    for (i, row) in rows.iter_mut().enumerate() {
        let mut tags = Vec::new();
        if acc == Some(i) {
            tags.push(BEST_ACCURACY);
        }
        if rec == Some(i) {
            tags.push(BEST_RECALL);
        }
        row.remarks = tags.join("; ");
    }
}

/// Output of a localization sweep, with the shared model kept for inspection.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub model: GrfModel,
    pub test: Vec<LabeledSample>,
}

/// One split, one fitted model, re-blended at every `a`. Fitting does not
/// depend on `a`, so this equals fitting a model per `a` with a shared seed.
pub fn sweep_localization(
    samples: &[LabeledSample],
    hyper_base: &GrfHyperParams,
    a_values: &[f64],
    split_seed: u64,
    protocol: &TrainProtocol,
) -> Result<Sweep> {
    if a_values.is_empty() {
        return Err(Error::InvalidParameter("a_values must be non-empty".into()));
    }
    if let Some(a) = a_values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidParameter(format!("a = {a} outside [0, 1]")));
    }
    let split = prepare(samples, protocol, split_seed)?;
    let model = fit_grf(&split.train, hyper_base, hyper_base.forest_params.seed)?;
    let rows = sweep_rows(&model, &split.test, a_values)?;
    Ok(Sweep {
        rows,
        model,
        test: split.test,
    })
}

/// Evaluates a fitted model on `test` at each `a`.
pub fn sweep_rows(
    model: &GrfModel,
    test: &[LabeledSample],
    a_values: &[f64],
) -> Result<Vec<SweepRow>> {
    let traces = test
        .iter()
        .map(|s| model.components(&s.features, s.coord))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = test.iter().map(|s| s.label).collect();
    let global: Vec<f64> = traces.iter().map(|t| t.global).collect();
    let global_eval = evaluate(&global, &labels)?;
    let mut rows = a_values
        .iter()
        .map(|&a| {
            let preds: Vec<f64> = traces.iter().map(|t| blend(a, t.local, t.global)).collect();
            let e = evaluate(&preds, &labels)?;
            Ok(SweepRow {
                a,
                r2: e.r2,
                r2_global: global_eval.r2,
                accuracy: e.metrics.accuracy,
                precision: e.metrics.precision,
                recall: e.metrics.recall,
                confusion: e.confusion,
                remarks: String::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    annotate_best(&mut rows);
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// Table-shaped CSV: `a,global_pct,local_pct,r2,r2_global,accuracy,precision,recall,remarks`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "a",
        "global_pct",
        "local_pct",
        "r2",
        "r2_global",
        "accuracy",
        "precision",
        "recall",
        "remarks",
    ])?;
    for r in rows {
        w.write_record([
            format!("{}", r.a),
            format!("{:.2}", (1.0 - r.a) * 100.0),
            format!("{:.2}", r.a * 100.0),
            opt(r.r2),
            opt(r.r2_global),
            opt(r.accuracy),
            opt(r.precision),
            opt(r.recall),
            r.remarks.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Positive => "positive",
            Direction::Negative => "negative",
            Direction::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_diff: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test of `a` against `b`; both need ≥ 2 values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Data(
            "Welch t-test needs ≥ 2 values per group".into(),
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(WelchTest {
            t,
            df: (a.len() + b.len() - 2) as f64,
            p_two_sided: p,
            mean_diff: diff,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchTest {
        t,
        df,
        p_two_sided: p,
        mean_diff: diff,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTest {
    pub feature: String,
    /// `None` when a zone has fewer than 2 cells.
    pub test: Option<WelchTest>,
    /// Sign of (high-zone mean − low-zone mean).
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAssociation {
    pub n_high: usize,
    pub n_low: usize,
    pub tests: Vec<ZoneTest>,
}

/// Per-feature Welch t-test between cells with `risk >= risk_threshold` and the rest.
pub fn zone_association_ttest(
    risks: &[f64],
    cell_features: &FeatureMatrix,
    risk_threshold: f64,
) -> Result<ZoneAssociation> {
    if risks.len() != cell_features.n_rows() {
        return Err(Error::LengthMismatch {
            left: risks.len(),
            right: cell_features.n_rows(),
        });
    }
    let high: Vec<bool> = risks.iter().map(|&r| r >= risk_threshold).collect();
    let n_high = high.iter().filter(|&&h| h).count();
    let n_low = risks.len() - n_high;
    let tests = (0..cell_features.n_features())
        .map(|j| {
            let (mut hi, mut lo) = (Vec::new(), Vec::new());
            for (row, &h) in cell_features.rows.iter().zip(&high) {
                if h {
                    hi.push(row[j]);
                } else {
                    lo.push(row[j]);
                }
            }
            let test = welch_t_test(&hi, &lo).ok();
            let direction = match test.map(|t| t.mean_diff) {
                Some(d) if d > 0.0 => Direction::Positive,
                Some(d) if d < 0.0 => Direction::Negative,
                _ => Direction::None,
            };
            ZoneTest {
                feature: cell_features.feature_names[j].clone(),
                test,
                direction,
            }
        })
        .collect();
    if n_high < 2 || n_low < 2 {
        log::warn!("zone t-tests skipped: {n_high} high-risk and {n_low} low-risk cells");
    }
    Ok(ZoneAssociation {
        n_high,
        n_low,
        tests,
    })
}
