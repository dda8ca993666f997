//! Confusion matrices, classification metrics and stratified splitting.
//!
//! Precision, recall and F1 are reported per class and as macro and
//! support-weighted averages; the weighted average is the headline figure.
//! Any ratio with a zero denominator scores 0 and is flagged instead of
//! failing.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoding::LabelVector;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// Counts with rows indexed by the actual class and columns by the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    /// Actual-class totals (supports).
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Predicted-class totals.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_classes())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(
            format!("{} predictions", y_true.len()),
            y_pred.len(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidInput("class count must be positive".into()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&a, &p) in y_true.iter().zip(y_pred) {
        if a >= k || p >= k {
            return Err(Error::InvalidInput(format!(
                "label {} outside 0..{k}",
                a.max(p)
            )));
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Some ratio for this class had a zero denominator.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_samples: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
    pub cohen_kappa: f64,
    pub kappa_degenerate: bool,
    pub mcc: f64,
    pub mcc_degenerate: bool,
}

impl MetricsReport {
    pub fn precision(&self) -> f64 {
        self.weighted_avg.precision
    }

    pub fn recall(&self) -> f64 {
        self.weighted_avg.recall
    }

    pub fn f1(&self) -> f64 {
        self.weighted_avg.f1
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision(),
            Metric::Recall => self.recall(),
            Metric::F1 => self.f1(),
            Metric::Kappa => self.cohen_kappa,
            Metric::Mcc => self.mcc,
        }
    }
}

fn check_nonempty(cm: &ConfusionMatrix) -> Result<u64> {
    match cm.total() {
        0 => Err(Error::InvalidInput("empty confusion matrix".into())),
        t => Ok(t),
    }
}

pub fn metrics_report(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = check_nonempty(cm)?;
    let k = cm.n_classes();
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let (precision, dp) = ratio(tp, cols[c]);
            let (recall, dr) = ratio(tp, rows[c]);
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: rows[c],
                degenerate: dp || dr || precision + recall == 0.0,
            }
        })
        .collect();
    let average = |weight: &dyn Fn(&ClassMetrics) -> f64| {
        let norm: f64 = per_class.iter().map(weight).sum();
        let mean = |get: fn(&ClassMetrics) -> f64| {
            per_class.iter().map(|m| weight(m) * get(m)).sum::<f64>() / norm
        };
        AveragedMetrics {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        }
    };
    let macro_avg = average(&|_| 1.0);
    let weighted_avg = average(&|m| m.support as f64);
    let (cohen_kappa, kappa_degenerate) = kappa_of(cm);
    let (mcc, mcc_degenerate) = mcc_of(cm);
    Ok(MetricsReport {
        n_samples: total,
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
        macro_avg,
        weighted_avg,
        cohen_kappa,
        kappa_degenerate,
        mcc,
        mcc_degenerate,
    })
}

fn kappa_of(cm: &ConfusionMatrix) -> (f64, bool) {
    let total = cm.total() as f64;
    let p0 = cm.trace() as f64 / total;
    let pe = cm
        .row_sums()
        .iter()
        .zip(cm.col_sums())
        .map(|(&r, c)| r as f64 * c as f64)
        .sum::<f64>()
        / (total * total);
    if pe >= 1.0 {
        return (0.0, true);
    }
    (((p0 - pe) / (1.0 - pe)).clamp(-1.0, 1.0), false)
}

/// Cohen's kappa `(p0 - pe) / (1 - pe)`, returned with a flag set when
/// `pe = 1` forces the value to 0.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<(f64, bool)> {
    check_nonempty(cm)?;
    Ok(kappa_of(cm))
}

fn mcc_of(cm: &ConfusionMatrix) -> (f64, bool) {
    // Correlation form over the K x K table, in exact integers:
    // (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2)).
    // At K = 2 numerator and both factors are exactly twice their binary
    // counterparts, so the result equals the binary formula bit for bit.
    let s = cm.total() as i128;
    let c = cm.trace() as i128;
    let t: Vec<i128> = cm.row_sums().into_iter().map(i128::from).collect();
    let p: Vec<i128> = cm.col_sums().into_iter().map(i128::from).collect();
    let num = c * s - t.iter().zip(&p).map(|(a, b)| a * b).sum::<i128>();
    let fp = s * s - p.iter().map(|v| v * v).sum::<i128>();
    let ft = s * s - t.iter().map(|v| v * v).sum::<i128>();
    if fp == 0 || ft == 0 {
        return (0.0, true);
    }
    (
        (num as f64 / ((fp * ft) as f64).sqrt()).clamp(-1.0, 1.0),
        false,
    )
}

/// Matthews correlation coefficient with a zero-denominator flag.
pub fn mcc(cm: &ConfusionMatrix) -> Result<(f64, bool)> {
    check_nonempty(cm)?;
    Ok(mcc_of(cm))
}

/// The six reported metrics, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    #[default]
    F1,
    Kappa,
    Mcc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::Kappa,
        Metric::Mcc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::F1 => "F1",
            Metric::Kappa => "Kappa",
            Metric::Mcc => "MCC",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(Metric::Accuracy),
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "f1" => Ok(Metric::F1),
            "kappa" | "cohen_kappa" => Ok(Metric::Kappa),
            "mcc" => Ok(Metric::Mcc),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

/// Header of the one-row-per-model metrics table.
pub const METRICS_CSV_HEADER: [&str; 7] = [
    "Model",
    "Accuracy",
    "Precision",
    "Recall",
    "F1",
    "Kappa",
    "MCC",
];

pub fn metrics_csv_row(model: &str, report: &MetricsReport) -> [String; 7] {
    [
        model.to_string(),
        format!("{:.6}", report.accuracy),
        format!("{:.6}", report.precision()),
        format!("{:.6}", report.recall()),
        format!("{:.6}", report.f1()),
        format!("{:.6}", report.cohen_kappa),
        format!("{:.6}", report.mcc),
    ]
}

/// Per-class shuffled split with `round(count * test_fraction)` test rows per
/// class. Both index lists come back sorted.
pub fn stratified_split(
    y: &LabelVector,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); y.n_classes()];
    for (i, &l) in y.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some(c) = by_class.iter().position(|m| m.len() == 1) {
        return Err(Error::InvalidInput(format!(
            "class {c} has a single sample and cannot be stratified"
        )));
    }
    let mut train = Vec::with_capacity(y.len());
    let mut test = Vec::new();
    for (c, mut members) in by_class.into_iter().enumerate() {
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        members.shuffle(&mut seeded(derive_seed(seed, c as u64)));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
