//! ROC AUC (Mann-Whitney, midranks), macro F1, accuracy and mean ± std.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::autodiff::softmax;
use crate::error::{MilError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPrediction {
    pub bag_id: String,
    pub label: usize,
    /// Class probabilities.
    pub scores: Vec<f64>,
}

impl ScoredPrediction {
    pub fn from_logits(bag_id: impl Into<String>, label: usize, logits: &[f64]) -> Self {
        ScoredPrediction {
            bag_id: bag_id.into(),
            label,
            scores: softmax(logits),
        }
    }

    /// Argmax class, lowest index on ties.
    pub fn predicted(&self) -> usize {
        let mut best = 0;
        for (c, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = c;
            }
        }
        best
    }
}

/// Area under the ROC curve of `scores` for the `positive` flags, ties at ½.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MilError::UndefinedMetric(format!(
            "AUC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Binary AUC on the class-1 score, or macro one-vs-rest for more classes.
pub fn roc_auc(predictions: &[ScoredPrediction]) -> Result<f64> {
    let classes = class_count(predictions);
    if classes <= 2 {
        let scores: Vec<f64> = predictions.iter().map(|p| p.scores.get(1).copied().unwrap_or(0.0)).collect();
        let positive: Vec<bool> = predictions.iter().map(|p| p.label == 1).collect();
        return binary_auc(&scores, &positive);
    }
    let mut total = 0.0;
    let mut used = 0;
    for c in 0..classes {
        let positive: Vec<bool> = predictions.iter().map(|p| p.label == c).collect();
        if !positive.iter().any(|&p| p) || positive.iter().all(|&p| p) {
            continue;
        }
        let scores: Vec<f64> = predictions.iter().map(|p| p.scores[c]).collect();
        total += binary_auc(&scores, &positive)?;
        used += 1;
    }
    if used == 0 {
        return Err(MilError::UndefinedMetric("AUC needs at least two classes present".into()));
    }
    Ok(total / used as f64)
}

fn class_count(predictions: &[ScoredPrediction]) -> usize {
    predictions
        .iter()
        .map(|p| p.scores.len().max(p.label + 1))
        .max()
        .unwrap_or(0)
}

/// Per-class F1 from argmax predictions; 0 when precision + recall is 0.
fn class_f1(predictions: &[ScoredPrediction], class: usize) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for p in predictions {
        let predicted = p.predicted() == class;
        let actual = p.label == class;
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Macro-averaged F1 over all classes.
pub fn f1(predictions: &[ScoredPrediction]) -> f64 {
    let classes = class_count(predictions);
    if classes == 0 {
        return 0.0;
    }
    (0..classes).map(|c| class_f1(predictions, c)).sum::<f64>() / classes as f64
}

/// F1 of a single class (e.g. the positive class of a binary task).
pub fn class_f1_score(predictions: &[ScoredPrediction], class: usize) -> f64 {
    class_f1(predictions, class)
}

pub fn accuracy(predictions: &[ScoredPrediction]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let correct = predictions.iter().filter(|p| p.predicted() == p.label).count();
    correct as f64 / predictions.len() as f64
}

/// Mean and sample standard deviation (`n - 1` denominator).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

pub fn aggregate(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(MilError::EmptyInput("aggregate needs at least one value"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(MeanStd { mean, std, n })
}

/// Test-set scores of one trained model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub auc: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub loss: f64,
}
