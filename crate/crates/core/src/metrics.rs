//! Imbalance-aware evaluation metrics. The positive (minority) class is the
//! class of interest throughout.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn scaled(&self, factor: usize) -> Self {
        ConfusionMatrix {
            tp: self.tp * factor,
            fp: self.fp * factor,
            tn: self.tn * factor,
            fn_: self.fn_ * factor,
        }
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!("{} predictions", y_true.len()), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::Metric("no instances to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_positive(), p.is_positive()) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// `sqrt(TPR · TNR)`.
pub fn g_mean(cm: &ConfusionMatrix) -> Result<f64> {
    let pos = cm.tp + cm.fn_;
    let neg = cm.tn + cm.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("G-mean needs both classes in the ground truth".into()));
    }
    let tpr = cm.tp as f64 / pos as f64;
    let tnr = cm.tn as f64 / neg as f64;
    Ok((tpr * tnr).sqrt())
}

/// F1 score. `degenerate` is set when there are no true positives, in which
/// case precision or recall is undefined or zero and `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub value: f64,
    pub degenerate: bool,
}

pub fn f1(cm: &ConfusionMatrix) -> F1Score {
    if cm.tp == 0 {
        return F1Score {
            value: 0.0,
            degenerate: true,
        };
    }
    let precision = cm.tp as f64 / (cm.tp + cm.fp) as f64;
    let recall = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
    F1Score {
        value: 2.0 * precision * recall / (precision + recall),
        degenerate: false,
    }
}

fn check_scores(y_true: &[Label], scores: &[f64]) -> Result<(usize, usize)> {
    if y_true.len() != scores.len() {
        return Err(Error::shape(format!("{} scores", y_true.len()), scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("scores must be finite".into()));
    }
    let pos = y_true.iter().filter(|l| l.is_positive()).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("AUC needs both classes in the ground truth".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the Mann–Whitney rank statistic with
/// midranks, so tied scores count one half.
pub fn auc(y_true: &[Label], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_scores(y_true, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (doubled) midranks of the positives keeps everything integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share the midrank (i+j+2)/2
        let twice_mid = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| y_true[k].is_positive()).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - (pos as u128) * (pos as u128 + 1);
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Empirical ROC curve as `(fpr, tpr)` points from `(0, 0)` to `(1, 1)`, one
/// point per distinct score threshold.
pub fn roc_curve(y_true: &[Label], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_scores(y_true, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (idx, &k) in order.iter().enumerate() {
        if y_true[k].is_positive() {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_threshold = order.get(idx + 1).is_none_or(|&next| scores[next] != scores[k]);
        if last_of_threshold {
            curve.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(curve)
}

/// Trapezoidal area under [`roc_curve`].
pub fn auc_trapezoid(y_true: &[Label], scores: &[f64]) -> Result<f64> {
    let curve = roc_curve(y_true, scores)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum())
}
