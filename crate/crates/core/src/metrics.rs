//! Multi-label evaluation: Hamming distance, micro/macro F1 and Jaccard.
//!
//! Zero-division convention: a precision, recall or F1 whose denominator is
//! zero is 0. Macro-F1 averages over every label unless `skip_empty` is set.

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

/// Per-sample Hamming distance: fraction of labels that disagree.
pub fn hamming(y: &[bool], yhat: &[bool]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(FusionError::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let wrong = y.iter().zip(yhat).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / y.len() as f64)
}

/// `|y ∩ ŷ| / |y ∪ ŷ|` over label indicators; 1 when both are empty.
pub fn jaccard_indicator(y: &[bool], yhat: &[bool]) -> f64 {
    let (inter, union) = y.iter().zip(yhat).fold((0usize, 0usize), |(i, u), (&a, &b)| {
        (i + (a && b) as usize, u + (a || b) as usize)
    });
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard index of two label-index sets.
pub fn jaccard<T: Ord>(y: &[T], yhat: &[T]) -> f64 {
    use std::collections::BTreeSet;
    let a: BTreeSet<&T> = y.iter().collect();
    let b: BTreeSet<&T> = yhat.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// Confusion counts for one label (or pooled over labels).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl LabelCounts {
    pub fn add(&mut self, y: bool, yhat: bool) {
        match (y, yhat) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    pub fn merge(self, other: LabelCounts) -> LabelCounts {
        LabelCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; `(f1, degenerate)` where
    /// `degenerate` marks a zero `P + R`.
    pub fn f1(&self) -> (f64, bool) {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            (0.0, true)
        } else {
            (2.0 * p * r / (p + r), false)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label counts over a set of (truth, prediction) rounds.
pub fn label_counts(rounds: &[(Vec<bool>, Vec<bool>)]) -> Result<Vec<LabelCounts>> {
    let n_labels = rounds.first().map_or(0, |r| r.0.len());
    let mut counts = vec![LabelCounts::default(); n_labels];
    for (y, yhat) in rounds {
        for len in [y.len(), yhat.len()] {
            if len != n_labels {
                return Err(FusionError::LengthMismatch {
                    left: len,
                    right: n_labels,
                });
            }
        }
        for (c, (&a, &b)) in counts.iter_mut().zip(y.iter().zip(yhat)) {
            c.add(a, b);
        }
    }
    Ok(counts)
}

/// Micro-F1 from counts pooled over all rounds and labels.
pub fn micro_f1(rounds: &[(Vec<bool>, Vec<bool>)]) -> Result<(f64, bool)> {
    let pooled = label_counts(rounds)?
        .into_iter()
        .fold(LabelCounts::default(), LabelCounts::merge);
    Ok(pooled.f1())
}

/// Macro-F1: unweighted mean of per-label F1.
pub fn macro_f1(rounds: &[(Vec<bool>, Vec<bool>)], skip_empty: bool) -> Result<f64> {
    Ok(macro_from_counts(&label_counts(rounds)?, skip_empty))
}

fn macro_from_counts(counts: &[LabelCounts], skip_empty: bool) -> f64 {
    let scores: Vec<f64> = counts
        .iter()
        .filter(|c| !(skip_empty && c.is_empty()))
        .map(|c| c.f1().0)
        .collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Summary of one evaluated prediction stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_rounds: usize,
    pub mean_hamming: f64,
    pub micro_f1: f64,
    pub micro_degenerate: bool,
    pub macro_f1: f64,
    pub mean_jaccard: f64,
    pub per_label: Vec<LabelCounts>,
}

/// Evaluates a non-empty set of rounds.
pub fn summarize(rounds: &[(Vec<bool>, Vec<bool>)], skip_empty: bool) -> Result<MetricsSummary> {
    if rounds.is_empty() {
        return Err(FusionError::EmptyDataset);
    }
    let per_label = label_counts(rounds)?;
    let pooled = per_label
        .iter()
        .copied()
        .fold(LabelCounts::default(), LabelCounts::merge);
    let (micro, degenerate) = pooled.f1();
    let n = rounds.len() as f64;
    let mut ham = 0.0;
    let mut jac = 0.0;
    for (y, yhat) in rounds {
        ham += hamming(y, yhat)?;
        jac += jaccard_indicator(y, yhat);
    }
    Ok(MetricsSummary {
        n_rounds: rounds.len(),
        mean_hamming: ham / n,
        micro_f1: micro,
        micro_degenerate: degenerate,
        macro_f1: macro_from_counts(&per_label, skip_empty),
        mean_jaccard: jac / n,
        per_label,
    })
}
