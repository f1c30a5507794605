//! Per-report log-likelihood ratios, pairwise error correlation tracking and
//! the agreement guardrail.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::coalition::Coalition;
use crate::context_bank::RoundRecord;
use crate::error::{FusionError, Result};
use crate::par;
use crate::reliability::{clip, ReliabilityEstimate};

/// Log-likelihood ratio one report contributes towards the label being true.
pub fn llr(estimate: &ReliabilityEstimate, report: bool, epsilon: f64) -> f64 {
    let tp = clip(estimate.theta_pos(), epsilon);
    let fp = clip(estimate.theta_neg(), epsilon);
    if report {
        (tp / fp).ln()
    } else {
        ((1.0 - tp) / (1.0 - fp)).ln()
    }
}

/// Pairwise error correlations per label, symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n_experts: usize,
    n_labels: usize,
    rho: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn zeros(n_experts: usize, n_labels: usize) -> Self {
        CorrelationMatrix {
            n_experts,
            n_labels,
            rho: vec![0.0; n_experts * n_experts * n_labels],
        }
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    fn idx(&self, i: usize, j: usize, label: usize) -> usize {
        (label * self.n_experts + i) * self.n_experts + j
    }

    pub fn get(&self, i: usize, j: usize, label: usize) -> f64 {
        self.rho[self.idx(i, j, label)]
    }

    /// Sets both `(i, j)` and `(j, i)`; the diagonal is left at zero.
    pub fn set(&mut self, i: usize, j: usize, label: usize, value: f64) {
        if i == j {
            return;
        }
        let a = self.idx(i, j, label);
        let b = self.idx(j, i, label);
        self.rho[a] = value;
        self.rho[b] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }
}

/// Ring buffer of the most recent labelled rounds.
#[derive(Debug, Clone)]
pub struct LabelledWindow {
    capacity: usize,
    rounds: VecDeque<Arc<RoundRecord>>,
}

impl LabelledWindow {
    pub fn new(capacity: usize) -> Self {
        LabelledWindow {
            capacity: capacity.max(1),
            rounds: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn push(&mut self, record: Arc<RoundRecord>) -> Result<()> {
        if !record.is_labelled() {
            return Err(FusionError::UnlabelledRecord(record.round_id));
        }
        if let Some(last) = self.rounds.back() {
            if record.round_id <= last.round_id {
                return Err(FusionError::NonMonotoneRounds {
                    previous: last.round_id,
                    next: record.round_id,
                });
            }
        }
        if self.rounds.len() == self.capacity {
            self.rounds.pop_front();
        }
        self.rounds.push_back(record);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<RoundRecord>> {
        self.rounds.iter()
    }
}

/// Laplace-smoothed phi coefficient of two binary sequences.
///
/// Every cell of the 2x2 table starts at one, so all marginals are at least
/// two and the coefficient is always defined.
pub fn smoothed_phi(pairs: impl IntoIterator<Item = (bool, bool)>) -> f64 {
    let mut n = [[1.0f64; 2]; 2];
    for (a, b) in pairs {
        n[a as usize][b as usize] += 1.0;
    }
    let (n11, n10, n01, n00) = (n[1][1], n[1][0], n[0][1], n[0][0]);
    let den = ((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)).sqrt();
    (n11 * n00 - n10 * n01) / den
}

/// Recomputes every `rho[i][j][k]` from the window, clipped to `[0, rho_max]`.
pub fn update_correlations(
    window: &LabelledWindow,
    n_experts: usize,
    n_labels: usize,
    rho_max: f64,
) -> CorrelationMatrix {
    let rounds: Vec<&RoundRecord> = window.iter().map(|r| r.as_ref()).collect();
    let per_label: Vec<Vec<f64>> = par::map_range(n_labels, |label| {
        let errors: Vec<Vec<bool>> = (0..n_experts)
            .map(|i| {
                rounds
                    .iter()
                    .map(|r| {
                        let truth = r.truth.as_ref().expect("window holds labelled rounds");
                        r.reports[i][label] != truth[label]
                    })
                    .collect()
            })
            .collect();
        let mut pairs = Vec::with_capacity(n_experts * n_experts);
        for i in 0..n_experts {
            for j in (i + 1)..n_experts {
                let phi = smoothed_phi(errors[i].iter().copied().zip(errors[j].iter().copied()));
                pairs.push(phi.clamp(0.0, rho_max));
            }
        }
        pairs
    });
    let mut rho = CorrelationMatrix::zeros(n_experts, n_labels);
    for (label, values) in per_label.into_iter().enumerate() {
        let mut it = values.into_iter();
        for i in 0..n_experts {
            for j in (i + 1)..n_experts {
                rho.set(i, j, label, it.next().unwrap_or(0.0));
            }
        }
    }
    rho
}

/// Shrinks expert `i`'s signal by the correlations of coalition members that
/// agree with it on `label`.
pub fn guardrail(
    lambda: f64,
    expert: usize,
    label: usize,
    reports: &[Vec<bool>],
    rho: &CorrelationMatrix,
    coalition: Coalition,
) -> f64 {
    let mine = reports[expert][label];
    let mut denom = 1.0;
    for j in coalition.members() {
        if j != expert && reports[j][label] == mine {
            denom += rho.get(expert, j, label);
        }
    }
    lambda / denom
}
