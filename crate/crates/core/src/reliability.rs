//! Context-conditioned reliability via kernel-weighted Beta-Bernoulli pooling.
//!
//! For expert `i` and label `k`, neighbours `s` with kernel weight `κ_s`
//! contribute to four pseudo-counts on top of a Beta(1, 1) prior:
//!
//! ```text
//! alpha_pos += κ_s · r · y        beta_pos += κ_s · (1 − r) · y
//! alpha_neg += κ_s · r · (1 − y)  beta_neg += κ_s · (1 − r) · (1 − y)
//! ```
//!
//! and the true/false-positive rates are the posterior means.

use crate::context_bank::{ContextBank, ContextVector, Neighbor, RoundRecord};
use crate::error::{FusionError, Result};

pub const PRIOR_ALPHA: f64 = 1.0;
pub const PRIOR_BETA: f64 = 1.0;

/// Beta sufficient statistics and posterior-mean rates for one (expert, label).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityEstimate {
    pub alpha_pos: f64,
    pub beta_pos: f64,
    pub alpha_neg: f64,
    pub beta_neg: f64,
}

impl Default for ReliabilityEstimate {
    fn default() -> Self {
        ReliabilityEstimate {
            alpha_pos: PRIOR_ALPHA,
            beta_pos: PRIOR_BETA,
            alpha_neg: PRIOR_ALPHA,
            beta_neg: PRIOR_BETA,
        }
    }
}

impl ReliabilityEstimate {
    /// Adds one weighted observation of (report, truth).
    pub fn observe(&mut self, weight: f64, report: bool, truth: bool) {
        match (report, truth) {
            (true, true) => self.alpha_pos += weight,
            (false, true) => self.beta_pos += weight,
            (true, false) => self.alpha_neg += weight,
            (false, false) => self.beta_neg += weight,
        }
    }

    /// Estimated P(report = 1 | y = 1).
    pub fn theta_pos(&self) -> f64 {
        self.alpha_pos / (self.alpha_pos + self.beta_pos)
    }

    /// Estimated P(report = 1 | y = 0).
    pub fn theta_neg(&self) -> f64 {
        self.alpha_neg / (self.alpha_neg + self.beta_neg)
    }
}

fn report_of(record: &RoundRecord, expert: usize) -> Result<&[bool]> {
    record
        .reports
        .get(expert)
        .map(Vec::as_slice)
        .ok_or_else(|| FusionError::MissingExpertReport {
            round_id: record.round_id,
            expert: expert.to_string(),
        })
}

/// Pooled statistics for a single (expert, label) pair.
pub fn pooled_stats(neighbors: &[Neighbor], expert: usize, label: usize) -> Result<ReliabilityEstimate> {
    let mut est = ReliabilityEstimate::default();
    for n in neighbors {
        let truth = n
            .record
            .truth
            .as_ref()
            .ok_or(FusionError::UnlabelledRound(n.record.round_id))?;
        let report = report_of(&n.record, expert)?;
        est.observe(n.weight, report[label], truth[label]);
    }
    Ok(est)
}

/// Row-major table of estimates indexed `[expert * n_labels + label]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTable {
    pub n_experts: usize,
    pub n_labels: usize,
    pub entries: Vec<ReliabilityEstimate>,
}

impl ReliabilityTable {
    pub fn uniform(n_experts: usize, n_labels: usize) -> Self {
        ReliabilityTable {
            n_experts,
            n_labels,
            entries: vec![ReliabilityEstimate::default(); n_experts * n_labels],
        }
    }

    pub fn get(&self, expert: usize, label: usize) -> &ReliabilityEstimate {
        &self.entries[expert * self.n_labels + label]
    }

    fn get_mut(&mut self, expert: usize, label: usize) -> &mut ReliabilityEstimate {
        &mut self.entries[expert * self.n_labels + label]
    }

    /// Folds one weighted labelled round into every (expert, label) cell.
    pub fn observe(&mut self, weight: f64, record: &RoundRecord) -> Result<()> {
        let truth = record
            .truth
            .as_ref()
            .ok_or(FusionError::UnlabelledRound(record.round_id))?;
        for expert in 0..self.n_experts {
            let report = report_of(record, expert)?;
            for (label, &y) in truth.iter().enumerate().take(self.n_labels) {
                self.get_mut(expert, label).observe(weight, report[label], y);
            }
        }
        Ok(())
    }
}

/// All (expert, label) estimates from one neighbour pass.
pub fn pooled_table(neighbors: &[Neighbor], n_experts: usize, n_labels: usize) -> Result<ReliabilityTable> {
    let mut table = ReliabilityTable::uniform(n_experts, n_labels);
    for n in neighbors {
        table.observe(n.weight, &n.record)?;
    }
    Ok(table)
}

/// Kernel-weighted smoothed base rate `(1 + Σ κ y) / (2 + Σ κ)`, clipped.
pub fn prior_from_neighbors(neighbors: &[Neighbor], label: usize, epsilon: f64) -> f64 {
    let (hits, mass) = neighbors.iter().fold((0.0, 0.0), |(h, m), n| {
        let y = n.record.truth.as_ref().is_some_and(|t| t[label]);
        (h + if y { n.weight } else { 0.0 }, m + n.weight)
    });
    clip((1.0 + hits) / (2.0 + mass), epsilon)
}

/// Contextual label prior from the `k_prior` nearest labelled contexts.
pub fn contextual_prior(
    bank: &ContextBank,
    x: &ContextVector,
    label: usize,
    k_prior: usize,
    epsilon: f64,
) -> Result<f64> {
    let neighbors = bank.query_topk(x, k_prior)?;
    Ok(prior_from_neighbors(&neighbors.entries, label, epsilon))
}

pub fn clip(p: f64, epsilon: f64) -> f64 {
    p.clamp(epsilon, 1.0 - epsilon)
}

/// Unit-weight counts over the whole labelled history, used when context
/// conditioning is switched off.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalCounts {
    pub table: ReliabilityTable,
    pub positives: Vec<f64>,
    pub rounds: f64,
}

impl GlobalCounts {
    pub fn new(n_experts: usize, n_labels: usize) -> Self {
        GlobalCounts {
            table: ReliabilityTable::uniform(n_experts, n_labels),
            positives: vec![0.0; n_labels],
            rounds: 0.0,
        }
    }

    pub fn observe(&mut self, record: &RoundRecord) -> Result<()> {
        self.table.observe(1.0, record)?;
        if let Some(truth) = &record.truth {
            for (p, &y) in self.positives.iter_mut().zip(truth) {
                if y {
                    *p += 1.0;
                }
            }
        }
        self.rounds += 1.0;
        Ok(())
    }

    /// Smoothed global base rate of `label`, clipped.
    pub fn prior(&self, label: usize, epsilon: f64) -> f64 {
        clip((1.0 + self.positives[label]) / (2.0 + self.rounds), epsilon)
    }
}
