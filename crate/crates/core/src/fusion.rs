//! Aggregation of prior and guardrailed signals into per-label posteriors.

use crate::coalition::Coalition;
use crate::error::{FusionError, Result};
use crate::metrics::jaccard_indicator;
use crate::reliability::clip;
use crate::signals::{guardrail, CorrelationMatrix};

/// Logistic sigmoid, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of a probability already clipped away from 0 and 1.
pub fn logit(p: f64) -> f64 {
    p.ln() - (1.0 - p).ln()
}

/// Per-label posteriors `q[k]`, each clipped to `[ε, 1 − ε]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector(pub Vec<f64>);

impl PosteriorVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Everything the aggregator needs for one round.
///
/// `llr` is row-major `[expert * n_labels + label]` and holds the raw
/// (un-guardrailed) signals; the guardrail is applied per coalition.
#[derive(Debug, Clone, Copy)]
pub struct RoundSignals<'a> {
    pub priors: &'a [f64],
    pub llr: &'a [f64],
    pub reports: &'a [Vec<bool>],
    pub rho: &'a CorrelationMatrix,
    pub weights: &'a [f64],
    pub epsilon: f64,
}

impl<'a> RoundSignals<'a> {
    pub fn n_labels(&self) -> usize {
        self.priors.len()
    }

    pub fn n_experts(&self) -> usize {
        self.weights.len()
    }

    pub fn llr_at(&self, expert: usize, label: usize) -> f64 {
        self.llr[expert * self.n_labels() + label]
    }

    /// Guardrailed signal of `expert` on `label` within `coalition`.
    pub fn guarded(&self, expert: usize, label: usize, coalition: Coalition) -> f64 {
        guardrail(self.llr_at(expert, label), expert, label, self.reports, self.rho, coalition)
    }

    /// Reputation-weighted sum of guardrailed signals, in member order.
    pub fn evidence(&self, label: usize, coalition: Coalition) -> f64 {
        coalition
            .members()
            .fold(0.0, |acc, i| acc + self.weights[i] * self.guarded(i, label, coalition))
    }

    /// Posterior of `coalition`: `σ(logit π + Σ w λ̃)`.
    ///
    /// Zero total evidence returns the prior unchanged (`σ(logit π) = π`), so
    /// the empty coalition and signal-free coalitions reproduce `π` bit for bit.
    pub fn coalition_posterior(&self, coalition: Coalition) -> PosteriorVector {
        PosteriorVector(
            (0..self.n_labels())
                .map(|k| {
                    let prior = self.priors[k];
                    let evidence = self.evidence(k, coalition);
                    if evidence == 0.0 {
                        prior
                    } else {
                        clip(sigmoid(logit(prior) + evidence), self.epsilon)
                    }
                })
                .collect(),
        )
    }

    /// Posterior of the full expert set in odds form,
    /// `π e^S / ((1 − π) + π e^S)`.
    pub fn full_posterior(&self) -> PosteriorVector {
        let everyone = Coalition::full(self.n_experts());
        PosteriorVector(
            (0..self.n_labels())
                .map(|k| {
                    let prior = self.priors[k];
                    let s = self.evidence(k, everyone);
                    if s == 0.0 {
                        return prior;
                    }
                    let q = if s > 0.0 {
                        prior / ((1.0 - prior) * (-s).exp() + prior)
                    } else {
                        let e = s.exp();
                        prior * e / ((1.0 - prior) + prior * e)
                    };
                    clip(q, self.epsilon)
                })
                .collect(),
        )
    }
}

/// Includes label `k` iff `q[k] >= threshold`.
pub fn decide(q: &[f64], threshold: f64) -> Vec<bool> {
    q.iter().map(|&p| p >= threshold).collect()
}

/// The candidate thresholds `0.01, 0.02, …, 0.99`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|i| i as f64 / 100.0)
}

/// Grid-searches the global threshold maximising mean per-round Jaccard.
/// Ties go to the smallest threshold.
pub fn tune_threshold(posteriors: &[Vec<f64>], truths: &[Vec<bool>]) -> Result<f64> {
    if posteriors.is_empty() {
        return Err(FusionError::EmptySplit);
    }
    if posteriors.len() != truths.len() {
        return Err(FusionError::LengthMismatch {
            left: posteriors.len(),
            right: truths.len(),
        });
    }
    let mut best = (f64::NEG_INFINITY, 0.5);
    for tau in threshold_grid() {
        let total: f64 = posteriors
            .iter()
            .zip(truths)
            .map(|(q, y)| jaccard_indicator(y, &decide(q, tau)))
            .sum();
        let mean = total / posteriors.len() as f64;
        if mean > best.0 {
            best = (mean, tau);
        }
    }
    Ok(best.1)
}
