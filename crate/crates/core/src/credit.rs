//! Log-score coalition values, exact Shapley credit, stage payoffs and the
//! multiplicative reputation update.

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{FusionError, Result};
use crate::fusion::RoundSignals;
use crate::par;

/// Largest expert count accepted by exact enumeration.
pub const MAX_SHAPLEY_EXPERTS: usize = 20;

/// Logarithmic score of forecast `q` (already clipped) for outcome `y`.
pub fn log_score(q: f64, y: bool) -> f64 {
    if y {
        q.ln()
    } else {
        (1.0 - q).ln()
    }
}

/// Log-score gain of `coalition`'s posterior over the prior, summed over labels.
pub fn team_value(signals: &RoundSignals<'_>, coalition: Coalition, truth: &[bool]) -> f64 {
    if coalition.is_empty() {
        return 0.0;
    }
    let q = signals.coalition_posterior(coalition);
    q.as_slice()
        .iter()
        .zip(signals.priors)
        .zip(truth)
        .map(|((&qk, &pk), &y)| log_score(qk, y) - log_score(pk, y))
        .sum()
}

/// Shapley credit for one labelled round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditReport {
    pub phi: Vec<f64>,
    /// Value of the full coalition.
    pub v_full: f64,
    /// `coalition_values[mask]` for every coalition bitmask.
    pub coalition_values: Vec<f64>,
}

impl CreditReport {
    /// `Σ φ − v(N)`; zero up to rounding for Shapley credit.
    pub fn efficiency_gap(&self) -> f64 {
        self.phi.iter().sum::<f64>() - self.v_full
    }
}

fn require_truth(truth: Option<&[bool]>) -> Result<&[bool]> {
    truth.ok_or(FusionError::UnlabelledRound(0))
}

/// Weight `|C|! (n − |C| − 1)! / n!` written as `1 / (n · C(n − 1, |C|))`.
pub fn shapley_weight(n: usize, size: usize) -> f64 {
    let mut binom = 1.0;
    for j in 0..size {
        binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
    }
    1.0 / (n as f64 * binom)
}

/// Values of every coalition, indexed by bitmask.
pub fn coalition_values(signals: &RoundSignals<'_>, truth: &[bool]) -> Result<Vec<f64>> {
    let n = signals.n_experts();
    if n > MAX_SHAPLEY_EXPERTS {
        return Err(FusionError::TooManyExperts {
            max: MAX_SHAPLEY_EXPERTS,
            found: n,
        });
    }
    Ok(par::map_range(1 << n, |mask| {
        team_value(signals, Coalition(mask as u32), truth)
    }))
}

/// Exact Shapley values by enumeration over all `2^n` coalitions.
pub fn shapley(signals: &RoundSignals<'_>, truth: Option<&[bool]>) -> Result<CreditReport> {
    let truth = require_truth(truth)?;
    let n = signals.n_experts();
    let values = coalition_values(signals, truth)?;
    let weights: Vec<f64> = (0..n).map(|s| shapley_weight(n, s)).collect();
    let phi: Vec<f64> = (0..n)
        .map(|i| {
            (0..values.len())
                .map(|mask| Coalition(mask as u32))
                .filter(|c| !c.contains(i))
                .map(|c| weights[c.len()] * (values[c.with(i).0 as usize] - values[c.0 as usize]))
                .sum()
        })
        .collect();
    let report = CreditReport {
        v_full: values[Coalition::full(n).0 as usize],
        phi,
        coalition_values: values,
    };
    debug_assert!(report.efficiency_gap().abs() <= 1e-9 * (1.0 + report.v_full.abs()));
    Ok(report)
}

/// Solo credit: each expert scored alone against the prior, no coalitions.
pub fn naive_credit(signals: &RoundSignals<'_>, truth: Option<&[bool]>) -> Result<CreditReport> {
    let truth = require_truth(truth)?;
    let n = signals.n_experts();
    let phi: Vec<f64> = (0..n)
        .map(|i| team_value(signals, Coalition::singleton(i), truth))
        .collect();
    let mut coalition_values = vec![f64::NAN; 1 << n.min(MAX_SHAPLEY_EXPERTS)];
    coalition_values[0] = 0.0;
    for (i, &v) in phi.iter().enumerate() {
        if i < MAX_SHAPLEY_EXPERTS {
            coalition_values[1 << i] = v;
        }
    }
    Ok(CreditReport {
        v_full: team_value(signals, Coalition::full(n), truth),
        phi,
        coalition_values,
    })
}

/// `u_i = φ_i + α · P · w_i / Σ w`.
pub fn stage_payoff(phi: f64, w_i: f64, w_sum: f64, prize: f64, alpha: f64) -> f64 {
    phi + alpha * prize * w_i / w_sum
}

/// `Σ_t δ^(t−1) u_t`.
pub fn discounted_utility(u: &[f64], delta: f64) -> f64 {
    let mut factor = 1.0;
    let mut total = 0.0;
    for &x in u {
        total += factor * x;
        factor *= delta;
    }
    total
}

/// Public reputation on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationVector(Vec<f64>);

impl ReputationVector {
    pub fn uniform(n: usize) -> Self {
        ReputationVector(vec![1.0 / n as f64; n])
    }

    /// Normalises `weights`, which must be non-negative with a positive sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(FusionError::InvalidConfig("reputation weights must be non-negative".into()));
        }
        Ok(ReputationVector(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplicative-weights step `w_i e^{η φ_i} / Σ_j w_j e^{η φ_j}`.
    ///
    /// The exponent is shifted by its maximum before `exp`. With `floor > 0`,
    /// entries are then raised to at least `floor` and renormalised.
    pub fn update(&self, phi: &[f64], eta: f64, floor: f64) -> ReputationVector {
        let exps: Vec<f64> = phi.iter().map(|p| eta * p).collect();
        let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self
            .0
            .iter()
            .zip(&exps)
            .map(|(w, e)| w * (e - top).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        let mut next: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        if floor > 0.0 && next.iter().any(|&w| w < floor) {
            for w in next.iter_mut() {
                *w = w.max(floor);
            }
            let sum: f64 = next.iter().sum();
            for w in next.iter_mut() {
                *w /= sum;
            }
        }
        ReputationVector(next)
    }
}
