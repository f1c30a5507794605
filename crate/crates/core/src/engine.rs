//! The repeated fusion game: one [`Engine::run_round`] per round, and
//! [`replay`] over a whole dataset with a train/eval split.
//!
//! A round (1) pools reliabilities and the prior from the labelled
//! neighbours of its context, (2) turns reports into guardrailed LLRs,
//! (3) aggregates to posteriors and thresholds them and, when the truth is
//! revealed, (4) computes Shapley credit, payoffs and the reputation step,
//! then banks the round and refreshes the error correlations. Unlabelled
//! rounds pay nothing and leave the state untouched. A round is banked only
//! after its own posterior is computed, so it never serves as its own
//! neighbour.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::config::{DecisionThreshold, GameConfig};
use crate::context_bank::{ContextBank, RoundRecord};
use crate::credit::{naive_credit, shapley, stage_payoff, CreditReport, ReputationVector};
use crate::error::{FusionError, Result};
use crate::fusion::{decide, tune_threshold, PosteriorVector, RoundSignals};
use crate::metrics::{summarize, MetricsSummary};
use crate::reliability::{pooled_table, prior_from_neighbors, GlobalCounts, ReliabilityTable};
use crate::signals::{llr, update_correlations, CorrelationMatrix, LabelledWindow};
use crate::simulator::majority_vote;

/// Threshold used before tuning has happened.
pub const PROVISIONAL_THRESHOLD: f64 = 0.5;

/// State carried from one round to the next.
#[derive(Debug, Clone)]
pub struct PublicState {
    /// Rounds processed so far.
    pub round_index: u64,
    pub reputation: ReputationVector,
    pub bank: ContextBank,
    pub window: LabelledWindow,
    pub correlations: CorrelationMatrix,
    pub global: GlobalCounts,
    /// Running `Σ δ^(t−1) u_t` per expert.
    pub utility: Vec<f64>,
    discount: f64,
    last_round_id: Option<u64>,
    dim: Option<usize>,
}

impl PublicState {
    pub fn new(config: &GameConfig) -> Self {
        let n = config.n_experts();
        let l = config.n_labels();
        PublicState {
            round_index: 0,
            reputation: ReputationVector::uniform(n),
            bank: ContextBank::new(config.kernel_exponent).with_max_len(config.bank_max),
            window: LabelledWindow::new(config.window),
            correlations: CorrelationMatrix::zeros(n, l),
            global: GlobalCounts::new(n, l),
            utility: vec![0.0; n],
            discount: 1.0,
            last_round_id: None,
            dim: None,
        }
    }
}

/// Intermediate quantities of one round, row-major `[expert * n_labels + label]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub theta_pos: Vec<f64>,
    pub theta_neg: Vec<f64>,
    pub priors: Vec<f64>,
    pub llr: Vec<f64>,
    /// Signals after the full-coalition guardrail.
    pub llr_guarded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round_id: u64,
    pub labelled: bool,
    pub posteriors: PosteriorVector,
    pub decisions: Vec<bool>,
    pub threshold: f64,
    pub credit: Option<CreditReport>,
    pub payoffs: Vec<f64>,
    pub reputation_before: ReputationVector,
    pub reputation_after: ReputationVector,
    pub diagnostics: RoundDiagnostics,
}

/// Runs the game for one configuration.
#[derive(Debug, Clone)]
pub struct Engine {
    config: GameConfig,
    threshold: f64,
    state: PublicState,
    no_correlation: CorrelationMatrix,
}

impl Engine {
    /// Builds an engine; the config must name its experts.
    pub fn new(config: GameConfig) -> Result<Self> {
        config.validate()?;
        if config.experts.is_empty() {
            return Err(FusionError::InvalidConfig("no experts configured".into()));
        }
        let threshold = match config.decision_threshold {
            DecisionThreshold::Fixed(t) => t,
            DecisionThreshold::Tune => PROVISIONAL_THRESHOLD,
        };
        Ok(Engine {
            state: PublicState::new(&config),
            no_correlation: CorrelationMatrix::zeros(config.n_experts(), config.n_labels()),
            threshold,
            config,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn state(&self) -> &PublicState {
        &self.state
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    pub fn run_round(&mut self, round: &RoundRecord) -> Result<RoundOutcome> {
        self.run_round_with(round, true)
    }

    /// Plays one round. With `update == false` a labelled round is scored
    /// and credited but leaves reputation, bank and window untouched.
    pub fn run_round_with(&mut self, round: &RoundRecord, update: bool) -> Result<RoundOutcome> {
        self.validate_round(round)?;
        let cfg = &self.config;
        let n = cfg.n_experts();
        let l = cfg.n_labels();
        let eps = cfg.epsilon;

        let (table, priors) = self.reliabilities(round)?;
        let mut llrs = Vec::with_capacity(n * l);
        for i in 0..n {
            for k in 0..l {
                llrs.push(llr(table.get(i, k), round.reports[i][k], eps));
            }
        }
        let rho = if cfg.no_guardrail {
            &self.no_correlation
        } else {
            &self.state.correlations
        };
        let reputation_before = self.state.reputation.clone();
        let signals = RoundSignals {
            priors: &priors,
            llr: &llrs,
            reports: &round.reports,
            rho,
            weights: reputation_before.as_slice(),
            epsilon: eps,
        };
        let posteriors = signals.full_posterior();
        let decisions = decide(posteriors.as_slice(), self.threshold);
        let everyone = Coalition::full(n);
        let llr_guarded = (0..n)
            .flat_map(|i| (0..l).map(move |k| (i, k)))
            .map(|(i, k)| signals.guarded(i, k, everyone))
            .collect();

        let credit = match &round.truth {
            Some(truth) => {
                let credit = if cfg.naive_credit {
                    naive_credit(&signals, Some(truth))
                } else {
                    shapley(&signals, Some(truth))
                };
                Some(credit.map_err(|e| match e {
                    FusionError::UnlabelledRound(_) => FusionError::UnlabelledRound(round.round_id),
                    other => other,
                })?)
            }
            None => None,
        };
        let w = reputation_before.as_slice();
        let w_sum: f64 = w.iter().sum();
        let payoffs: Vec<f64> = match &credit {
            Some(c) => c
                .phi
                .iter()
                .zip(w)
                .map(|(&phi, &wi)| stage_payoff(phi, wi, w_sum, cfg.prize, cfg.alpha))
                .collect(),
            None => vec![0.0; n],
        };

        let diagnostics = RoundDiagnostics {
            theta_pos: table.entries.iter().map(|e| e.theta_pos()).collect(),
            theta_neg: table.entries.iter().map(|e| e.theta_neg()).collect(),
            priors,
            llr: llrs,
            llr_guarded,
        };

        if let (Some(c), true) = (&credit, update) {
            if !cfg.freeze_reputation {
                self.state.reputation = reputation_before.update(&c.phi, cfg.eta, cfg.reputation_floor);
            }
            let shared = Arc::new(round.clone());
            self.state.bank.insert_shared(Arc::clone(&shared))?;
            self.state.global.observe(&shared)?;
            self.state.window.push(shared)?;
            if !cfg.no_guardrail {
                self.state.correlations = update_correlations(&self.state.window, n, l, cfg.rho_max);
            }
        }
        for (acc, u) in self.state.utility.iter_mut().zip(&payoffs) {
            *acc += self.state.discount * u;
        }
        self.state.discount *= self.config.delta;
        self.state.round_index += 1;
        self.state.last_round_id = Some(round.round_id);
        self.state.dim = Some(round.context.dim());

        Ok(RoundOutcome {
            round_id: round.round_id,
            labelled: round.is_labelled(),
            posteriors,
            decisions,
            threshold: self.threshold,
            credit,
            payoffs,
            reputation_before,
            reputation_after: self.state.reputation.clone(),
            diagnostics,
        })
    }

    fn validate_round(&self, round: &RoundRecord) -> Result<()> {
        let cfg = &self.config;
        if let Some(prev) = self.state.last_round_id {
            if round.round_id <= prev {
                return Err(FusionError::NonMonotoneRounds {
                    previous: prev,
                    next: round.round_id,
                });
            }
        }
        if let Some(expected) = self.state.dim.or(self.state.bank.dim()) {
            if round.context.dim() != expected {
                return Err(FusionError::DimensionMismatch {
                    expected,
                    found: round.context.dim(),
                });
            }
        }
        if round.reports.len() < cfg.n_experts() {
            return Err(FusionError::MissingExpertReport {
                round_id: round.round_id,
                expert: cfg.experts[round.reports.len()].clone(),
            });
        }
        if round.reports.len() > cfg.n_experts() {
            return Err(FusionError::LengthMismatch {
                left: round.reports.len(),
                right: cfg.n_experts(),
            });
        }
        for r in round.reports.iter().chain(round.truth.iter()) {
            if r.len() != cfg.n_labels() {
                return Err(FusionError::LengthMismatch {
                    left: r.len(),
                    right: cfg.n_labels(),
                });
            }
        }
        Ok(())
    }

    fn reliabilities(&self, round: &RoundRecord) -> Result<(ReliabilityTable, Vec<f64>)> {
        let cfg = &self.config;
        let (n, l, eps) = (cfg.n_experts(), cfg.n_labels(), cfg.epsilon);
        if cfg.context_agnostic {
            let g = &self.state.global;
            let priors = (0..l).map(|k| g.prior(k, eps)).collect();
            return Ok((g.table.clone(), priors));
        }
        let k = cfg.k_reliability.max(cfg.k_prior);
        let neighbors = self.state.bank.query_topk(&round.context, k)?;
        let table = pooled_table(neighbors.prefix(cfg.k_reliability), n, l)?;
        let prior_set = neighbors.prefix(cfg.k_prior);
        let priors = (0..l).map(|label| prior_from_neighbors(prior_set, label, eps)).collect();
        Ok((table, priors))
    }
}

/// Which rounds form the training split.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// The first `floor(frac · N)` rounds.
    Fraction(f64),
    /// Rounds with these ids, in stream order.
    TrainIds(HashSet<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

/// One row of the replay trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: u64,
    pub round_id: u64,
    pub phase: Phase,
    pub labelled: bool,
    /// Reputation used for this round's prediction.
    pub reputation: Vec<f64>,
    pub posteriors: Vec<f64>,
    pub phi: Vec<f64>,
    pub payoffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertMetrics {
    pub expert: String,
    pub metrics: MetricsSummary,
}

/// Result of replaying a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub threshold: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub n_eval_labelled: usize,
    pub metrics_unavailable: bool,
    pub fused: Option<MetricsSummary>,
    pub experts: Vec<ExpertMetrics>,
    pub majority_vote: Option<MetricsSummary>,
    pub final_reputation: Vec<f64>,
    pub discounted_utility: Vec<f64>,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryRow>,
}

impl ReplayReport {
    /// Pretty-printed JSON of everything except the trajectory.
    pub fn metrics_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Trajectory as CSV: `t, round_id, phase, labelled`, then `w_`, `q_`,
    /// `phi_` and `u_` columns per expert or label.
    pub fn trajectory_csv(&self, labels: &[String], experts: &[String]) -> String {
        let mut header = vec!["t".to_string(), "round_id".into(), "phase".into(), "labelled".into()];
        for (prefix, names) in [("w_", experts), ("q_", labels), ("phi_", experts), ("u_", experts)] {
            header.extend(names.iter().map(|n| format!("{prefix}{n}")));
        }
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(&header).expect("in-memory write");
        for row in &self.trajectory {
            let phase = match row.phase {
                Phase::Train => "train",
                Phase::Eval => "eval",
            };
            let mut cells = vec![row.t.to_string(), row.round_id.to_string(), phase.into(), row.labelled.to_string()];
            for values in [&row.reputation, &row.posteriors, &row.phi, &row.payoffs] {
                cells.extend(values.iter().map(|v| v.to_string()));
            }
            out.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Checks that ids strictly increase and the stream is non-empty.
pub fn check_stream(rounds: &[RoundRecord]) -> Result<()> {
    if rounds.is_empty() {
        return Err(FusionError::EmptyDataset);
    }
    for pair in rounds.windows(2) {
        if pair[1].round_id <= pair[0].round_id {
            return Err(FusionError::NonMonotoneRounds {
                previous: pair[0].round_id,
                next: pair[1].round_id,
            });
        }
    }
    Ok(())
}

/// Partitions stream indices into (train, eval), each in stream order.
pub fn split_indices(rounds: &[RoundRecord], split: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    match split {
        SplitSpec::Fraction(frac) => {
            if !(0.0..=1.0).contains(frac) {
                return Err(FusionError::InvalidConfig("train fraction must lie in [0, 1]".into()));
            }
            // tolerate representation error, e.g. 2/3 of 3000
            let cut = ((frac * rounds.len() as f64) + 1e-9).floor() as usize;
            let cut = cut.min(rounds.len());
            Ok(((0..cut).collect(), (cut..rounds.len()).collect()))
        }
        SplitSpec::TrainIds(ids) => Ok((0..rounds.len()).partition(|&i| ids.contains(&rounds[i].round_id))),
    }
}

/// Replays `rounds` from a uniform reputation, in stream order.
///
/// With a tuned threshold, training rounds are played first to fit it. When
/// the training split is a prefix of the stream this happens inline;
/// otherwise a separate pass over the training rounds fits the threshold
/// before the full stream is played. Labelled evaluation rounds are scored.
pub fn replay(rounds: &[RoundRecord], config: &GameConfig, split: &SplitSpec) -> Result<ReplayReport> {
    check_stream(rounds)?;
    let (train, eval) = split_indices(rounds, split)?;
    let is_prefix = train.iter().enumerate().all(|(j, &i)| i == j);
    let tune = config.decision_threshold == DecisionThreshold::Tune;
    let mut engine = Engine::new(config.clone())?;
    if tune && !is_prefix {
        let mut pre = Engine::new(config.clone())?;
        let (mut q, mut y) = (Vec::new(), Vec::new());
        for &idx in &train {
            let outcome = pre.run_round(&rounds[idx])?;
            if let Some(truth) = &rounds[idx].truth {
                q.push(outcome.posteriors.0);
                y.push(truth.clone());
            }
        }
        engine.set_threshold(tune_threshold(&q, &y)?);
    }
    let mut pending_tune = tune && is_prefix;
    let mut tune_q = Vec::new();
    let mut tune_y = Vec::new();
    let mut in_train = vec![false; rounds.len()];
    for &idx in &train {
        in_train[idx] = true;
    }

    let n = config.n_experts();
    let mut trajectory = Vec::with_capacity(rounds.len());
    let mut fused = Vec::new();
    let mut solo: Vec<Vec<(Vec<bool>, Vec<bool>)>> = vec![Vec::new(); n];
    let mut majority = Vec::new();
    for (idx, round) in rounds.iter().enumerate() {
        let phase = if in_train[idx] { Phase::Train } else { Phase::Eval };
        if phase == Phase::Eval && pending_tune {
            engine.set_threshold(tune_threshold(&tune_q, &tune_y)?);
            pending_tune = false;
        }
        let update = phase == Phase::Train || !config.no_update_eval;
        let outcome = engine.run_round_with(round, update)?;
        if let Some(y) = &round.truth {
            match phase {
                Phase::Train if pending_tune => {
                    tune_q.push(outcome.posteriors.0.clone());
                    tune_y.push(y.clone());
                }
                Phase::Train => {}
                Phase::Eval => {
                    fused.push((y.clone(), outcome.decisions.clone()));
                    for (i, s) in solo.iter_mut().enumerate() {
                        s.push((y.clone(), round.reports[i].clone()));
                    }
                    majority.push((y.clone(), majority_vote(&round.reports)));
                }
            }
        }
        trajectory.push(TrajectoryRow {
            t: trajectory.len() as u64 + 1,
            round_id: outcome.round_id,
            phase,
            labelled: outcome.labelled,
            reputation: outcome.reputation_before.as_slice().to_vec(),
            posteriors: outcome.posteriors.0,
            phi: outcome.credit.map_or_else(|| vec![0.0; n], |c| c.phi),
            payoffs: outcome.payoffs,
        });
    }
    if pending_tune {
        engine.set_threshold(tune_threshold(&tune_q, &tune_y)?);
    }

    let skip = config.macro_skip_empty;
    let unavailable = fused.is_empty();
    let summary = |rows: &[(Vec<bool>, Vec<bool>)]| -> Result<Option<MetricsSummary>> {
        if rows.is_empty() {
            Ok(None)
        } else {
            summarize(rows, skip).map(Some)
        }
    };
    let experts = if unavailable {
        Vec::new()
    } else {
        config
            .experts
            .iter()
            .zip(&solo)
            .map(|(id, rows)| {
                Ok(ExpertMetrics {
                    expert: id.clone(),
                    metrics: summarize(rows, skip)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ReplayReport {
        threshold: engine.threshold(),
        n_train: train.len(),
        n_eval: eval.len(),
        n_eval_labelled: fused.len(),
        metrics_unavailable: unavailable,
        fused: summary(&fused)?,
        experts,
        majority_vote: summary(&majority)?,
        final_reputation: engine.state().reputation.as_slice().to_vec(),
        discounted_utility: engine.state().utility.clone(),
        trajectory,
    })
}
