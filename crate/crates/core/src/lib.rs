//! Context-aware Dawid-Skene fusion of multi-label expert reports.
//!
//! Each expert's report is turned into a log-likelihood ratio using
//! reliabilities pooled from the labelled rounds nearest to the current
//! context, shrunk where correlated experts agree, weighted by a public
//! reputation and combined with a contextual prior. Reputations move by
//! multiplicative weights on exact Shapley credit for the log-score gain of
//! the team forecast.
//!
//! The `parallel` feature (on by default) runs bank scans, coalition
//! enumeration, simulation and ablation sweeps on rayon; without it the same
//! code runs sequentially with identical results.

pub mod ablation;
pub mod coalition;
pub mod config;
pub mod context_bank;
pub mod credit;
pub mod engine;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod par;
pub mod reliability;
pub mod signals;
pub mod simulator;
pub mod wire;

pub use coalition::Coalition;
pub use config::{DecisionThreshold, GameConfig, LABEL_ONTOLOGY};
pub use context_bank::{ContextBank, ContextVector, NeighborSet, RoundRecord};
pub use credit::{CreditReport, ReputationVector};
pub use engine::{replay, Engine, PublicState, ReplayReport, RoundOutcome, SplitSpec};
pub use error::{FusionError, Result};
pub use fusion::{PosteriorVector, RoundSignals};
pub use metrics::MetricsSummary;
pub use reliability::ReliabilityEstimate;
pub use signals::CorrelationMatrix;
pub use simulator::{SimConfig, SyntheticDataset, SyntheticExpertProfile};
