//! Game hyperparameters and their flat key-value file format.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::credit::MAX_SHAPLEY_EXPERTS;
use crate::error::{FusionError, Result};

/// The fourteen-label driving manoeuvre ontology.
pub const LABEL_ONTOLOGY: [&str; 14] = [
    "turn left",
    "turn right",
    "brake",
    "accelerate",
    "stop",
    "traffic light ahead",
    "junction ahead",
    "pedestrian crossing ahead",
    "merge",
    "maintain safe distance",
    "check blind spot",
    "adjust speed due to weather",
    "yield to traffic",
    "drive as normal",
];

pub fn default_labels() -> Vec<String> {
    LABEL_ONTOLOGY.iter().map(|s| s.to_string()).collect()
}

/// Either a fixed decision threshold or `"tune"` (grid search on the
/// training split).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionThreshold {
    Fixed(f64),
    Tune,
}

impl Serialize for DecisionThreshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DecisionThreshold::Fixed(v) => s.serialize_f64(*v),
            DecisionThreshold::Tune => s.serialize_str("tune"),
        }
    }
}

impl<'de> Deserialize<'de> for DecisionThreshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = DecisionThreshold;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number in (0, 1) or \"tune\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(DecisionThreshold::Fixed(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(DecisionThreshold::Fixed(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(DecisionThreshold::Fixed(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "tune" {
                    Ok(DecisionThreshold::Tune)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Every tunable of the fusion game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    pub labels: Vec<String>,
    /// Expert ids in index order; empty means "take them from the dataset".
    pub experts: Vec<String>,
    pub k_reliability: usize,
    pub k_prior: usize,
    pub kernel_exponent: f64,
    pub rho_max: f64,
    pub window: usize,
    pub eta: f64,
    pub alpha: f64,
    pub prize: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub decision_threshold: DecisionThreshold,
    /// Reputation entries are raised to at least this after each update; 0 disables.
    pub reputation_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bank_max: Option<usize>,
    pub freeze_reputation: bool,
    pub naive_credit: bool,
    pub no_guardrail: bool,
    pub context_agnostic: bool,
    /// Evaluation-split rounds do not update reputation, bank or window.
    pub no_update_eval: bool,
    /// Macro-F1 skips labels with no true or predicted positives.
    pub macro_skip_empty: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            labels: default_labels(),
            experts: Vec::new(),
            k_reliability: 50,
            k_prior: 50,
            kernel_exponent: 2.0,
            rho_max: 0.5,
            window: 200,
            eta: 1.0,
            alpha: 0.0,
            prize: 0.0,
            delta: 1.0,
            epsilon: 1e-6,
            decision_threshold: DecisionThreshold::Tune,
            reputation_floor: 1e-8,
            bank_max: None,
            freeze_reputation: false,
            naive_credit: false,
            no_guardrail: false,
            context_agnostic: false,
            no_update_eval: false,
            macro_skip_empty: false,
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(FusionError::InvalidConfig(msg.to_string()))
    }
}

fn unique(items: &[String]) -> bool {
    let mut seen = std::collections::HashSet::new();
    items.iter().all(|s| seen.insert(s))
}

impl GameConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GameConfig =
            toml::from_str(text).map_err(|e| FusionError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    /// Checks every field against its domain. An empty expert list is
    /// accepted here; the engine requires it to be filled in.
    pub fn validate(&self) -> Result<()> {
        check(!self.labels.is_empty(), "labels must be non-empty")?;
        check(unique(&self.labels), "labels must be unique")?;
        check(unique(&self.experts), "experts must be unique")?;
        check(
            self.experts.len() <= MAX_SHAPLEY_EXPERTS,
            "at most 20 experts are supported",
        )?;
        check(self.k_reliability > 0, "k_reliability must be positive")?;
        check(self.k_prior > 0, "k_prior must be positive")?;
        check(
            self.kernel_exponent > 0.0 && self.kernel_exponent.is_finite(),
            "kernel_exponent must be positive",
        )?;
        check((0.0..=1.0).contains(&self.rho_max), "rho_max must lie in [0, 1]")?;
        check(self.window > 0, "window must be positive")?;
        check(self.eta > 0.0 && self.eta.is_finite(), "eta must be positive")?;
        check((0.0..=1.0).contains(&self.alpha), "alpha must lie in [0, 1]")?;
        check(self.prize >= 0.0 && self.prize.is_finite(), "prize must be non-negative")?;
        check(self.delta > 0.0 && self.delta <= 1.0, "delta must lie in (0, 1]")?;
        check(self.epsilon > 0.0 && self.epsilon < 0.5, "epsilon must lie in (0, 0.5)")?;
        check(
            (0.0..1.0).contains(&self.reputation_floor),
            "reputation_floor must lie in [0, 1)",
        )?;
        check(self.bank_max != Some(0), "bank_max must be positive")?;
        if let DecisionThreshold::Fixed(t) = self.decision_threshold {
            check(t > 0.0 && t < 1.0, "decision_threshold must lie in (0, 1)")?;
        }
        Ok(())
    }
}
