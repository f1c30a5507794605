//! The full system and its four single-component ablations.

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::context_bank::RoundRecord;
use crate::engine::{replay, ReplayReport, SplitSpec};
use crate::error::Result;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    FreezeReputation,
    NaiveCredit,
    NoGuardrail,
    ContextAgnostic,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::FreezeReputation,
        Variant::NaiveCredit,
        Variant::NoGuardrail,
        Variant::ContextAgnostic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::FreezeReputation => "freeze_reputation",
            Variant::NaiveCredit => "naive_credit",
            Variant::NoGuardrail => "no_guardrail",
            Variant::ContextAgnostic => "context_agnostic",
        }
    }

    /// `base` with every ablation flag cleared, then this variant's flag set.
    pub fn apply(self, base: &GameConfig) -> GameConfig {
        let mut cfg = GameConfig {
            freeze_reputation: false,
            naive_credit: false,
            no_guardrail: false,
            context_agnostic: false,
            ..base.clone()
        };
        match self {
            Variant::Full => {}
            Variant::FreezeReputation => cfg.freeze_reputation = true,
            Variant::NaiveCredit => cfg.naive_credit = true,
            Variant::NoGuardrail => cfg.no_guardrail = true,
            Variant::ContextAgnostic => cfg.context_agnostic = true,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: ReplayReport,
}

/// Replays every variant on the same stream and split; variants run in
/// parallel, each replay stays sequential.
pub fn run_ablations(rounds: &[RoundRecord], base: &GameConfig, split: &SplitSpec) -> Result<Vec<AblationRow>> {
    par::map_slice(&Variant::ALL, |&variant| {
        replay(rounds, &variant.apply(base), split).map(|report| AblationRow { variant, report })
    })
    .into_iter()
    .collect()
}
