//! JSONL round format.
//!
//! One object per line:
//!
//! ```text
//! {"round_id": 7, "context": [0.1, ...], "reports": {"expert": ["label", ...]}, "truth": ["label"] | null}
//! ```
//!
//! Labels travel by name and are mapped to indices through the configured
//! label order; the same goes for expert ids.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::context_bank::{ContextVector, RoundRecord};
use crate::error::{FusionError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRound {
    pub round_id: u64,
    pub context: Vec<f64>,
    pub reports: BTreeMap<String, Vec<String>>,
    pub truth: Option<Vec<String>>,
}

/// Parses every non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<WireRound>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let round: WireRound = serde_json::from_str(&line).map_err(|e| FusionError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(round);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, rounds: &[WireRound]) -> Result<()> {
    for r in rounds {
        let line = serde_json::to_string(r).map_err(|e| FusionError::Io(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Bidirectional mapping between names on the wire and engine indices.
#[derive(Debug, Clone)]
pub struct Codec {
    labels: Vec<String>,
    experts: Vec<String>,
    label_index: HashMap<String, usize>,
}

impl Codec {
    pub fn new(labels: &[String], experts: &[String]) -> Self {
        Codec {
            labels: labels.to_vec(),
            experts: experts.to_vec(),
            label_index: labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect(),
        }
    }

    fn indicator(&self, names: &[String]) -> std::result::Result<Vec<bool>, String> {
        let mut v = vec![false; self.labels.len()];
        for name in names {
            let idx = self
                .label_index
                .get(name)
                .ok_or_else(|| format!("unknown label {name:?}"))?;
            v[*idx] = true;
        }
        Ok(v)
    }

    fn names(&self, indicator: &[bool]) -> Vec<String> {
        self.labels
            .iter()
            .zip(indicator)
            .filter(|(_, &on)| on)
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// Converts one wire round; `line` is used for error messages.
    pub fn decode(&self, wire: &WireRound, line: usize) -> Result<RoundRecord> {
        let parse = |message: String| FusionError::Parse { line, message };
        let context = ContextVector::normalize(&wire.context).map_err(|e| parse(e.to_string()))?;
        if let Some(extra) = wire.reports.keys().find(|k| !self.experts.contains(k)) {
            return Err(parse(format!("unknown expert {extra:?}")));
        }
        let reports = self
            .experts
            .iter()
            .map(|e| {
                let names = wire.reports.get(e).ok_or_else(|| FusionError::MissingExpertReport {
                    round_id: wire.round_id,
                    expert: e.clone(),
                })?;
                self.indicator(names).map_err(parse)
            })
            .collect::<Result<Vec<_>>>()?;
        let truth = match &wire.truth {
            Some(t) => Some(self.indicator(t).map_err(parse)?),
            None => None,
        };
        RoundRecord::new(wire.round_id, context, reports, truth, self.labels.len())
    }

    pub fn encode(&self, record: &RoundRecord) -> WireRound {
        WireRound {
            round_id: record.round_id,
            context: record.context.as_slice().to_vec(),
            reports: self
                .experts
                .iter()
                .zip(&record.reports)
                .map(|(e, r)| (e.clone(), self.names(r)))
                .collect(),
            truth: record.truth.as_ref().map(|t| self.names(t)),
        }
    }

    /// Decodes a parsed stream, numbering rounds by position for errors.
    pub fn decode_all(&self, wires: &[WireRound]) -> Result<Vec<RoundRecord>> {
        wires
            .iter()
            .enumerate()
            .map(|(i, w)| self.decode(w, i + 1))
            .collect()
    }
}

/// Expert ids named in the first round, sorted.
pub fn experts_in(wires: &[WireRound]) -> Vec<String> {
    wires
        .first()
        .map(|w| w.reports.keys().cloned().collect())
        .unwrap_or_default()
}
