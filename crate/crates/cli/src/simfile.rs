//! Flat simulation config: `SimConfig` fields plus per-expert arrays.
//!
//! ```toml
//! n_rounds = 3000
//! seed = 7
//! expert_ids = ["high", "med", "low"]
//! tpr = [0.85, 0.75, 0.65]
//! fpr = [0.05, 0.10, 0.15]
//! correlation_partner = ["", "", "med"]
//! correlation_strength = [0.0, 0.0, 0.8]
//! ```
//!
//! `regime_tpr` / `regime_fpr` (`[expert][regime][label]`) override the
//! scalar rates. Without `expert_ids` the high/med/low trio is used.

use serde::{Deserialize, Serialize};

use ctxfuse::simulator::tiered_profiles;
use ctxfuse::{FusionError, SimConfig, SyntheticExpertProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimFile {
    pub n_experts: Option<usize>,
    pub n_labels: usize,
    pub n_rounds: usize,
    pub n_regimes: usize,
    pub base_rates: Option<Vec<Vec<f64>>>,
    pub dim: usize,
    pub max_centroid_cosine: f64,
    pub noise_scale: f64,
    pub labelled_fraction: f64,
    pub seed: u64,
    pub labels: Option<Vec<String>>,
    pub expert_ids: Option<Vec<String>>,
    pub tpr: Option<Vec<f64>>,
    pub fpr: Option<Vec<f64>>,
    pub regime_tpr: Option<Vec<Vec<Vec<f64>>>>,
    pub regime_fpr: Option<Vec<Vec<Vec<f64>>>>,
    pub correlation_partner: Option<Vec<String>>,
    pub correlation_strength: Option<Vec<f64>>,
}

impl Default for SimFile {
    fn default() -> Self {
        let d = SimConfig::default();
        SimFile {
            n_experts: None,
            n_labels: d.n_labels,
            n_rounds: d.n_rounds,
            n_regimes: d.n_regimes,
            base_rates: d.base_rates,
            dim: d.dim,
            max_centroid_cosine: d.max_centroid_cosine,
            noise_scale: d.noise_scale,
            labelled_fraction: d.labelled_fraction,
            seed: d.seed,
            labels: d.labels,
            expert_ids: None,
            tpr: None,
            fpr: None,
            regime_tpr: None,
            regime_fpr: None,
            correlation_partner: None,
            correlation_strength: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> FusionError {
    FusionError::InvalidConfig(msg.into())
}

fn per_expert<T: Clone>(field: &str, values: &Option<Vec<T>>, n: usize) -> Result<Option<Vec<T>>, FusionError> {
    match values {
        Some(v) if v.len() != n => Err(invalid(format!("{field} needs one entry per expert ({n})"))),
        other => Ok(other.clone()),
    }
}

impl SimFile {
    pub fn parse(text: &str) -> Result<Self, FusionError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// The simulator config and expert profiles this file describes.
    pub fn resolve(&self) -> Result<(SimConfig, Vec<SyntheticExpertProfile>), FusionError> {
        let (regimes, labels) = (self.n_regimes, self.n_labels);
        let mut profiles = match &self.expert_ids {
            None => {
                if self.tpr.is_some() || self.fpr.is_some() || self.regime_tpr.is_some() || self.regime_fpr.is_some() {
                    return Err(invalid("expert rates given without expert_ids"));
                }
                tiered_profiles(regimes, labels)
            }
            Some(ids) => {
                let n = ids.len();
                let tpr = per_expert("tpr", &self.tpr, n)?;
                let fpr = per_expert("fpr", &self.fpr, n)?;
                let regime_tpr = per_expert("regime_tpr", &self.regime_tpr, n)?;
                let regime_fpr = per_expert("regime_fpr", &self.regime_fpr, n)?;
                let rates = |i: usize, scalar: &Option<Vec<f64>>, table: &Option<Vec<Vec<Vec<f64>>>>, name: &str| {
                    match (table, scalar) {
                        (Some(t), _) => Ok(t[i].clone()),
                        (None, Some(s)) => Ok(vec![vec![s[i]; labels]; regimes]),
                        (None, None) => Err(invalid(format!("{name} or regime_{name} is required"))),
                    }
                };
                (0..n)
                    .map(|i| {
                        Ok(SyntheticExpertProfile {
                            id: ids[i].clone(),
                            tpr: rates(i, &tpr, &regime_tpr, "tpr")?,
                            fpr: rates(i, &fpr, &regime_fpr, "fpr")?,
                            correlation_partner: None,
                            correlation_strength: 0.0,
                        })
                    })
                    .collect::<Result<Vec<_>, FusionError>>()?
            }
        };
        let n = profiles.len();
        let partners = per_expert("correlation_partner", &self.correlation_partner, n)?;
        let strengths = per_expert("correlation_strength", &self.correlation_strength, n)?;
        if let Some(partners) = partners {
            let strengths = strengths.ok_or_else(|| invalid("correlation_partner needs correlation_strength"))?;
            for (i, partner) in partners.iter().enumerate() {
                if partner.is_empty() {
                    continue;
                }
                let j = profiles
                    .iter()
                    .position(|p| &p.id == partner)
                    .ok_or_else(|| invalid(format!("unknown correlation partner {partner:?}")))?;
                profiles[i] = profiles[i].clone().with_partner(j, strengths[i]);
            }
        } else if strengths.is_some() {
            return Err(invalid("correlation_strength needs correlation_partner"));
        }
        if let Some(declared) = self.n_experts {
            if declared != n {
                return Err(invalid(format!("n_experts = {declared} but {n} experts are described")));
            }
        }
        let sim = SimConfig {
            n_experts: n,
            n_labels: labels,
            n_rounds: self.n_rounds,
            n_regimes: regimes,
            base_rates: self.base_rates.clone(),
            dim: self.dim,
            max_centroid_cosine: self.max_centroid_cosine,
            noise_scale: self.noise_scale,
            labelled_fraction: self.labelled_fraction,
            seed: self.seed,
            labels: self.labels.clone(),
        };
        sim.validate()?;
        Ok((sim, profiles))
    }
}
