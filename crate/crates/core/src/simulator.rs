//! Synthetic expert report streams with known reliabilities, context regimes
//! and coupled errors, plus the majority-vote baseline.
//!
//! Each round draws a regime, a context around that regime's centroid, a
//! truth vector from the regime's base rates and one report per expert from
//! its regime TPR/FPR. An expert with a correlation partner copies the
//! partner's error event on each label with probability
//! `correlation_strength`. Rounds are seeded independently from
//! `(seed, round_id)`, so generation order does not affect the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::LABEL_ONTOLOGY;
use crate::context_bank::{ContextVector, RoundRecord};
use crate::error::{FusionError, Result};
use crate::par;

const MAX_CENTROID_TRIES: usize = 10_000;

/// Ground-truth behaviour of one synthetic expert.
///
/// `tpr[regime][label]` and `fpr[regime][label]` are report probabilities
/// given a true and a false label respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExpertProfile {
    pub id: String,
    pub tpr: Vec<Vec<f64>>,
    pub fpr: Vec<Vec<f64>>,
    pub correlation_partner: Option<usize>,
    pub correlation_strength: f64,
}

impl SyntheticExpertProfile {
    /// Same rates on every regime and label.
    pub fn uniform(id: &str, n_regimes: usize, n_labels: usize, tpr: f64, fpr: f64) -> Self {
        SyntheticExpertProfile {
            id: id.to_string(),
            tpr: vec![vec![tpr; n_labels]; n_regimes],
            fpr: vec![vec![fpr; n_labels]; n_regimes],
            correlation_partner: None,
            correlation_strength: 0.0,
        }
    }

    pub fn with_partner(mut self, partner: usize, strength: f64) -> Self {
        self.correlation_partner = Some(partner);
        self.correlation_strength = strength;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_experts: usize,
    pub n_labels: usize,
    pub n_rounds: usize,
    pub n_regimes: usize,
    /// `base_rates[regime][label]`; drawn from `[0.1, 0.4]` when absent.
    pub base_rates: Option<Vec<Vec<f64>>>,
    pub dim: usize,
    /// Largest allowed cosine between two regime centroids.
    pub max_centroid_cosine: f64,
    /// Per-coordinate Gaussian noise added to the centroid.
    pub noise_scale: f64,
    pub labelled_fraction: f64,
    pub seed: u64,
    /// Label names; the driving ontology for 14 labels, `label_k` otherwise.
    pub labels: Option<Vec<String>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_experts: 3,
            n_labels: 14,
            n_rounds: 3000,
            n_regimes: 4,
            base_rates: None,
            dim: 16,
            max_centroid_cosine: 0.3,
            noise_scale: 0.1,
            labelled_fraction: 1.0,
            seed: 42,
            labels: None,
        }
    }
}

impl SimConfig {
    pub fn label_names(&self) -> Vec<String> {
        match &self.labels {
            Some(l) => l.clone(),
            None if self.n_labels == LABEL_ONTOLOGY.len() => {
                LABEL_ONTOLOGY.iter().map(|s| s.to_string()).collect()
            }
            None => (0..self.n_labels).map(|k| format!("label_{k}")).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FusionError::InvalidConfig(m.to_string()));
        if self.n_experts == 0 || self.n_labels == 0 || self.n_rounds == 0 || self.n_regimes == 0 || self.dim == 0 {
            return bad("counts must be positive");
        }
        if !(self.labelled_fraction > 0.0 && self.labelled_fraction <= 1.0) {
            return bad("labelled_fraction must lie in (0, 1]");
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale must be non-negative");
        }
        if !(-1.0..=1.0).contains(&self.max_centroid_cosine) {
            return bad("max_centroid_cosine must lie in [-1, 1]");
        }
        if let Some(l) = &self.labels {
            if l.len() != self.n_labels {
                return bad("labels must have n_labels entries");
            }
        }
        if let Some(rates) = &self.base_rates {
            if rates.len() != self.n_regimes || rates.iter().any(|r| r.len() != self.n_labels) {
                return bad("base_rates must be n_regimes x n_labels");
            }
            if rates.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("base rates must be probabilities");
            }
        }
        Ok(())
    }
}

fn check_profiles(sim: &SimConfig, profiles: &[SyntheticExpertProfile]) -> Result<()> {
    if profiles.len() != sim.n_experts {
        return Err(FusionError::ProfileCountMismatch {
            expected: sim.n_experts,
            found: profiles.len(),
        });
    }
    for (i, p) in profiles.iter().enumerate() {
        let bad = |m: String| Err(FusionError::InvalidConfig(format!("profile {}: {m}", p.id)));
        for table in [&p.tpr, &p.fpr] {
            if table.len() != sim.n_regimes || table.iter().any(|r| r.len() != sim.n_labels) {
                return bad("rates must be n_regimes x n_labels".into());
            }
            if table.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("rates must be probabilities".into());
            }
        }
        if !(0.0..=1.0).contains(&p.correlation_strength) {
            return bad("correlation_strength must lie in [0, 1]".into());
        }
        if let Some(j) = p.correlation_partner {
            if j == i || j >= profiles.len() {
                return bad(format!("invalid correlation partner {j}"));
            }
            if profiles[j].correlation_partner.is_some() {
                return bad("a correlation partner cannot itself copy another expert".into());
            }
        }
    }
    Ok(())
}

/// A generated stream with its label and expert names.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub labels: Vec<String>,
    pub experts: Vec<String>,
    pub centroids: Vec<ContextVector>,
    pub base_rates: Vec<Vec<f64>>,
    /// Regime of each round.
    pub regimes: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
}

/// SplitMix64 finaliser, used to derive per-round seeds.
pub fn mix_seed(seed: u64, round_id: u64) -> u64 {
    let mut z = seed ^ round_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> ContextVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = ContextVector::normalize(&v) {
            return u;
        }
    }
}

fn centroids(sim: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<ContextVector>> {
    let mut out: Vec<ContextVector> = Vec::with_capacity(sim.n_regimes);
    let mut tries = 0;
    while out.len() < sim.n_regimes {
        tries += 1;
        if tries > MAX_CENTROID_TRIES {
            return Err(FusionError::InvalidConfig(
                "cannot place regime centroids with the requested separation".into(),
            ));
        }
        let c = random_unit(rng, sim.dim);
        if out.iter().all(|o| dot(o, &c) < sim.max_centroid_cosine) {
            out.push(c);
        }
    }
    Ok(out)
}

fn dot(a: &ContextVector, b: &ContextVector) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

struct Generated {
    regime: usize,
    record: RoundRecord,
}

fn generate_round(
    sim: &SimConfig,
    profiles: &[SyntheticExpertProfile],
    centroids: &[ContextVector],
    base_rates: &[Vec<f64>],
    round_id: u64,
) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(sim.seed, round_id));
    let regime = rng.random_range(0..sim.n_regimes);
    let noise = Normal::new(0.0, sim.noise_scale).expect("noise scale validated");
    let raw: Vec<f64> = centroids[regime]
        .as_slice()
        .iter()
        .map(|c| c + noise.sample(&mut rng))
        .collect();
    let context = ContextVector::normalize(&raw).unwrap_or_else(|_| centroids[regime].clone());
    let truth: Vec<bool> = base_rates[regime].iter().map(|&p| rng.random_bool(p)).collect();
    let labelled = rng.random_bool(sim.labelled_fraction);
    let mut reports: Vec<Vec<bool>> = profiles
        .iter()
        .map(|p| {
            truth
                .iter()
                .enumerate()
                .map(|(k, &y)| {
                    let rate = if y { p.tpr[regime][k] } else { p.fpr[regime][k] };
                    rng.random_bool(rate)
                })
                .collect()
        })
        .collect();
    for (j, p) in profiles.iter().enumerate() {
        if let Some(src) = p.correlation_partner {
            let source = reports[src].clone();
            for (r, &s) in reports[j].iter_mut().zip(&source) {
                if rng.random_bool(p.correlation_strength) {
                    // same error event on the same truth means the same report
                    *r = s;
                }
            }
        }
    }
    Generated {
        regime,
        record: RoundRecord {
            round_id,
            context,
            reports,
            truth: labelled.then_some(truth),
        },
    }
}

/// Generates `sim.n_rounds` rounds with ids `1..=n_rounds`.
pub fn generate_dataset(sim: &SimConfig, profiles: &[SyntheticExpertProfile]) -> Result<SyntheticDataset> {
    sim.validate()?;
    check_profiles(sim, profiles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let centroids = centroids(sim, &mut rng)?;
    let base_rates = match &sim.base_rates {
        Some(r) => r.clone(),
        None => (0..sim.n_regimes)
            .map(|_| (0..sim.n_labels).map(|_| rng.random_range(0.1..0.4)).collect())
            .collect(),
    };
    let generated = par::map_range(sim.n_rounds, |i| {
        generate_round(sim, profiles, &centroids, &base_rates, i as u64 + 1)
    });
    let (regimes, rounds) = generated.into_iter().map(|g| (g.regime, g.record)).unzip();
    Ok(SyntheticDataset {
        labels: sim.label_names(),
        experts: profiles.iter().map(|p| p.id.clone()).collect(),
        centroids,
        base_rates,
        regimes,
        rounds,
    })
}

/// Includes a label iff strictly more than half of the experts report it.
pub fn majority_vote(reports: &[Vec<bool>]) -> Vec<bool> {
    let n = reports.len();
    let n_labels = reports.first().map_or(0, Vec::len);
    (0..n_labels)
        .map(|k| 2 * reports.iter().filter(|r| r[k]).count() > n)
        .collect()
}

/// High / medium / low quality experts used throughout the test suites.
pub fn tiered_profiles(n_regimes: usize, n_labels: usize) -> Vec<SyntheticExpertProfile> {
    vec![
        SyntheticExpertProfile::uniform("high", n_regimes, n_labels, 0.85, 0.05),
        SyntheticExpertProfile::uniform("med", n_regimes, n_labels, 0.75, 0.10),
        SyntheticExpertProfile::uniform("low", n_regimes, n_labels, 0.65, 0.15),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_rounds: usize) -> SimConfig {
        SimConfig {
            n_labels: 4,
            n_rounds,
            n_regimes: 2,
            dim: 8,
            ..SimConfig::default()
        }
    }

    #[test]
    fn perfect_expert_matches_truth() {
        let sim = small(300);
        let profiles = vec![
            SyntheticExpertProfile::uniform("p", 2, 4, 1.0, 0.0),
            SyntheticExpertProfile::uniform("q", 2, 4, 0.7, 0.2),
            SyntheticExpertProfile::uniform("r", 2, 4, 0.6, 0.3),
        ];
        let ds = generate_dataset(&sim, &profiles).unwrap();
        assert_eq!(ds.rounds.len(), 300);
        for r in &ds.rounds {
            assert_eq!(Some(&r.reports[0]), r.truth.as_ref());
        }
    }

    #[test]
    fn uninformative_expert_rates() {
        let sim = SimConfig {
            n_experts: 1,
            n_labels: 2,
            n_rounds: 10_000,
            n_regimes: 1,
            dim: 4,
            seed: 9,
            ..SimConfig::default()
        };
        let p = 0.3;
        let ds = generate_dataset(&sim, &[SyntheticExpertProfile::uniform("u", 1, 2, p, p)]).unwrap();
        let (mut pos, mut pos_hit, mut neg, mut neg_hit) = (0f64, 0f64, 0f64, 0f64);
        for r in &ds.rounds {
            let t = r.truth.as_ref().unwrap();
            for (k, &y) in t.iter().enumerate() {
                if y {
                    pos += 1.0;
                    pos_hit += r.reports[0][k] as u8 as f64;
                } else {
                    neg += 1.0;
                    neg_hit += r.reports[0][k] as u8 as f64;
                }
            }
        }
        let sd = |n: f64| (p * (1.0 - p) / n).sqrt();
        assert!((pos_hit / pos - p).abs() < 3.0 * sd(pos));
        assert!((neg_hit / neg - p).abs() < 3.0 * sd(neg));
    }

    #[test]
    fn fully_coupled_pair_shares_errors() {
        let sim = small(500);
        let mut profiles = tiered_profiles(2, 4);
        profiles[2] = profiles[2].clone().with_partner(1, 1.0);
        let ds = generate_dataset(&sim, &profiles).unwrap();
        for r in &ds.rounds {
            let t = r.truth.as_ref().unwrap();
            for (k, &y) in t.iter().enumerate() {
                assert_eq!(r.reports[1][k] != y, r.reports[2][k] != y);
            }
        }
    }

    #[test]
    fn deterministic_and_order_free() {
        let sim = small(200);
        let a = generate_dataset(&sim, &tiered_profiles(2, 4)).unwrap();
        let b = generate_dataset(&sim, &tiered_profiles(2, 4)).unwrap();
        assert_eq!(a, b);
        let other = generate_dataset(&SimConfig { seed: 43, ..sim.clone() }, &tiered_profiles(2, 4)).unwrap();
        assert_ne!(a.rounds, other.rounds);
    }

    #[test]
    fn centroids_are_separated() {
        let sim = SimConfig { n_regimes: 6, ..SimConfig::default() };
        let ds = generate_dataset(&SimConfig { n_rounds: 10, ..sim }, &tiered_profiles(6, 14)).unwrap();
        for i in 0..6 {
            for j in (i + 1)..6 {
                assert!(dot(&ds.centroids[i], &ds.centroids[j]) < 0.3);
            }
        }
    }

    #[test]
    fn labelled_fraction_is_respected() {
        let sim = SimConfig { labelled_fraction: 0.5, ..small(4000) };
        let ds = generate_dataset(&sim, &tiered_profiles(2, 4)).unwrap();
        let frac = ds.rounds.iter().filter(|r| r.is_labelled()).count() as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 3.0 * (0.25f64 / 4000.0).sqrt());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            generate_dataset(&small(10), &tiered_profiles(2, 4)[..2]),
            Err(FusionError::ProfileCountMismatch { expected: 3, found: 2 })
        ));
        assert!(matches!(
            generate_dataset(&small(0), &tiered_profiles(2, 4)),
            Err(FusionError::InvalidConfig(_))
        ));
        let mut bad = tiered_profiles(2, 4);
        bad[0] = bad[0].clone().with_partner(0, 0.5);
        assert!(generate_dataset(&small(10), &bad).is_err());
    }

    #[test]
    fn majority_examples() {
        let r = vec![vec![true, true, false], vec![true, false, false], vec![false, false, false]];
        assert_eq!(majority_vote(&r), vec![true, false, false]);
        let even = vec![vec![true, true], vec![true, false]];
        assert_eq!(majority_vote(&even), vec![true, false]);
    }
}
