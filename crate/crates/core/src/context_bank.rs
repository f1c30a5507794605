//! Labelled-round storage with cosine-kernel neighbour retrieval.

use std::cmp::Ordering;
use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{FusionError, Result};

const ZERO_NORM: f64 = 1e-12;

/// Banks at least this large are scanned with rayon when `parallel` is on.
pub const PARALLEL_SCAN_MIN: usize = 2048;

const UNIT_TOLERANCE: f64 = 8.0 * f64::EPSILON;

/// A unit-norm context embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector(Vec<f64>);

impl ContextVector {
    /// Scales `raw` to unit Euclidean norm. Vectors already unit-norm to
    /// within rounding are kept as they are, so normalising is idempotent.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= ZERO_NORM {
            return Err(FusionError::ZeroVector);
        }
        if (norm - 1.0).abs() <= UNIT_TOLERANCE {
            return Ok(ContextVector(raw.to_vec()));
        }
        Ok(ContextVector(raw.iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cosine similarity; both vectors are unit-norm so this is the dot product.
    pub fn cosine(&self, other: &ContextVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(FusionError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(dot(&self.0, &other.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn kernel_from_cosine(cos: f64, exponent: f64) -> f64 {
    cos.clamp(0.0, 1.0).powf(exponent)
}

/// Similarity kernel `max(0, cos)^exponent`, always in `[0, 1]`.
pub fn kernel(x: &ContextVector, xs: &ContextVector, exponent: f64) -> Result<f64> {
    Ok(kernel_from_cosine(x.cosine(xs)?, exponent))
}

/// One game round: context, per-expert binary reports and optional truth.
///
/// `reports[i][k]` is expert `i`'s report on label `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round_id: u64,
    pub context: ContextVector,
    pub reports: Vec<Vec<bool>>,
    pub truth: Option<Vec<bool>>,
}

impl RoundRecord {
    /// Builds a record, checking report and truth shapes.
    pub fn new(
        round_id: u64,
        context: ContextVector,
        reports: Vec<Vec<bool>>,
        truth: Option<Vec<bool>>,
        n_labels: usize,
    ) -> Result<Self> {
        for r in &reports {
            if r.len() != n_labels {
                return Err(FusionError::LengthMismatch {
                    left: r.len(),
                    right: n_labels,
                });
            }
        }
        if let Some(t) = &truth {
            if t.len() != n_labels {
                return Err(FusionError::LengthMismatch {
                    left: t.len(),
                    right: n_labels,
                });
            }
        }
        Ok(RoundRecord {
            round_id,
            context,
            reports,
            truth,
        })
    }

    pub fn is_labelled(&self) -> bool {
        self.truth.is_some()
    }

    pub fn n_experts(&self) -> usize {
        self.reports.len()
    }

    /// Copy of this round with the ground truth withheld.
    pub fn without_truth(&self) -> Self {
        RoundRecord {
            truth: None,
            ..self.clone()
        }
    }
}

/// A retrieved neighbour with its raw (unnormalised) kernel weight.
#[derive(Debug, Clone)]
pub struct Neighbor {
    pub record: Arc<RoundRecord>,
    pub weight: f64,
}

/// Top-K neighbours, sorted by descending weight then ascending round id.
#[derive(Debug, Clone, Default)]
pub struct NeighborSet {
    pub entries: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `k` entries, which are the top-k for the same query.
    pub fn prefix(&self, k: usize) -> &[Neighbor] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighbor> {
        self.entries.iter()
    }
}

/// Append-only store of labelled rounds.
///
/// The context dimension is fixed by the constructor or by the first insert.
/// With `max_len` set, the oldest record is evicted once the cap is reached.
#[derive(Debug, Clone)]
pub struct ContextBank {
    dim: Option<usize>,
    kernel_exponent: f64,
    max_len: Option<usize>,
    records: VecDeque<Arc<RoundRecord>>,
    ids: HashSet<u64>,
}

impl ContextBank {
    pub fn new(kernel_exponent: f64) -> Self {
        ContextBank {
            dim: None,
            kernel_exponent,
            max_len: None,
            records: VecDeque::new(),
            ids: HashSet::new(),
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn with_max_len(mut self, max_len: Option<usize>) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn kernel_exponent(&self) -> f64 {
        self.kernel_exponent
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &Arc<RoundRecord>> {
        self.records.iter()
    }

    /// Normalises `raw`, enforcing the bank's dimension when it is known.
    pub fn normalize(&self, raw: &[f64]) -> Result<ContextVector> {
        self.check_dim(raw.len())?;
        ContextVector::normalize(raw)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        match self.dim {
            Some(expected) if expected != found => {
                Err(FusionError::DimensionMismatch { expected, found })
            }
            _ => Ok(()),
        }
    }

    pub fn insert(&mut self, record: RoundRecord) -> Result<()> {
        self.insert_shared(Arc::new(record))
    }

    pub fn insert_shared(&mut self, record: Arc<RoundRecord>) -> Result<()> {
        if !record.is_labelled() {
            return Err(FusionError::UnlabelledRecord(record.round_id));
        }
        self.check_dim(record.context.dim())?;
        if self.ids.contains(&record.round_id) {
            return Err(FusionError::DuplicateRoundId(record.round_id));
        }
        self.dim = Some(record.context.dim());
        if let Some(cap) = self.max_len {
            while self.records.len() >= cap.max(1) {
                if let Some(old) = self.records.pop_front() {
                    self.ids.remove(&old.round_id);
                }
            }
        }
        self.ids.insert(record.round_id);
        self.records.push_back(record);
        Ok(())
    }

    fn score(&self, x: &ContextVector, rec: &RoundRecord) -> f64 {
        kernel_from_cosine(dot(x.as_slice(), rec.context.as_slice()), self.kernel_exponent)
    }

    /// The `k` labelled records most similar to `x`.
    pub fn query_topk(&self, x: &ContextVector, k: usize) -> Result<NeighborSet> {
        #[cfg(feature = "parallel")]
        if self.records.len() >= PARALLEL_SCAN_MIN {
            return self.query_topk_par(x, k);
        }
        self.query_topk_seq(x, k)
    }

    /// Single-threaded scan.
    pub fn query_topk_seq(&self, x: &ContextVector, k: usize) -> Result<NeighborSet> {
        self.check_query(x)?;
        let scored: Vec<(f64, usize)> = self
            .records
            .iter()
            .enumerate()
            .map(|(idx, rec)| (self.score(x, rec), idx))
            .collect();
        Ok(self.select(scored, k))
    }

    /// Rayon scan; returns exactly what [`ContextBank::query_topk_seq`] does.
    #[cfg(feature = "parallel")]
    pub fn query_topk_par(&self, x: &ContextVector, k: usize) -> Result<NeighborSet> {
        self.check_query(x)?;
        let (front, back) = self.records.as_slices();
        let offset = front.len();
        let mut scored: Vec<(f64, usize)> = front
            .par_iter()
            .enumerate()
            .map(|(idx, rec)| (self.score(x, rec), idx))
            .collect();
        scored.par_extend(
            back.par_iter()
                .enumerate()
                .map(|(idx, rec)| (self.score(x, rec), idx + offset)),
        );
        Ok(self.select(scored, k))
    }

    /// Without the `parallel` feature this is the sequential scan.
    #[cfg(not(feature = "parallel"))]
    pub fn query_topk_par(&self, x: &ContextVector, k: usize) -> Result<NeighborSet> {
        self.query_topk_seq(x, k)
    }

    fn check_query(&self, x: &ContextVector) -> Result<()> {
        if self.records.is_empty() {
            return Ok(());
        }
        self.check_dim(x.dim())
    }

    fn select(&self, mut scored: Vec<(f64, usize)>, k: usize) -> NeighborSet {
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0).then_with(|| {
                self.records[a.1]
                    .round_id
                    .cmp(&self.records[b.1].round_id)
            })
        };
        if k == 0 {
            return NeighborSet::default();
        }
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        NeighborSet {
            entries: scored
                .into_iter()
                .map(|(weight, idx)| Neighbor {
                    record: Arc::clone(&self.records[idx]),
                    weight,
                })
                .collect(),
        }
    }
}
