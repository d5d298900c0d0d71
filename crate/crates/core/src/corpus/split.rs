use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DialogueRecord, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Self { train, validation, test };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CorpusError::InvalidRatios(format!("ratios must be finite and non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Split sizes: train and validation are rounded, test takes the rest.
    pub fn sizes(&self, total: usize) -> (usize, usize, usize) {
        let n = total as f64;
        let train = ((self.train * n).round() as usize).min(total);
        let validation = ((self.validation * n).round() as usize).min(total - train);
        (train, validation, total - train - validation)
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CorpusError::InvalidRatios(format!("`{s}`: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => SplitRatios::new(*a, *b, *c),
            _ => Err(CorpusError::InvalidRatios(format!("`{s}`: expected three comma-separated values"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<DialogueRecord>,
    pub validation: Vec<DialogueRecord>,
    pub test: Vec<DialogueRecord>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

/// Uniform index in `0..bound` by rejection sampling on 64-bit draws.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Per-dialogue split. Records are ordered by id, permuted with a
/// Fisher-Yates shuffle driven by `ChaCha8Rng::seed_from_u64(seed)`, then cut
/// into contiguous train / validation / test blocks.
///
/// The permutation depends only on the id set and the seed, so it is stable
/// regardless of input order.
pub fn split_dataset(records: &[DialogueRecord], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.check()?;
    if records.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut order: Vec<&DialogueRecord> = records.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }

    let (n_train, n_val, _) = ratios.sizes(order.len());
    let mut it = order.into_iter().cloned();
    let train: Vec<_> = it.by_ref().take(n_train).collect();
    let validation: Vec<_> = it.by_ref().take(n_val).collect();
    let test: Vec<_> = it.collect();
    Ok(DatasetSplit { train, validation, test, seed, ratios })
}
