use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use super::{RankError, Regime, Result, Score, ScoreTable};

/// A non-negative multiple of ½, stored as twice its value so that midranks
/// and their sums stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfUnits(pub u64);

impl HalfUnits {
    pub fn from_int(v: u64) -> Self {
        Self(2 * v)
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// Smallest integer not below the value.
    pub fn ceil(self) -> u64 {
        self.0.div_ceil(2)
    }

    pub fn abs_diff(self, other: Self) -> Self {
        Self(self.0.abs_diff(other.0))
    }
}

impl std::ops::Add for HalfUnits {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl std::iter::Sum for HalfUnits {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self(0), |a, b| a + b)
    }
}

impl fmt::Display for HalfUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", self.0 / 2)
        }
    }
}

impl Serialize for HalfUnits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_integer() {
            s.serialize_u64(self.0 / 2)
        } else {
            s.serialize_f64(self.value())
        }
    }
}

/// Descending ranks: 1 for the highest score. Exact ties share the midrank.
pub fn rank_row<T: Score>(scores: &[T]) -> Result<Vec<HalfUnits>> {
    if scores.len() < 2 {
        return Err(RankError::TooFewTreatments(scores.len()));
    }
    if let Some(col) = scores.iter().position(|s| !s.is_finite_score()) {
        return Err(RankError::NonFinite { row: 0, col });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![HalfUnits(0); scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share (start+1+end)/2
        let mid = HalfUnits((start + 1 + end) as u64);
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    Ok(ranks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankMatrix {
    pub rows: Vec<Vec<HalfUnits>>,
}

impl RankMatrix {
    pub fn has_ties(&self) -> bool {
        self.rows.iter().any(|row| {
            let mut sorted = row.clone();
            sorted.sort();
            sorted.windows(2).any(|w| w[0] == w[1])
        })
    }

    /// Each row sums to k(k+1)/2.
    pub fn rows_balanced(&self) -> bool {
        self.rows.iter().all(|row| {
            let k = row.len() as u64;
            row.iter().copied().sum::<HalfUnits>() == HalfUnits(k * (k + 1))
        })
    }
}

pub fn rank_matrix<T: Score>(table: &ScoreTable<T>) -> Result<RankMatrix> {
    let rows = table
        .rows()
        .enumerate()
        .map(|(r, row)| {
            rank_row(row).map_err(|e| match e {
                RankError::NonFinite { col, .. } => RankError::NonFinite { row: r, col },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RankMatrix { rows })
}

/// Column-wise sums of the rank matrix, in column order.
pub fn rank_sums(ranks: &RankMatrix) -> Vec<HalfUnits> {
    let k = ranks.rows.first().map_or(0, Vec::len);
    (0..k).map(|c| ranks.rows.iter().map(|row| row[c]).sum()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaselineDiff {
    pub architecture: String,
    pub regime: Regime,
    pub baseline_col: usize,
    pub col: usize,
    pub diff: HalfUnits,
}

/// |sum(Org) − sum(column)| for every non-Org column, grouped by architecture
/// in order of first appearance.
pub fn baseline_diffs<T: Score>(table: &ScoreTable<T>, sums: &[HalfUnits]) -> Result<Vec<BaselineDiff>> {
    let groups = table.groups();
    let mut archs: Vec<&str> = Vec::new();
    for g in groups {
        if !archs.contains(&g.architecture.as_str()) {
            archs.push(&g.architecture);
        }
    }
    let mut out = Vec::new();
    for arch in archs {
        let cols: Vec<usize> = (0..groups.len()).filter(|&c| groups[c].architecture == arch).collect();
        let baselines: Vec<usize> = cols.iter().copied().filter(|&c| groups[c].regime == Regime::Org).collect();
        let baseline = match baselines.as_slice() {
            [b] => *b,
            [] => return Err(RankError::MissingBaseline(arch.to_string())),
            _ => return Err(RankError::DuplicateBaseline(arch.to_string())),
        };
        for c in cols.into_iter().filter(|&c| c != baseline) {
            out.push(BaselineDiff {
                architecture: arch.to_string(),
                regime: groups[c].regime,
                baseline_col: baseline,
                col: c,
                diff: sums[baseline].abs_diff(sums[c]),
            });
        }
    }
    Ok(out)
}
