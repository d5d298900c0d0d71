use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::{RankError, Result};

/// Exact null distribution of D = R_i − R_j, the difference of two
/// treatments' rank sums over `n` independent blocks of `k` treatments
/// without ties. `counts[d + n(k−1)]` is the number of the `(k(k−1))^n`
/// equally likely outcomes with D = d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDiffDistribution {
    k: u32,
    n: u32,
    counts: Vec<BigUint>,
}

impl ExactDiffDistribution {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// n(k−1), the largest possible |D|.
    pub fn support_bound(&self) -> u64 {
        u64::from(self.n) * u64::from(self.k - 1)
    }

    pub fn count(&self, d: i64) -> BigUint {
        let offset = self.support_bound() as i64;
        usize::try_from(d + offset).ok().and_then(|i| self.counts.get(i)).cloned().unwrap_or_default()
    }

    /// `(d, count)` over the full support, ascending in d.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &BigUint)> {
        let offset = self.support_bound() as i64;
        self.counts.iter().enumerate().map(move |(i, c)| (i as i64 - offset, c))
    }

    /// (k(k−1))^n.
    pub fn denominator(&self) -> BigUint {
        BigUint::from(u64::from(self.k) * u64::from(self.k - 1)).pow(self.n)
    }

    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.counts.iter().eq(self.counts.iter().rev())
    }

    /// Number of outcomes with |D| ≥ `d_obs`.
    pub fn tail_count(&self, d_obs: u64) -> BigUint {
        self.iter().filter(|(d, _)| d.unsigned_abs() >= d_obs).map(|(_, c)| c).sum()
    }
}

/// Single-block law: count k − |d| for 1 ≤ |d| ≤ k − 1, zero at d = 0.
pub fn block_diff_pmf(k: u32) -> Result<ExactDiffDistribution> {
    if k < 2 {
        return Err(RankError::TooFewTreatments(k as usize));
    }
    let counts = (-(i64::from(k) - 1)..=i64::from(k) - 1)
        .map(|d| if d == 0 { BigUint::zero() } else { BigUint::from(i64::from(k) as u64 - d.unsigned_abs()) })
        .collect();
    Ok(ExactDiffDistribution { k, n: 1, counts })
}

/// Distribution of the sum of two independent differences over disjoint blocks.
pub fn convolve(a: &ExactDiffDistribution, b: &ExactDiffDistribution) -> Result<ExactDiffDistribution> {
    if a.k != b.k {
        return Err(RankError::TreatmentMismatch(a.k, b.k));
    }
    let mut counts = vec![BigUint::zero(); a.counts.len() + b.counts.len() - 1];
    for (i, ca) in a.counts.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (j, cb) in b.counts.iter().enumerate() {
            if !cb.is_zero() {
                counts[i + j] += ca * cb;
            }
        }
    }
    Ok(ExactDiffDistribution { k: a.k, n: a.n + b.n, counts })
}

/// n-fold self-convolution of the single-block law.
pub fn exact_diff_distribution(k: u32, n: u32) -> Result<ExactDiffDistribution> {
    if n == 0 {
        return Err(RankError::NoBlocks);
    }
    let block = block_diff_pmf(k)?;
    let mut dist = block.clone();
    for _ in 1..n {
        dist = convolve(&dist, &block)?;
    }
    Ok(dist)
}

/// A probability held both exactly and as the nearest `f64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PValue {
    pub exact: BigRational,
}

impl PValue {
    pub fn new(numer: BigUint, denom: BigUint) -> Self {
        Self { exact: BigRational::new(BigInt::from(numer), BigInt::from(denom)) }
    }

    pub fn one() -> Self {
        Self { exact: BigRational::one() }
    }

    pub fn value(&self) -> f64 {
        self.exact.to_f64().unwrap_or(f64::NAN)
    }

    /// `numerator/denominator` in lowest terms.
    pub fn fraction(&self) -> String {
        format!("{}/{}", self.exact.numer(), self.exact.denom())
    }
}

impl Serialize for PValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PValue", 2)?;
        st.serialize_field("exact", &self.fraction())?;
        st.serialize_field("value", &self.value())?;
        st.end()
    }
}

/// Two-sided P(|D| ≥ d_obs) for two treatments out of k over n blocks.
pub fn pairwise_p(k: u32, n: u32, d_obs: u64) -> Result<PValue> {
    let dist = exact_diff_distribution(k, n)?;
    p_from(&dist, d_obs)
}

pub(crate) fn p_from(dist: &ExactDiffDistribution, d_obs: u64) -> Result<PValue> {
    if d_obs > dist.support_bound() {
        return Err(RankError::DiffOutOfRange { d: d_obs, max: dist.support_bound() });
    }
    Ok(PValue::new(dist.tail_count(d_obs), dist.denominator()))
}

/// min(1, m · p).
pub fn bonferroni(p_raw: f64, m: u32) -> f64 {
    (p_raw * f64::from(m)).min(1.0)
}

pub fn bonferroni_exact(p_raw: &PValue, m: u32) -> Result<PValue> {
    if m == 0 {
        return Err(RankError::ZeroMultiplier);
    }
    let scaled = &p_raw.exact * BigRational::from_integer(BigInt::from(m));
    Ok(PValue { exact: scaled.min(BigRational::one()) })
}
