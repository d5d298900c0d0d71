use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, ToPrimitive};

/// A W-F1 score value: `f32`, `f64`, or an exact decimal as `Ratio<i64>`.
pub trait Score: Copy + PartialOrd + Debug + ToPrimitive + FromPrimitive + Send + Sync {
    fn is_finite_score(&self) -> bool;

    /// Parses a table cell such as `65.43`.
    fn parse_score(text: &str) -> Option<Self>;
}

impl Score for f64 {
    fn is_finite_score(&self) -> bool {
        self.is_finite()
    }

    fn parse_score(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

impl Score for f32 {
    fn is_finite_score(&self) -> bool {
        self.is_finite()
    }

    fn parse_score(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

impl Score for Ratio<i64> {
    fn is_finite_score(&self) -> bool {
        true
    }

    /// Exact decimal (`-12.50`) or fraction (`3/8`).
    fn parse_score(text: &str) -> Option<Self> {
        let t = text.trim();
        if t.contains('/') {
            return t.parse().ok();
        }
        let (neg, digits) = match t.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 15 {
            return None;
        }
        let denom = 10i64.checked_pow(frac.len() as u32)?;
        let whole: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let part: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        let numer = whole.checked_mul(denom)?.checked_add(part)?;
        Some(Ratio::new(if neg { -numer } else { numer }, denom))
    }
}
