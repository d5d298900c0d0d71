use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::exact::p_from;
use super::{
    baseline_diffs, bonferroni_exact, exact_diff_distribution, rank_matrix, rank_sums, HalfUnits, PValue, RankError,
    RankMatrix, Regime, Result, Score, ScoreTable,
};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Published Bonferroni-corrected p-values for rank-sum differences at
/// k = 9 treatments and n = 9 blocks, as `(difference, p)`.
pub const PUBLISHED_P_ROW: [(u64, f64); 4] = [(39, 0.0034), (34, 0.0186), (27, 0.1273), (25, 0.2025)];

/// Comparison counts considered when fitting the Bonferroni multiplier.
pub const CALIBRATION_CANDIDATES: [u32; 3] = [2, 3, 6];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub architecture: String,
    pub regime: Regime,
    pub baseline: String,
    pub column: String,
    pub baseline_sum: HalfUnits,
    pub sum: HalfUnits,
    pub diff: HalfUnits,
    pub p_raw: PValue,
    pub p_corrected: PValue,
    pub significant: bool,
    /// Midranks occurred, so the no-ties exact law is only approximate.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanReport {
    pub k: usize,
    pub n: usize,
    pub m: u32,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    pub ranks: RankMatrix,
    pub sums: Vec<HalfUnits>,
    pub comparisons: Vec<Comparison>,
    pub ties: bool,
}

/// Ranks, rank sums, baseline differences and exact raw / corrected p-values.
pub fn friedman_report<T: Score>(table: &ScoreTable<T>, m: u32) -> Result<FriedmanReport> {
    if m == 0 {
        return Err(RankError::ZeroMultiplier);
    }
    let ranks = rank_matrix(table)?;
    let sums = rank_sums(&ranks);
    let diffs = baseline_diffs(table, &sums)?;
    let ties = ranks.has_ties();
    let dist = exact_diff_distribution(table.k() as u32, table.n() as u32)?;
    let threshold = BigRational::new(BigInt::from(1), BigInt::from(20));
    let comparisons = diffs
        .into_iter()
        .map(|d| {
            let p_raw = p_from(&dist, d.diff.ceil())?;
            let p_corrected = bonferroni_exact(&p_raw, m)?;
            Ok(Comparison {
                architecture: d.architecture,
                regime: d.regime,
                baseline: table.col_ids()[d.baseline_col].clone(),
                column: table.col_ids()[d.col].clone(),
                baseline_sum: sums[d.baseline_col],
                sum: sums[d.col],
                diff: d.diff,
                significant: p_corrected.exact < threshold,
                p_raw,
                p_corrected,
                approximate: ties,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FriedmanReport {
        k: table.k(),
        n: table.n(),
        m,
        row_ids: table.row_ids().to_vec(),
        col_ids: table.col_ids().to_vec(),
        scores: table.rows().map(|r| r.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()).collect(),
        ranks,
        sums,
        comparisons,
        ties,
    })
}

impl FriedmanReport {
    pub fn comparison(&self, column: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.column == column)
    }

    /// Score block with ranks in parentheses, then Sum, Diff. and p rows.
    pub fn to_text(&self) -> String {
        let label_w = self.row_ids.iter().map(String::len).chain([8]).max().unwrap_or(8);
        let col_w = self.col_ids.iter().map(String::len).chain([11]).max().unwrap_or(11);
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "Test set");
        for c in &self.col_ids {
            let _ = write!(out, "  {c:>col_w$}");
        }
        out.push('\n');
        for (r, id) in self.row_ids.iter().enumerate() {
            let _ = write!(out, "{id:<label_w$}");
            for (c, score) in self.scores[r].iter().enumerate() {
                let cell = format!("{score:.2} ({})", self.ranks.rows[r][c]);
                let _ = write!(out, "  {cell:>col_w$}");
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<label_w$}", "Sum");
        for s in &self.sums {
            let _ = write!(out, "  {:>col_w$}", s.to_string());
        }
        out.push('\n');
        let cell = |c: usize, f: &dyn Fn(&Comparison) -> String| {
            self.comparisons.iter().find(|x| x.column == self.col_ids[c]).map_or_else(|| "-".to_string(), f)
        };
        let _ = write!(out, "{:<label_w$}", "Diff.");
        for c in 0..self.col_ids.len() {
            let _ = write!(out, "  {:>col_w$}", cell(c, &|x| x.diff.to_string()));
        }
        out.push('\n');
        let _ = write!(out, "{:<label_w$}", "p");
        for c in 0..self.col_ids.len() {
            let text = cell(c, &|x| format!("{:.4}{}", x.p_corrected.value(), if x.significant { "*" } else { "" }));
            let _ = write!(out, "  {text:>col_w$}");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "\nk = {}, n = {}, Bonferroni m = {}; * marks p < {SIGNIFICANCE_LEVEL}",
            self.k, self.n, self.m
        );
        if self.ties {
            out.push_str("note: tied scores received midranks; exact p-values assume no ties and are approximate\n");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub m: u32,
    pub corrected: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sum_sq: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub k: u32,
    pub n: u32,
    pub published: Vec<(u64, f64)>,
    pub raw: Vec<PValue>,
    pub fits: Vec<CandidateFit>,
    pub chosen_m: u32,
}

/// Picks the single multiplier whose corrected exact p-values best match
/// `published` (least squares, smaller m on ties).
pub fn calibrate_bonferroni(k: u32, n: u32, published: &[(u64, f64)], candidates: &[u32]) -> Result<CalibrationReport> {
    if candidates.contains(&0) || candidates.is_empty() {
        return Err(RankError::ZeroMultiplier);
    }
    let dist = exact_diff_distribution(k, n)?;
    let raw = published.iter().map(|&(d, _)| p_from(&dist, d)).collect::<Result<Vec<_>>>()?;
    let fits: Vec<CandidateFit> = candidates
        .iter()
        .map(|&m| {
            let corrected: Vec<f64> = raw.iter().map(|p| super::bonferroni(p.value(), m)).collect();
            let residuals: Vec<f64> = corrected.iter().zip(published).map(|(c, (_, p))| c - p).collect();
            CandidateFit {
                m,
                sum_sq: residuals.iter().map(|r| r * r).sum(),
                max_abs: residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
                corrected,
                residuals,
            }
        })
        .collect();
    let chosen_m = fits
        .iter()
        .min_by(|a, b| a.sum_sq.total_cmp(&b.sum_sq).then(a.m.cmp(&b.m)))
        .map(|f| f.m)
        .expect("non-empty candidates");
    Ok(CalibrationReport { k, n, published: published.to_vec(), raw, fits, chosen_m })
}

impl CalibrationReport {
    pub fn chosen(&self) -> &CandidateFit {
        self.fits.iter().find(|f| f.m == self.chosen_m).expect("chosen fit exists")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("Bonferroni multiplier calibration (k = {}, n = {})\n", self.k, self.n);
        for f in &self.fits {
            let _ = writeln!(
                s,
                "  m = {}: corrected {:?}, max |residual| {:.5}{}",
                f.m,
                f.corrected.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
                f.max_abs,
                if f.m == self.chosen_m { "  <- chosen" } else { "" }
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Bonferroni multiplier calibration\n\n");
        let _ = writeln!(
            s,
            "Exact two-sided pairwise rank-sum p-values for k = {} treatments over n = {} blocks, \
             from the full convolution of per-block rank differences (denominator (k(k-1))^n).\n",
            self.k, self.n
        );
        s.push_str("| diff | exact raw p (fraction) | raw p |\n|---:|---|---:|\n");
        for ((d, _), p) in self.published.iter().zip(&self.raw) {
            let _ = writeln!(s, "| {d} | {} | {:.6} |", p.fraction(), p.value());
        }
        s.push_str(
            "\n| m | corrected p | residuals vs published | sum of squares | max abs |\n|---:|---|---|---:|---:|\n",
        );
        for f in &self.fits {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.3e} | {:.5} |",
                f.m,
                f.corrected.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
                f.residuals.iter().map(|v| format!("{v:+.5}")).collect::<Vec<_>>().join(", "),
                f.sum_sq,
                f.max_abs
            );
        }
        let _ = writeln!(
            s,
            "\nPublished corrected values: {}.\n\nChosen m = {} (least squares over candidates {:?}).",
            self.published.iter().map(|(d, p)| format!("{p} (diff {d})")).collect::<Vec<_>>().join(", "),
            self.chosen_m,
            self.fits.iter().map(|f| f.m).collect::<Vec<_>>()
        );
        s
    }
}
