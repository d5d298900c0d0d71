//! Rank-based comparison of models over test sets: row-wise ranking, rank
//! sums, differences against each architecture's baseline column, exact
//! pairwise rank-sum p-values and Bonferroni correction.
//!
//! Score types are generic through [`Score`]; the exact distribution works
//! on arbitrary-width integers so no `(k, n)` can overflow.

mod exact;
mod rank;
mod report;
mod score;
mod table;

pub use exact::{
    block_diff_pmf, bonferroni, bonferroni_exact, convolve, exact_diff_distribution, pairwise_p, ExactDiffDistribution,
    PValue,
};
pub use rank::{baseline_diffs, rank_matrix, rank_row, rank_sums, BaselineDiff, HalfUnits, RankMatrix};
pub use report::{
    calibrate_bonferroni, friedman_report, CalibrationReport, CandidateFit, Comparison, FriedmanReport,
    CALIBRATION_CANDIDATES, PUBLISHED_P_ROW, SIGNIFICANCE_LEVEL,
};
pub use score::Score;
pub use table::{ColumnGroup, Regime, ScoreTable};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("non-finite score at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("score at row {row}, column {col} is outside [0, 100]")]
    OutOfRange { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("at least 2 treatments are required, got {0}")]
    TooFewTreatments(usize),
    #[error("at least 1 block is required")]
    NoBlocks,
    #[error("architecture `{0}` has no Org baseline column")]
    MissingBaseline(String),
    #[error("architecture `{0}` has more than one Org baseline column")]
    DuplicateBaseline(String),
    #[error("group file: {0}")]
    Groups(String),
    #[error("rank-sum difference {d} outside the support [0, {max}]")]
    DiffOutOfRange { d: u64, max: u64 },
    #[error("cannot convolve distributions with k = {0} and k = {1}")]
    TreatmentMismatch(u32, u32),
    #[error("bonferroni multiplier must be at least 1")]
    ZeroMultiplier,
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RankError>;
