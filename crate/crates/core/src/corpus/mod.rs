//! Dialogue corpus model: label sets, speaker casts, records, splitting,
//! label statistics and the line-delimited dataset format.

mod distribution;
mod io;
mod labels;
mod record;
mod split;

pub use distribution::{label_distribution, LabelDistribution};
pub use io::{read_dataset, read_dataset_unchecked, tagged_path, write_dataset, RawLine};
pub use labels::{
    builtin_labelset, builtin_speakers, Family, FamilyDef, FamilyRegistry, LabelSet, SpeakerConfig, SpeakerPolicy,
    BUILTIN_FAMILIES,
};
pub use record::{content_hash, DialogueRecord, Mode, Turn, Violation};
pub use split::{split_dataset, DatasetSplit, SplitRatios};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown dataset family `{0}`")]
    UnknownFamily(String),
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("invalid speaker config: {0}")]
    InvalidSpeakers(String),
    #[error("record `{id}` is invalid: {violations:?}")]
    InvalidRecord { id: String, violations: Vec<Violation> },
    #[error("label `{label}` is not part of the `{family}` label set")]
    UnknownLabel { family: String, label: String },
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;
