use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LabelSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Natural,
    Balanced,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Natural => "natural",
            Mode::Balanced => "balanced",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "natural" | "nat" => Ok(Mode::Natural),
            "balanced" | "bal" => Ok(Mode::Balanced),
            other => Err(format!("unknown mode `{other}` (expected natural or balanced)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub utterance: String,
    pub label: String,
    pub label_number: usize,
}

/// One generated conversation. Field order here is the on-disk field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub id: String,
    pub family_id: String,
    pub mode: Mode,
    pub target_label: Option<String>,
    pub seed: u64,
    pub raw_hash: String,
    pub turns: Vec<Turn>,
}

/// A single broken invariant on a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    TooFewTurns(usize),
    FamilyMismatch { expected: String, found: String },
    EmptyUtterance { turn: usize },
    LabelNumberOutOfRange { turn: usize, number: usize },
    LabelMismatch { turn: usize, label: String, number: usize },
    TargetPresence { mode: Mode, has_target: bool },
    UnknownTarget(String),
    TargetMissingFromTurns(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewTurns(n) => write!(f, "dialogue has {n} turn(s), at least 2 required"),
            Violation::FamilyMismatch { expected, found } => {
                write!(f, "family `{found}` does not match label set `{expected}`")
            }
            Violation::EmptyUtterance { turn } => write!(f, "turn {turn}: empty utterance"),
            Violation::LabelNumberOutOfRange { turn, number } => {
                write!(f, "turn {turn}: label number {number} out of range")
            }
            Violation::LabelMismatch { turn, label, number } => {
                write!(f, "turn {turn}: label `{label}` does not correspond to number {number}")
            }
            Violation::TargetPresence { mode, has_target } => {
                write!(f, "{mode} record {} a target label", if *has_target { "must not have" } else { "must have" })
            }
            Violation::UnknownTarget(t) => write!(f, "target label `{t}` is not in the label set"),
            Violation::TargetMissingFromTurns(t) => write!(f, "no turn carries target label `{t}`"),
        }
    }
}

impl DialogueRecord {
    /// Checks every record invariant against `labels`; empty means valid.
    pub fn violations(&self, labels: &LabelSet) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.family_id != labels.family_id() {
            out.push(Violation::FamilyMismatch {
                expected: labels.family_id().to_string(),
                found: self.family_id.clone(),
            });
        }
        if self.turns.len() < 2 {
            out.push(Violation::TooFewTurns(self.turns.len()));
        }
        for (i, t) in self.turns.iter().enumerate() {
            if t.utterance.trim().is_empty() {
                out.push(Violation::EmptyUtterance { turn: i });
            }
            match labels.label_of(t.label_number) {
                None => out.push(Violation::LabelNumberOutOfRange { turn: i, number: t.label_number }),
                Some(l) if l != t.label => {
                    out.push(Violation::LabelMismatch { turn: i, label: t.label.clone(), number: t.label_number })
                }
                Some(_) => {}
            }
        }
        match (self.mode, &self.target_label) {
            (Mode::Natural, Some(_)) => out.push(Violation::TargetPresence { mode: self.mode, has_target: true }),
            (Mode::Balanced, None) => out.push(Violation::TargetPresence { mode: self.mode, has_target: false }),
            (Mode::Balanced, Some(target)) => {
                if !labels.contains(target) {
                    out.push(Violation::UnknownTarget(target.clone()));
                } else if !self.contains_label(target) {
                    out.push(Violation::TargetMissingFromTurns(target.clone()));
                }
            }
            (Mode::Natural, None) => {}
        }
        out
    }

    pub fn is_valid(&self, labels: &LabelSet) -> bool {
        self.violations(labels).is_empty()
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.turns.iter().any(|t| t.label == label)
    }
}

/// Hex SHA-256 of raw completion text.
pub fn content_hash(raw: &str) -> String {
    hex::encode(Sha256::digest(raw.as_bytes()))
}
