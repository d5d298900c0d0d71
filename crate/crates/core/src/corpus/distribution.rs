use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DialogueRecord, LabelSet, Result};

/// Per-label utterance counts, keyed in label-set order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub counts: IndexMap<String, u64>,
    pub total_utterances: u64,
}

impl LabelDistribution {
    pub fn empty(labels: &LabelSet) -> Self {
        Self { counts: labels.labels().iter().map(|l| (l.clone(), 0)).collect(), total_utterances: 0 }
    }

    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    /// Component-wise sum; both sides must share the same label keys.
    pub fn merged(&self, other: &Self) -> Self {
        let mut counts = self.counts.clone();
        for (label, c) in &other.counts {
            *counts.entry(label.clone()).or_insert(0) += c;
        }
        Self { counts, total_utterances: self.total_utterances + other.total_utterances }
    }

    /// Two-column `label count` table.
    pub fn to_table(&self) -> String {
        let width = self.counts.keys().map(|l| l.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>8}\n", "label", "count");
        for (label, c) in &self.counts {
            let _ = writeln!(out, "{label:<width$}  {c:>8}");
        }
        let _ = writeln!(out, "{:<width$}  {:>8}", "total", self.total_utterances);
        out
    }

    /// CSV of `label,count,log10_count_plus_1` for log-scale plotting.
    pub fn to_log_histogram_csv(&self) -> String {
        let mut out = String::from("label,count,log10_count_plus_1\n");
        for (label, c) in &self.counts {
            let _ = writeln!(out, "{label},{c},{:.6}", ((*c as f64) + 1.0).log10());
        }
        out
    }
}

/// Counts every turn's label. Labels outside `labels` indicate corruption.
pub fn label_distribution(records: &[DialogueRecord], labels: &LabelSet) -> Result<LabelDistribution> {
    let mut dist = LabelDistribution::empty(labels);
    for record in records {
        for turn in &record.turns {
            let slot = dist.counts.get_mut(&turn.label).ok_or_else(|| CorpusError::UnknownLabel {
                family: labels.family_id().to_string(),
                label: turn.label.clone(),
            })?;
            *slot += 1;
            dist.total_utterances += 1;
        }
    }
    Ok(dist)
}
