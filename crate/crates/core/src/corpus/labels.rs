use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CorpusError, Result};

/// Families that ship with built-in label sets and speaker casts.
pub const BUILTIN_FAMILIES: [&str; 3] = ["meld", "emorynlp", "iemocap6"];

const MELD_LABELS: [&str; 7] = ["Neutral", "Disgust", "Anger", "Sadness", "Fear", "Joy", "Surprise"];
const EMORYNLP_LABELS: [&str; 7] = ["Sad", "Mad", "Scared", "Powerful", "Peaceful", "Joyful", "Neutral"];
const IEMOCAP6_LABELS: [&str; 6] = ["Neutral", "Happiness", "Sadness", "Anger", "Excited", "Frustration"];

const FRIENDS_CAST: [&str; 6] = ["Joey", "Ross", "Rachel", "Monica", "Chandler", "Phoebe"];
const DYADIC_CAST: [&str; 2] = ["Man", "Woman"];

/// Ordered emotion vocabulary. Label numbers are 1-based positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelSetRepr", into = "LabelSetRepr")]
pub struct LabelSet {
    family_id: String,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LabelSetRepr {
    family_id: String,
    labels: Vec<String>,
}

impl TryFrom<LabelSetRepr> for LabelSet {
    type Error = CorpusError;
    fn try_from(r: LabelSetRepr) -> Result<Self> {
        LabelSet::new(r.family_id, r.labels)
    }
}

impl From<LabelSet> for LabelSetRepr {
    fn from(l: LabelSet) -> Self {
        LabelSetRepr { family_id: l.family_id, labels: l.labels }
    }
}

impl LabelSet {
    pub fn new<S: Into<String>>(family_id: impl Into<String>, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let family_id = family_id.into();
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(CorpusError::InvalidLabelSet(format!(
                "`{family_id}` needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.trim().is_empty() {
                return Err(CorpusError::InvalidLabelSet(format!("`{family_id}` contains an empty label")));
            }
            if !seen.insert(label.as_str()) {
                return Err(CorpusError::InvalidLabelSet(format!("`{family_id}` repeats label `{label}`")));
            }
        }
        Ok(Self { family_id, labels })
    }

    pub fn family_id(&self) -> &str {
        &self.family_id
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// 1-based number of `label`.
    pub fn number_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    /// Label for a 1-based number.
    pub fn label_of(&self, number: usize) -> Option<&str> {
        number.checked_sub(1).and_then(|i| self.labels.get(i)).map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.number_of(label).is_some()
    }

    /// `(number, label)` pairs in listing order.
    pub fn numbered(&self) -> impl Iterator<Item = (usize, &str)> {
        self.labels.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()))
    }
}

/// Canonical label set of a built-in family, in the published listing order.
pub fn builtin_labelset(family_id: &str) -> Result<LabelSet> {
    let labels: &[&str] = match family_id {
        "meld" => &MELD_LABELS,
        "emorynlp" => &EMORYNLP_LABELS,
        "iemocap6" => &IEMOCAP6_LABELS,
        other => return Err(CorpusError::UnknownFamily(other.to_string())),
    };
    LabelSet::new(family_id, labels.iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeakerPolicy {
    /// Only the named cast may speak.
    ClosedCast,
    /// Two unnamed participants, a man and a woman.
    DyadicAnonymous,
    /// Any speaker name is accepted.
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerConfig {
    family_id: String,
    policy: SpeakerPolicy,
    cast: Vec<String>,
}

impl SpeakerConfig {
    pub fn new<S: Into<String>>(
        family_id: impl Into<String>,
        policy: SpeakerPolicy,
        cast: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let family_id = family_id.into();
        let cast: Vec<String> = cast.into_iter().map(Into::into).collect();
        match policy {
            SpeakerPolicy::DyadicAnonymous if cast.len() != 2 => {
                return Err(CorpusError::InvalidSpeakers(format!(
                    "dyadic-anonymous cast for `{family_id}` must have exactly 2 entries, got {}",
                    cast.len()
                )))
            }
            SpeakerPolicy::ClosedCast if cast.len() < 2 => {
                return Err(CorpusError::InvalidSpeakers(format!(
                    "closed cast for `{family_id}` must have at least 2 entries, got {}",
                    cast.len()
                )))
            }
            _ => {}
        }
        if cast.iter().any(|c| c.trim().is_empty()) {
            return Err(CorpusError::InvalidSpeakers(format!("`{family_id}` cast contains an empty name")));
        }
        Ok(Self { family_id, policy, cast })
    }

    pub fn family_id(&self) -> &str {
        &self.family_id
    }

    pub fn policy(&self) -> SpeakerPolicy {
        self.policy
    }

    pub fn cast(&self) -> &[String] {
        &self.cast
    }
}

pub fn builtin_speakers(family_id: &str) -> Result<SpeakerConfig> {
    match family_id {
        "meld" | "emorynlp" => SpeakerConfig::new(family_id, SpeakerPolicy::ClosedCast, FRIENDS_CAST),
        "iemocap6" => SpeakerConfig::new(family_id, SpeakerPolicy::DyadicAnonymous, DYADIC_CAST),
        other => Err(CorpusError::UnknownFamily(other.to_string())),
    }
}

/// A dataset family: its label vocabulary together with who speaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    pub labels: LabelSet,
    pub speakers: SpeakerConfig,
}

/// User-registrable family definition, as read from configuration.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct FamilyDef {
    pub labels: Vec<String>,
    pub policy: SpeakerPolicy,
    #[serde(default)]
    pub cast: Vec<String>,
}

/// Built-in families plus any registered by the user.
#[derive(Debug, Clone, Default)]
pub struct FamilyRegistry {
    custom: BTreeMap<String, Family>,
}

impl FamilyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers (or replaces) a family. Built-in ids may be overridden.
    pub fn register(&mut self, family_id: &str, def: FamilyDef) -> Result<()> {
        let labels = LabelSet::new(family_id, def.labels)?;
        let speakers = SpeakerConfig::new(family_id, def.policy, def.cast)?;
        self.custom.insert(family_id.to_string(), Family { labels, speakers });
        Ok(())
    }

    pub fn get(&self, family_id: &str) -> Result<Family> {
        if let Some(f) = self.custom.get(family_id) {
            return Ok(f.clone());
        }
        Ok(Family { labels: builtin_labelset(family_id)?, speakers: builtin_speakers(family_id)? })
    }

    pub fn family_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = BUILTIN_FAMILIES.iter().map(|s| s.to_string()).collect();
        for id in self.custom.keys() {
            if !ids.contains(id) {
                ids.push(id.clone());
            }
        }
        ids
    }
}
