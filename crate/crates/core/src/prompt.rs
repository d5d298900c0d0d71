//! Three-sentence generation prompts: task definition, label-number
//! mapping, and output structuring, concatenated into one prompt string.

use std::path::Path;

use thiserror::Error;

use crate::corpus::{Family, LabelSet, Mode, SpeakerConfig, SpeakerPolicy};
use crate::parser::FORMAT_LINE;

/// Version directory of the bundled template files.
pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("target label `{label}` is not in the `{family}` label set")]
    UnknownTarget { family: String, label: String },
    #[error("{mode} prompts {}", if *.needs_target { "require a target label" } else { "take no target label" })]
    TargetMismatch { mode: Mode, needs_target: bool },
    #[error("template `{name}` has unresolved placeholder `{placeholder}`")]
    Unresolved { name: String, placeholder: String },
    #[error("reading template {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub family_id: String,
    pub mode: Mode,
    pub target_label: Option<String>,
    pub labels: LabelSet,
    pub speakers: SpeakerConfig,
}

impl PromptSpec {
    pub fn natural(family: &Family) -> Self {
        Self {
            family_id: family.labels.family_id().to_string(),
            mode: Mode::Natural,
            target_label: None,
            labels: family.labels.clone(),
            speakers: family.speakers.clone(),
        }
    }

    pub fn balanced(family: &Family, target: &str) -> Result<Self, PromptError> {
        let spec = Self {
            family_id: family.labels.family_id().to_string(),
            mode: Mode::Balanced,
            target_label: Some(target.to_string()),
            labels: family.labels.clone(),
            speakers: family.speakers.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match (self.mode, &self.target_label) {
            (Mode::Natural, None) => Ok(()),
            (Mode::Balanced, Some(t)) if self.labels.contains(t) => Ok(()),
            (Mode::Balanced, Some(t)) => {
                Err(PromptError::UnknownTarget { family: self.family_id.clone(), label: t.clone() })
            }
            (mode, target) => Err(PromptError::TargetMismatch { mode, needs_target: target.is_none() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    /// Byte ranges of the task, labelling and structuring sentences.
    pub sentence_spans: [(usize, usize); 3],
}

impl PromptText {
    pub fn sentence(&self, i: usize) -> &str {
        let (s, e) = self.sentence_spans[i];
        &self.text[s..e]
    }
}

/// The four template files used for one family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub task: String,
    pub task_balanced: String,
    pub labelling: String,
    pub structuring: String,
}

macro_rules! bundled {
    ($family:literal) => {
        TemplateSet {
            task: include_str!(concat!("../templates/v1/", $family, "/task.txt")).to_string(),
            task_balanced: include_str!(concat!("../templates/v1/", $family, "/task_balanced.txt")).to_string(),
            labelling: include_str!(concat!("../templates/v1/", $family, "/labelling.txt")).to_string(),
            structuring: include_str!(concat!("../templates/v1/", $family, "/structuring.txt")).to_string(),
        }
    };
}

impl TemplateSet {
    /// Bundled templates; unknown families get the generic set.
    pub fn bundled(family_id: &str) -> Self {
        match family_id {
            "meld" => bundled!("meld"),
            "emorynlp" => bundled!("emorynlp"),
            "iemocap6" => bundled!("iemocap6"),
            _ => bundled!("default"),
        }
    }

    /// Bundled templates with any `<dir>/<family>/<name>.txt` files taking precedence.
    pub fn with_overrides(family_id: &str, dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::bundled(family_id);
        let slots: [(&str, &mut String); 4] = [
            ("task", &mut set.task),
            ("task_balanced", &mut set.task_balanced),
            ("labelling", &mut set.labelling),
            ("structuring", &mut set.structuring),
        ];
        for (name, slot) in slots {
            let path = dir.join(family_id).join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(&path)
                    .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
            }
        }
        Ok(set)
    }
}

fn render(name: &str, template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = template.trim().to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    if let Some(start) = out.find('{') {
        if let Some(len) = out[start..].find('}') {
            let placeholder = &out[start..=start + len];
            if placeholder[1..placeholder.len() - 1].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(PromptError::Unresolved { name: name.to_string(), placeholder: placeholder.to_string() });
            }
        }
    }
    Ok(out)
}

/// How the speakers are named in the task sentence.
pub fn speaker_phrase(speakers: &SpeakerConfig) -> String {
    match speakers.policy() {
        SpeakerPolicy::DyadicAnonymous => "a man and a woman".to_string(),
        SpeakerPolicy::Open => "two or more people".to_string(),
        SpeakerPolicy::ClosedCast => match speakers.cast() {
            [] => String::new(),
            [one] => one.clone(),
            [init @ .., last] => format!("{} and {last}", init.join(", ")),
        },
    }
}

/// `1: Neutral, 2: Disgust, ...` in label-set order.
pub fn label_map(labels: &LabelSet) -> String {
    labels.numbered().map(|(n, l)| format!("{n}: {l}")).collect::<Vec<_>>().join(", ")
}

pub fn build_prompt(spec: &PromptSpec) -> Result<PromptText, PromptError> {
    build_prompt_with(spec, &TemplateSet::bundled(&spec.family_id))
}

pub fn build_prompt_with(spec: &PromptSpec, templates: &TemplateSet) -> Result<PromptText, PromptError> {
    spec.validate()?;
    let speakers = speaker_phrase(&spec.speakers);
    let task = match &spec.target_label {
        None => render("task", &templates.task, &[("speakers", &speakers)])?,
        Some(target) => {
            render("task_balanced", &templates.task_balanced, &[("speakers", &speakers), ("target_label", target)])?
        }
    };
    let labelling = render("labelling", &templates.labelling, &[("label_map", &label_map(&spec.labels))])?;
    let structuring = render("structuring", &templates.structuring, &[("format_instructions", FORMAT_LINE)])?;

    let mut text = String::new();
    let mut spans = [(0, 0); 3];
    for (i, sentence) in [task, labelling, structuring].iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        let start = text.len();
        text.push_str(sentence);
        spans[i] = (start, text.len());
    }
    Ok(PromptText { text, sentence_spans: spans })
}

/// Balanced-mode specs cycling round-robin over the label set, `quota` rounds.
pub fn balanced_label_cycle(family: &Family, quota_per_label: usize) -> Vec<PromptSpec> {
    (0..quota_per_label)
        .flat_map(|_| family.labels.labels().iter())
        .map(|label| PromptSpec {
            family_id: family.labels.family_id().to_string(),
            mode: Mode::Balanced,
            target_label: Some(label.clone()),
            labels: family.labels.clone(),
            speakers: family.speakers.clone(),
        })
        .collect()
}
