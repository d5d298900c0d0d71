//! End-to-end generation jobs over a [`Gateway`].
//!
//! Completions may arrive in any order; acceptance, deduplication and quota
//! bookkeeping happen afterwards in slot order, so a job's output depends
//! only on its spec and the endpoint's answers.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tagged_path, write_dataset, DialogueRecord, Family, Mode};
use crate::gateway::{derive_seed, CompletionBackend, CompletionRequest, Gateway, SamplingParams};
use crate::parser::{detect_repetition, parse_dialogue, Provenance};
use crate::prompt::{balanced_label_cycle, build_prompt_with, PromptError, PromptSpec, TemplateSet};

pub const DEFAULT_OVER_GENERATION: f64 = 1.5;
pub const DEFAULT_MAX_RETRIES_PER_SLOT: u32 = 3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid job: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobSize {
    /// Natural mode: this many valid dialogues.
    Count(usize),
    /// Balanced mode: this many dialogues per target label.
    QuotaPerLabel(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJobSpec {
    pub family_id: String,
    pub size: JobSize,
    /// Slots issued per requested dialogue in natural mode.
    pub over_generation_factor: f64,
    /// Extra attempts for a balanced slot that failed parsing or lacked its target.
    pub max_retries_per_slot: u32,
    pub base_seed: u64,
    pub params: SamplingParams,
    pub max_in_flight: usize,
}

impl GenerationJobSpec {
    pub fn natural(family_id: &str, count: usize, base_seed: u64) -> Self {
        Self {
            family_id: family_id.to_string(),
            size: JobSize::Count(count),
            over_generation_factor: DEFAULT_OVER_GENERATION,
            max_retries_per_slot: DEFAULT_MAX_RETRIES_PER_SLOT,
            base_seed,
            params: SamplingParams::default(),
            max_in_flight: 4,
        }
    }

    pub fn balanced(family_id: &str, quota_per_label: usize, base_seed: u64) -> Self {
        Self { size: JobSize::QuotaPerLabel(quota_per_label), ..Self::natural(family_id, 0, base_seed) }
    }

    pub fn mode(&self) -> Mode {
        match self.size {
            JobSize::Count(_) => Mode::Natural,
            JobSize::QuotaPerLabel(_) => Mode::Balanced,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.over_generation_factor >= 1.0 && self.over_generation_factor.is_finite()) {
            return bad(format!("over-generation factor must be >= 1, got {}", self.over_generation_factor));
        }
        match self.size {
            JobSize::Count(0) => return bad("count must be at least 1".into()),
            JobSize::QuotaPerLabel(0) => return bad("quota per label must be at least 1".into()),
            _ => {}
        }
        if self.max_in_flight == 0 {
            return bad("max in flight must be at least 1".into());
        }
        self.params.validate().map_err(|e| SynthError::InvalidSpec(e.to_string()))
    }

    /// Natural-mode slot count: ceil(count · factor).
    pub fn natural_slots(&self) -> usize {
        match self.size {
            JobSize::Count(n) => (n as f64 * self.over_generation_factor - 1e-9).ceil().max(n as f64) as usize,
            JobSize::QuotaPerLabel(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobReport {
    pub family_id: String,
    pub mode: Mode,
    pub status: JobStatus,
    pub requested: usize,
    pub attempts: usize,
    pub generated_valid: usize,
    pub surplus: usize,
    pub rejected_parse: usize,
    pub rejected_missing_target: usize,
    pub rejected_repetition: usize,
    pub rejected_duplicate: usize,
    pub failed_completion: usize,
    pub retries_used: usize,
    /// Balanced mode only: accepted dialogues per target label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fulfillment: Option<IndexMap<String, usize>>,
}

impl JobReport {
    fn new(family_id: &str, mode: Mode, requested: usize) -> Self {
        Self {
            family_id: family_id.to_string(),
            mode,
            status: JobStatus::Complete,
            requested,
            attempts: 0,
            generated_valid: 0,
            surplus: 0,
            rejected_parse: 0,
            rejected_missing_target: 0,
            rejected_repetition: 0,
            rejected_duplicate: 0,
            failed_completion: 0,
            retries_used: 0,
            fulfillment: None,
        }
    }

    pub fn rejections(&self) -> usize {
        self.rejected_parse
            + self.rejected_missing_target
            + self.rejected_repetition
            + self.rejected_duplicate
            + self.failed_completion
    }

    /// Every attempt is either a valid dialogue or exactly one rejection.
    pub fn is_conserved(&self) -> bool {
        self.generated_valid + self.rejections() == self.attempts
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "job: {} {} ({:?})", self.family_id, self.mode, self.status);
        for (k, v) in [
            ("requested", self.requested),
            ("attempts", self.attempts),
            ("generated valid", self.generated_valid),
            ("surplus", self.surplus),
            ("rejected: parse", self.rejected_parse),
            ("rejected: missing target", self.rejected_missing_target),
            ("rejected: repetition", self.rejected_repetition),
            ("rejected: duplicate", self.rejected_duplicate),
            ("failed completions", self.failed_completion),
            ("retries used", self.retries_used),
        ] {
            let _ = writeln!(s, "  {k:<26}{v:>8}");
        }
        if let Some(f) = &self.fulfillment {
            let _ = writeln!(s, "  fulfillment per label:");
            for (label, n) in f {
                let _ = writeln!(s, "    {label:<24}{n:>8}");
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Repetition,
    Duplicate,
}

/// Per-job filter for degenerate repetition and duplicate completions.
#[derive(Debug, Default)]
pub struct QualityFilter {
    seen: HashSet<String>,
}

impl QualityFilter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepting a record remembers its raw hash for later duplicate checks.
    pub fn check(&mut self, record: &DialogueRecord) -> Result<(), RejectReason> {
        if detect_repetition(&record.turns).is_some() {
            return Err(RejectReason::Repetition);
        }
        if !self.seen.insert(record.raw_hash.clone()) {
            return Err(RejectReason::Duplicate);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub records: Vec<DialogueRecord>,
    /// Valid natural-mode dialogues beyond the requested count.
    pub surplus: Vec<DialogueRecord>,
    pub report: JobReport,
}

/// Ids of balanced records that lack their target label.
pub fn verify_balanced(records: &[DialogueRecord]) -> Vec<String> {
    records
        .iter()
        .filter(|r| match (&r.mode, &r.target_label) {
            (Mode::Balanced, Some(t)) => !r.contains_label(t),
            (Mode::Balanced, None) => true,
            _ => false,
        })
        .map(|r| r.id.clone())
        .collect()
}

enum SlotOutcome {
    Accepted(DialogueRecord),
    Rejected,
}

pub struct Synthesizer<B> {
    gateway: Gateway<B>,
    family: Family,
    templates: TemplateSet,
}

impl<B: CompletionBackend> Synthesizer<B> {
    pub fn new(gateway: Gateway<B>, family: Family) -> Self {
        let templates = TemplateSet::bundled(family.labels.family_id());
        Self { gateway, family, templates }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn gateway(&self) -> &Gateway<B> {
        &self.gateway
    }

    fn check_spec(&self, spec: &GenerationJobSpec, mode: Mode) -> Result<(), SynthError> {
        spec.validate()?;
        if spec.mode() != mode {
            return Err(SynthError::InvalidSpec(format!("expected a {mode} job, got {}", spec.mode())));
        }
        if spec.family_id != self.family.labels.family_id() {
            return Err(SynthError::InvalidSpec(format!(
                "job family `{}` does not match synthesizer family `{}`",
                spec.family_id,
                self.family.labels.family_id()
            )));
        }
        Ok(())
    }

    /// Classifies one completion, updating the report counters.
    fn judge(
        &self,
        completion: Result<String, ()>,
        provenance: Provenance,
        filter: &mut QualityFilter,
        report: &mut JobReport,
    ) -> SlotOutcome {
        report.attempts += 1;
        let Ok(text) = completion else {
            report.failed_completion += 1;
            return SlotOutcome::Rejected;
        };
        let target = provenance.target_label.clone();
        let outcome = parse_dialogue(&text, &self.family.labels, &self.family.speakers);
        let Some(record) = outcome.into_record(provenance) else {
            report.rejected_parse += 1;
            return SlotOutcome::Rejected;
        };
        if let Some(t) = &target {
            if !record.contains_label(t) {
                report.rejected_missing_target += 1;
                return SlotOutcome::Rejected;
            }
        }
        match filter.check(&record) {
            Err(RejectReason::Repetition) => {
                report.rejected_repetition += 1;
                SlotOutcome::Rejected
            }
            Err(RejectReason::Duplicate) => {
                report.rejected_duplicate += 1;
                SlotOutcome::Rejected
            }
            Ok(()) => {
                report.generated_valid += 1;
                SlotOutcome::Accepted(record)
            }
        }
    }

    async fn complete_all(&self, requests: &[CompletionRequest], max_in_flight: usize) -> Vec<Result<String, ()>> {
        self.gateway
            .complete_batch(requests, max_in_flight)
            .await
            .into_iter()
            .map(|r| {
                r.map(|c| c.text).map_err(|e| {
                    log::warn!("completion failed: {e}");
                })
            })
            .collect()
    }

    pub async fn run_natural_job(&self, spec: &GenerationJobSpec) -> Result<JobOutput, SynthError> {
        self.check_spec(spec, Mode::Natural)?;
        let JobSize::Count(count) = spec.size else { unreachable!("checked natural") };
        let family_id = self.family.labels.family_id();
        let prompt = build_prompt_with(&PromptSpec::natural(&self.family), &self.templates)?;
        let slots = spec.natural_slots();
        let seeds: Vec<u64> = (0..slots as u64).map(|i| derive_seed(spec.base_seed, i)).collect();
        let requests: Vec<_> =
            seeds.iter().map(|&s| CompletionRequest::new(prompt.text.clone(), spec.params.with_seed(s))).collect();
        let completions = self.complete_all(&requests, spec.max_in_flight).await;

        let mut report = JobReport::new(family_id, Mode::Natural, count);
        let mut filter = QualityFilter::new();
        let mut records = Vec::new();
        let mut surplus = Vec::new();
        for (slot, completion) in completions.into_iter().enumerate() {
            let provenance = Provenance {
                id: format!("{family_id}-nat-{slot:06}"),
                family_id: family_id.to_string(),
                mode: Mode::Natural,
                target_label: None,
                seed: seeds[slot],
            };
            if let SlotOutcome::Accepted(r) = self.judge(completion, provenance, &mut filter, &mut report) {
                if records.len() < count {
                    records.push(r);
                } else {
                    surplus.push(r);
                }
            }
        }
        report.surplus = surplus.len();
        if records.len() < count {
            report.status = JobStatus::Partial;
        }
        Ok(JobOutput { records, surplus, report })
    }

    pub async fn run_balanced_job(&self, spec: &GenerationJobSpec) -> Result<JobOutput, SynthError> {
        self.check_spec(spec, Mode::Balanced)?;
        let JobSize::QuotaPerLabel(quota) = spec.size else { unreachable!("checked balanced") };
        let family_id = self.family.labels.family_id();
        let cycle = balanced_label_cycle(&self.family, quota);
        let prompts: Vec<String> =
            cycle.iter().map(|s| build_prompt_with(s, &self.templates).map(|p| p.text)).collect::<Result<_, _>>()?;
        let n_slots = cycle.len();

        let mut report = JobReport::new(family_id, Mode::Balanced, n_slots);
        let mut filter = QualityFilter::new();
        let mut filled: Vec<Option<DialogueRecord>> = vec![None; n_slots];
        let mut open: Vec<usize> = (0..n_slots).collect();

        for round in 0..=spec.max_retries_per_slot as usize {
            if open.is_empty() {
                break;
            }
            if round > 0 {
                report.retries_used += open.len();
            }
            let seeds: Vec<u64> =
                open.iter().map(|&slot| derive_seed(spec.base_seed, (round * n_slots + slot) as u64)).collect();
            let requests: Vec<_> = open
                .iter()
                .zip(&seeds)
                .map(|(&slot, &seed)| CompletionRequest::new(prompts[slot].clone(), spec.params.with_seed(seed)))
                .collect();
            let completions = self.complete_all(&requests, spec.max_in_flight).await;
            let mut still_open = Vec::new();
            for ((&slot, &seed), completion) in open.iter().zip(&seeds).zip(completions) {
                let provenance = Provenance {
                    id: format!("{family_id}-bal-{slot:06}"),
                    family_id: family_id.to_string(),
                    mode: Mode::Balanced,
                    target_label: cycle[slot].target_label.clone(),
                    seed,
                };
                match self.judge(completion, provenance, &mut filter, &mut report) {
                    SlotOutcome::Accepted(r) => filled[slot] = Some(r),
                    SlotOutcome::Rejected => still_open.push(slot),
                }
            }
            open = still_open;
        }

        let mut fulfillment: IndexMap<String, usize> =
            self.family.labels.labels().iter().map(|l| (l.clone(), 0)).collect();
        let records: Vec<DialogueRecord> = filled.into_iter().flatten().collect();
        for r in &records {
            if let Some(t) = &r.target_label {
                *fulfillment.entry(t.clone()).or_insert(0) += 1;
            }
        }
        if fulfillment.values().any(|&n| n < quota) {
            report.status = JobStatus::Partial;
        }
        report.fulfillment = Some(fulfillment);
        Ok(JobOutput { records, surplus: Vec::new(), report })
    }

    pub async fn run(&self, spec: &GenerationJobSpec) -> Result<JobOutput, SynthError> {
        match spec.mode() {
            Mode::Natural => self.run_natural_job(spec).await,
            Mode::Balanced => self.run_balanced_job(spec).await,
        }
    }
}

/// Writes the dataset plus `.surplus.jsonl`, `.report.json` and `.report.txt` sidecars.
pub fn write_job_output(output: &JobOutput, path: &Path) -> Result<(), SynthError> {
    write_dataset(&output.records, path)?;
    if !output.surplus.is_empty() {
        write_dataset(&output.surplus, tagged_path(path, "surplus", "jsonl"))?;
    }
    let json = serde_json::to_string_pretty(&output.report).map_err(std::io::Error::other)?;
    std::fs::write(tagged_path(path, "report", "json"), json + "\n")?;
    std::fs::write(tagged_path(path, "report", "txt"), output.report.to_text())?;
    Ok(())
}
