//! Tolerant reader and strict writer for the tagged turn grammar.
//!
//! ```text
//! dialogue  = { line } ;
//! line      = turn-line | field-line | other-line ;
//! turn-line = [ bullet ] field { "|" field } ;      (* all three tags present *)
//! field-line= [ bullet ] field { "|" field } ;      (* a subset of the tags *)
//! field     = tag ws* ( ":" | "-" ) value ;
//! tag       = "Speaker" | "Utterance" | "Number" ;  (* ASCII case-insensitive *)
//! value     = { char | "\|" | "\\" | "\n" } ;      (* a "|" not followed by a tag is content *)
//! bullet    = ( "-" | "*" | "•" | digit+ ( "." | ")" ) ) ws+ ;
//! ```
//!
//! Fields of one turn may be spread over consecutive field lines. Lines
//! without a tag are skipped and never split or merge turns.
//!
//! Canonical output is one `Speaker: <name> | Utterance: <text> | Number: <k>`
//! line per turn, with `\`, `|` and newlines escaped.

use serde::Serialize;

use crate::corpus::{content_hash, DialogueRecord, LabelSet, Mode, SpeakerConfig, SpeakerPolicy, Turn};

/// Layout requested from the generator, quoted inside the structuring sentence.
pub const FORMAT_LINE: &str = "Speaker: <name> | Utterance: <utterance> | Number: <number>";

const MIN_TURNS: usize = 2;
const REPEAT_RUN: usize = 3;
const DOMINANT_TOKEN_SHARE: f64 = 0.6;
const DOMINANT_TOKEN_MIN_TOKENS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IssueKind {
    MissingField,
    UnknownLabelNumber,
    EmptyUtterance,
    UnknownSpeaker,
    NoTurnsFound,
    DuplicateField,
    TrailingGarbage,
    DegenerateRepetition,
}

impl IssueKind {
    /// Fatal kinds reject the turn they occur in, and with it the dialogue.
    pub fn is_fatal(self) -> bool {
        !matches!(self, IssueKind::TrailingGarbage | IssueKind::DegenerateRepetition)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseIssue {
    pub kind: IssueKind,
    /// 1-based line number, 0 when the issue concerns the whole text.
    pub line: usize,
    pub excerpt: String,
}

/// Result of reading one completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    /// Turns that passed every check, in order.
    pub turns: Vec<Turn>,
    pub issues: Vec<ParseIssue>,
    pub raw_hash: String,
}

/// Generation metadata attached when a parsed dialogue becomes a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub id: String,
    pub family_id: String,
    pub mode: Mode,
    pub target_label: Option<String>,
    pub seed: u64,
}

impl ParseOutcome {
    pub fn has_fatal(&self) -> bool {
        self.issues.iter().any(|i| i.kind.is_fatal())
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    /// A record is produced only from a clean dialogue of at least two turns.
    pub fn is_accepted(&self) -> bool {
        self.turns.len() >= MIN_TURNS && !self.has_fatal()
    }

    pub fn into_record(self, provenance: Provenance) -> Option<DialogueRecord> {
        if !self.is_accepted() {
            return None;
        }
        Some(DialogueRecord {
            id: provenance.id,
            family_id: provenance.family_id,
            mode: provenance.mode,
            target_label: provenance.target_label,
            seed: provenance.seed,
            raw_hash: self.raw_hash,
            turns: self.turns,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Speaker,
    Utterance,
    Number,
}

const TAGS: [(&str, Tag); 3] = [("speaker", Tag::Speaker), ("utterance", Tag::Utterance), ("number", Tag::Number)];

/// Matches `tag ws* (":"|"-")` at the start of `s`; returns the tag and the
/// remainder after the separator.
fn match_tag(s: &str) -> Option<(Tag, &str)> {
    for (name, tag) in TAGS {
        let Some(head) = s.as_bytes().get(..name.len()) else { continue };
        if !head.eq_ignore_ascii_case(name.as_bytes()) {
            continue;
        }
        let rest = s[name.len()..].trim_start_matches([' ', '\t']);
        if let Some(r) = rest.strip_prefix(':').or_else(|| rest.strip_prefix('-')) {
            return Some((tag, r));
        }
    }
    None
}

fn strip_bullet(line: &str) -> &str {
    let s = line.trim_start();
    for b in ["- ", "* ", "• "] {
        if let Some(r) = s.strip_prefix(b) {
            return r.trim_start();
        }
    }
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let r = &s[digits..];
        if let Some(r) = r.strip_prefix(". ").or_else(|| r.strip_prefix(") ")) {
            return r.trim_start();
        }
    }
    s
}

/// Splits a line into tagged raw values. `None` when the line carries no tag.
fn split_fields(line: &str) -> Option<Vec<(Tag, &str)>> {
    let (first, mut rest) = match_tag(strip_bullet(line))?;
    let mut fields = Vec::new();
    let mut tag = first;
    loop {
        let mut end = rest.len();
        let mut next = None;
        let mut chars = rest.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    chars.next();
                }
                '|' => {
                    if let Some(found) = match_tag(rest[i + 1..].trim_start()) {
                        end = i;
                        next = Some(found);
                        break;
                    }
                }
                _ => {}
            }
        }
        fields.push((tag, &rest[..end]));
        match next {
            Some((t, r)) => {
                tag = t;
                rest = r;
            }
            None => return Some(fields),
        }
    }
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('|') => out.push('|'),
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn excerpt(line: &str) -> String {
    line.trim().chars().take(80).collect()
}

#[derive(Default)]
struct Pending {
    speaker: Option<String>,
    utterance: Option<String>,
    number: Option<String>,
    line: usize,
    text: String,
}

impl Pending {
    fn is_empty(&self) -> bool {
        self.speaker.is_none() && self.utterance.is_none() && self.number.is_none()
    }

    fn is_complete(&self) -> bool {
        self.speaker.is_some() && self.utterance.is_some() && self.number.is_some()
    }

    fn slot(&mut self, tag: Tag) -> &mut Option<String> {
        match tag {
            Tag::Speaker => &mut self.speaker,
            Tag::Utterance => &mut self.utterance,
            Tag::Number => &mut self.number,
        }
    }
}

struct Reader<'a> {
    labels: &'a LabelSet,
    speakers: &'a SpeakerConfig,
    turns: Vec<Turn>,
    turn_lines: Vec<usize>,
    issues: Vec<ParseIssue>,
}

impl Reader<'_> {
    fn issue(&mut self, kind: IssueKind, line: usize, text: &str) {
        self.issues.push(ParseIssue { kind, line, excerpt: excerpt(text) });
    }

    /// Drops an incomplete pending turn, recording what it was missing.
    fn abandon(&mut self, pending: &mut Pending) {
        if !pending.is_empty() {
            let p = std::mem::take(pending);
            self.issue(IssueKind::MissingField, p.line, &p.text);
        }
    }

    fn finish(&mut self, p: Pending) {
        let mut ok = true;
        let speaker = p.speaker.unwrap_or_default();
        let speaker = if speaker.is_empty() {
            self.issue(IssueKind::MissingField, p.line, &p.text);
            ok = false;
            speaker
        } else {
            match self.normalize_speaker(&speaker) {
                Some(s) => s,
                None => {
                    self.issue(IssueKind::UnknownSpeaker, p.line, &p.text);
                    ok = false;
                    speaker
                }
            }
        };
        let utterance = p.utterance.unwrap_or_default();
        if utterance.trim().is_empty() {
            self.issue(IssueKind::EmptyUtterance, p.line, &p.text);
            ok = false;
        }
        let raw_number = p.number.unwrap_or_default();
        let digits: String = raw_number.chars().take_while(char::is_ascii_digit).collect();
        let number = digits.parse::<usize>().ok();
        let label = number.and_then(|n| self.labels.label_of(n));
        if raw_number.is_empty() {
            self.issue(IssueKind::MissingField, p.line, &p.text);
            ok = false;
        } else if label.is_none() {
            self.issue(IssueKind::UnknownLabelNumber, p.line, &p.text);
            ok = false;
        }
        if let (true, Some(n), Some(label)) = (ok, number, label) {
            self.turns.push(Turn { speaker, utterance, label: label.to_string(), label_number: n });
            self.turn_lines.push(p.line);
        }
    }

    fn normalize_speaker(&self, raw: &str) -> Option<String> {
        let cast = self.speakers.cast();
        let by_cast = || cast.iter().find(|c| c.eq_ignore_ascii_case(raw)).cloned();
        match self.speakers.policy() {
            SpeakerPolicy::Open => Some(raw.to_string()),
            SpeakerPolicy::ClosedCast => by_cast(),
            SpeakerPolicy::DyadicAnonymous => by_cast().or_else(|| {
                let key = raw.trim_end_matches(['.', ':']).to_ascii_lowercase();
                match key.as_str() {
                    "man" | "male" | "m" | "speaker a" => cast.first().cloned(),
                    "woman" | "female" | "f" | "speaker b" => cast.get(1).cloned(),
                    _ => None,
                }
            }),
        }
    }
}

/// Reads a completion into turns plus a list of issues. Never panics.
pub fn parse_dialogue(raw: &str, labels: &LabelSet, speakers: &SpeakerConfig) -> ParseOutcome {
    let mut r = Reader { labels, speakers, turns: Vec::new(), turn_lines: Vec::new(), issues: Vec::new() };
    let mut pending = Pending::default();
    let mut last_field_line = 0;
    let mut trailing: Option<(usize, &str)> = None;

    for (idx, line) in raw.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(fields) = split_fields(line) else {
            if last_field_line > 0 && trailing.is_none() {
                trailing = Some((lineno, line));
            }
            continue;
        };
        last_field_line = lineno;
        trailing = None;

        let mut seen = [false; 3];
        if fields.iter().any(|(t, _)| std::mem::replace(&mut seen[*t as usize], true)) {
            r.abandon(&mut pending);
            r.issue(IssueKind::DuplicateField, lineno, line);
            continue;
        }
        let complete_line = seen.iter().all(|&s| s);
        let overlaps = fields.iter().any(|(t, _)| pending.slot(*t).is_some());
        if complete_line || overlaps {
            r.abandon(&mut pending);
        }
        if pending.is_empty() {
            pending.line = lineno;
            pending.text.clear();
        }
        if !pending.text.is_empty() {
            pending.text.push(' ');
        }
        pending.text.push_str(line.trim());
        for (tag, value) in fields {
            *pending.slot(tag) = Some(unescape(value.trim()));
        }
        if pending.is_complete() {
            r.finish(std::mem::take(&mut pending));
        }
    }
    r.abandon(&mut pending);

    if let Some((line, text)) = trailing {
        r.issue(IssueKind::TrailingGarbage, line, text);
    }
    if r.turns.len() < MIN_TURNS {
        let msg = format!("found {} complete turn(s)", r.turns.len());
        r.issue(IssueKind::NoTurnsFound, 0, &msg);
    }
    if let Some(i) = detect_repetition(&r.turns) {
        let line = r.turn_lines[i];
        let text = r.turns[i].utterance.clone();
        r.issue(IssueKind::DegenerateRepetition, line, &text);
    }
    r.issues.sort_by_key(|i| i.line);
    ParseOutcome { turns: r.turns, issues: r.issues, raw_hash: content_hash(raw) }
}

fn normalize_utterance(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Index of the first turn showing degenerate repetition: the same normalized
/// utterance three times in a row, or one token making up more than 60% of a
/// turn of at least five tokens.
pub fn detect_repetition(turns: &[Turn]) -> Option<usize> {
    let norm: Vec<String> = turns.iter().map(|t| normalize_utterance(&t.utterance)).collect();
    let mut run = 1;
    for i in 1..norm.len() {
        run = if norm[i] == norm[i - 1] { run + 1 } else { 1 };
        if run >= REPEAT_RUN {
            return Some(i);
        }
    }
    norm.iter().position(|u| {
        let tokens: Vec<&str> =
            u.split(' ').map(|t| t.trim_matches(|c: char| !c.is_alphanumeric())).filter(|t| !t.is_empty()).collect();
        if tokens.len() < DOMINANT_TOKEN_MIN_TOKENS {
            return false;
        }
        let mut counts = std::collections::HashMap::new();
        for t in &tokens {
            *counts.entry(*t).or_insert(0usize) += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        top as f64 > DOMINANT_TOKEN_SHARE * tokens.len() as f64
    })
}

pub fn canonical_turn(turn: &Turn) -> String {
    format!(
        "Speaker: {} | Utterance: {} | Number: {}",
        escape(&turn.speaker),
        escape(&turn.utterance),
        turn.label_number
    )
}

/// Renders a record in the canonical one-line-per-turn grammar.
pub fn canonicalize(record: &DialogueRecord) -> String {
    record.turns.iter().map(canonical_turn).collect::<Vec<_>>().join("\n")
}
