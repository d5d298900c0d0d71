#![allow(dead_code)]

use dialsynth::corpus::{builtin_labelset, builtin_speakers, content_hash, DialogueRecord, Mode, Turn};
use dialsynth::parser::canonicalize;
use proptest::prelude::*;

pub const FAMILIES: [&str; 3] = ["meld", "emorynlp", "iemocap6"];

fn utterance() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ,.!?'|\\\\\n:-]{1,40}".prop_map(|s| s.trim().to_string()).prop_filter("non-empty", |s| !s.is_empty())
}

pub fn turns(family: &'static str) -> impl Strategy<Value = Vec<Turn>> {
    let labels = builtin_labelset(family).unwrap();
    let cast = builtin_speakers(family).unwrap().cast().to_vec();
    let n_labels = labels.size();
    let turn = (0..cast.len(), utterance(), 1..=n_labels).prop_map(move |(s, utterance, number)| Turn {
        speaker: cast[s].clone(),
        utterance,
        label: labels.label_of(number).unwrap().to_string(),
        label_number: number,
    });
    proptest::collection::vec(turn, 2..9)
}

/// A valid record of `family`; balanced ones target a label they contain.
pub fn record(family: &'static str) -> impl Strategy<Value = DialogueRecord> {
    (turns(family), any::<bool>(), any::<u64>(), any::<prop::sample::Index>(), 0u32..100000).prop_map(
        move |(turns, balanced, seed, pick, n)| {
            let mut r = DialogueRecord {
                id: format!("{family}-{n:06}"),
                family_id: family.to_string(),
                mode: if balanced { Mode::Balanced } else { Mode::Natural },
                target_label: balanced.then(|| turns[pick.index(turns.len())].label.clone()),
                seed,
                raw_hash: String::new(),
                turns,
            };
            r.raw_hash = content_hash(&canonicalize(&r));
            r
        },
    )
}

pub fn any_family_record() -> impl Strategy<Value = DialogueRecord> {
    prop_oneof![record("meld"), record("emorynlp"), record("iemocap6")]
}

/// Non-empty records with unique ids.
pub fn dataset(family: &'static str, max: usize) -> impl Strategy<Value = Vec<DialogueRecord>> {
    proptest::collection::vec(record(family), 1..max).prop_map(|mut rs| {
        for (i, r) in rs.iter_mut().enumerate() {
            r.id = format!("{}-{i:06}", r.family_id);
        }
        rs
    })
}
