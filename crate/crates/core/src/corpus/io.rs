use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{CorpusError, DialogueRecord, LabelSet, Result};

/// One line of a dataset file: either a decoded record or the decode error.
#[derive(Debug)]
pub struct RawLine {
    pub line: usize,
    pub record: std::result::Result<DialogueRecord, String>,
}

/// `dir/name.jsonl` + (`train`, `jsonl`) -> `dir/name.train.jsonl`.
pub fn tagged_path(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Writes one JSON object per line in the fixed record field order.
pub fn write_dataset(records: &[DialogueRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Decodes every non-blank line without checking label-set invariants.
pub fn read_dataset_unchecked(path: impl AsRef<Path>) -> Result<Vec<RawLine>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str::<DialogueRecord>(&line).map_err(|e| e.to_string());
        out.push(RawLine { line: i + 1, record });
    }
    Ok(out)
}

/// Reads a dataset file, failing on the first malformed or invalid line.
pub fn read_dataset(path: impl AsRef<Path>, labels: &LabelSet) -> Result<Vec<DialogueRecord>> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut records = Vec::new();
    for raw in read_dataset_unchecked(path)? {
        let record =
            raw.record.map_err(|message| CorpusError::Malformed { path: shown.clone(), line: raw.line, message })?;
        let violations = record.violations(labels);
        if !violations.is_empty() {
            return Err(CorpusError::Malformed {
                path: shown,
                line: raw.line,
                message: format!(
                    "record `{}`: {}",
                    record.id,
                    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
                ),
            });
        }
        records.push(record);
    }
    Ok(records)
}
