use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RankError, Result, Score};

/// Training regime of a model column: original data only, or pretrained on
/// a natural / balanced synthetic dataset first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Org,
    Nat,
    Bal,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Org => "Org",
            Regime::Nat => "Nat",
            Regime::Bal => "Bal",
        })
    }
}

impl FromStr for Regime {
    type Err = RankError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "org" | "original" => Ok(Regime::Org),
            "nat" | "natural" => Ok(Regime::Nat),
            "bal" | "balanced" => Ok(Regime::Bal),
            other => Err(RankError::Groups(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub architecture: String,
    pub regime: Regime,
}

/// Blocks (rows, test sets) × treatments (columns, model instances).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<T> {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    scores: Vec<T>,
    groups: Vec<ColumnGroup>,
}

fn unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    match ids.iter().find(|id| !seen.insert(id.as_str())) {
        Some(dup) => Err(RankError::Dimension(format!("duplicate {what} id `{dup}`"))),
        None => Ok(()),
    }
}

impl<T: Score> ScoreTable<T> {
    pub fn new(
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        rows: Vec<Vec<T>>,
        groups: Vec<ColumnGroup>,
    ) -> Result<Self> {
        let k = col_ids.len();
        if k < 2 {
            return Err(RankError::TooFewTreatments(k));
        }
        if row_ids.is_empty() {
            return Err(RankError::NoBlocks);
        }
        if rows.len() != row_ids.len() {
            return Err(RankError::Dimension(format!("{} row ids but {} rows", row_ids.len(), rows.len())));
        }
        if groups.len() != k {
            return Err(RankError::Dimension(format!("{k} columns but {} group entries", groups.len())));
        }
        unique(&row_ids, "row")?;
        unique(&col_ids, "column")?;
        let lo = T::from_u8(0).expect("0 is representable");
        let hi = T::from_u8(100).expect("100 is representable");
        let mut scores = Vec::with_capacity(k * rows.len());
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(RankError::Dimension(format!(
                    "row `{}` has {} cells, expected {k}",
                    row_ids[r],
                    row.len()
                )));
            }
            for (c, v) in row.into_iter().enumerate() {
                if !v.is_finite_score() {
                    return Err(RankError::NonFinite { row: r, col: c });
                }
                if v < lo || v > hi {
                    return Err(RankError::OutOfRange { row: r, col: c });
                }
                scores.push(v);
            }
        }
        Ok(Self { row_ids, col_ids, scores, groups })
    }

    /// Treatments (columns).
    pub fn k(&self) -> usize {
        self.col_ids.len()
    }

    /// Blocks (rows).
    pub fn n(&self) -> usize {
        self.row_ids.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn groups(&self) -> &[ColumnGroup] {
        &self.groups
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.scores[i * self.k()..(i + 1) * self.k()]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.scores.chunks(self.k())
    }

    /// Same table with columns reordered: `order[j]` is the old index of new column `j`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        let rows = self.rows().map(|r| order.iter().map(|&j| r[j]).collect()).collect();
        Self::new(
            self.row_ids.clone(),
            order.iter().map(|&j| self.col_ids[j].clone()).collect(),
            rows,
            order.iter().map(|&j| self.groups[j].clone()).collect(),
        )
    }

    /// Parses a score CSV (header = column ids, first column = row ids) and a
    /// group CSV with `column,architecture,regime` records.
    pub fn from_csv(scores_csv: &str, groups_csv: &str) -> Result<Self> {
        let parse_err = |path: &str, message: String| RankError::Parse { path: path.to_string(), message };

        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(scores_csv.as_bytes());
        let header = reader.headers().map_err(|e| parse_err("scores", e.to_string()))?.clone();
        let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_ids = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| parse_err("scores", e.to_string()))?;
            let mut cells = rec.iter();
            row_ids.push(cells.next().unwrap_or_default().to_string());
            let row = cells
                .map(|c| {
                    T::parse_score(c).ok_or_else(|| parse_err("scores", format!("row {}: bad score `{c}`", i + 2)))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }

        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(groups_csv.as_bytes());
        let mut groups: Vec<Option<ColumnGroup>> = vec![None; col_ids.len()];
        for rec in reader.records() {
            let rec = rec.map_err(|e| parse_err("groups", e.to_string()))?;
            if rec.len() != 3 {
                return Err(RankError::Groups(format!("expected 3 fields, got {}", rec.len())));
            }
            let col = col_ids
                .iter()
                .position(|c| c == &rec[0])
                .ok_or_else(|| RankError::Groups(format!("unknown column `{}`", &rec[0])))?;
            if groups[col].is_some() {
                return Err(RankError::Groups(format!("column `{}` listed twice", &rec[0])));
            }
            groups[col] = Some(ColumnGroup { architecture: rec[1].to_string(), regime: rec[2].parse()? });
        }
        let groups = groups
            .into_iter()
            .zip(&col_ids)
            .map(|(g, c)| g.ok_or_else(|| RankError::Groups(format!("column `{c}` has no group entry"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(row_ids, col_ids, rows, groups)
    }

    pub fn from_paths(scores: &Path, groups: &Path) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| RankError::Parse { path: p.display().to_string(), message: e.to_string() })
        };
        Self::from_csv(&read(scores)?, &read(groups)?)
    }
}
