//! Greedy alignment strategies over a similarity matrix.
//!
//! Rows are language A (German in the default profile), columns language B
//! (French). Every strategy keeps only cells scoring at least the threshold.
//!
//! | strategy          | keeps                                         |
//! |-------------------|-----------------------------------------------|
//! | `above-threshold` | every cell                                    |
//! | `best-target`     | per column, the best row (`best-fr`)          |
//! | `best-source`     | per row, the best column (`best-de`)          |
//! | `union`           | best-source ∪ best-target                     |
//! | `intersection`    | mutual best matches, 1:1                      |
//!
//! Argmax ties go to the lowest index.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocPair;
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    AboveThreshold,
    /// Each column picks its best row.
    #[serde(alias = "best-fr")]
    BestTarget,
    /// Each row picks its best column.
    #[serde(alias = "best-de")]
    BestSource,
    Union,
    Intersection,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::AboveThreshold,
        Strategy::BestTarget,
        Strategy::BestSource,
        Strategy::Union,
        Strategy::Intersection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::AboveThreshold => "above-threshold",
            Strategy::BestTarget => "best-target",
            Strategy::BestSource => "best-source",
            Strategy::Union => "union",
            Strategy::Intersection => "intersection",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "above-threshold" | "above_threshold" | "threshold" => Strategy::AboveThreshold,
            "best-target" | "best-fr" | "bestfr" => Strategy::BestTarget,
            "best-source" | "best-de" | "bestde" => Strategy::BestSource,
            "union" => Strategy::Union,
            "intersection" | "mutual" => Strategy::Intersection,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown strategy `{s}` (expected above-threshold, best-source, best-target, union or intersection)"
                )))
            }
        })
    }
}

/// One selected matrix cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Best column for every row.
pub fn row_argmax(m: &SimilarityMatrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| argmax(m.row(i).iter().copied()).expect("matrix has columns"))
        .collect()
}

/// Best row for every column.
pub fn col_argmax(m: &SimilarityMatrix) -> Vec<usize> {
    (0..m.cols())
        .map(|j| argmax((0..m.rows()).map(|i| m.get(i, j))).expect("matrix has rows"))
        .collect()
}

/// Cells selected by `strategy` at `threshold`, ordered by (row, col).
pub fn align_cells(m: &SimilarityMatrix, threshold: f64, strategy: Strategy) -> Vec<Cell> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let cell = |row, col| Cell {
        row,
        col,
        score: m.get(row, col),
    };
    let mut cells: Vec<Cell> = match strategy {
        Strategy::AboveThreshold => (0..m.rows())
            .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
            .map(|(i, j)| cell(i, j))
            .collect(),
        Strategy::BestSource => row_argmax(m)
            .into_iter()
            .enumerate()
            .map(|(i, j)| cell(i, j))
            .collect(),
        Strategy::BestTarget => col_argmax(m)
            .into_iter()
            .enumerate()
            .map(|(j, i)| cell(i, j))
            .collect(),
        Strategy::Union => {
            let mut v: Vec<Cell> = row_argmax(m)
                .into_iter()
                .enumerate()
                .map(|(i, j)| cell(i, j))
                .collect();
            v.extend(
                col_argmax(m)
                    .into_iter()
                    .enumerate()
                    .map(|(j, i)| cell(i, j)),
            );
            v
        }
        Strategy::Intersection => {
            let cols = col_argmax(m);
            row_argmax(m)
                .into_iter()
                .enumerate()
                .filter(|&(i, j)| cols[j] == i)
                .map(|(i, j)| cell(i, j))
                .collect()
        }
    };
    cells.retain(|c| c.score >= threshold);
    cells.sort_by_key(|c| (c.row, c.col));
    cells.dedup_by_key(|c| (c.row, c.col));
    cells
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=100.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside [0, 100]"
        )))
    }
}

/// Document pairs produced by one strategy at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<DocPair>,
    pub strategy: Strategy,
    pub threshold: f64,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn records(&self) -> Vec<AlignmentRecord> {
        self.pairs
            .iter()
            .map(|p| AlignmentRecord::new(p, self.strategy, self.threshold))
            .collect()
    }
}

pub fn align(m: &SimilarityMatrix, threshold: f64, strategy: Strategy) -> Result<PairSet> {
    check_threshold(threshold)?;
    let pairs = align_cells(m, threshold, strategy)
        .into_iter()
        .map(|c| DocPair {
            src_id: m.row_ids[c.row].clone(),
            tgt_id: m.col_ids[c.col].clone(),
            score: c.score,
            date: m.date,
        })
        .collect();
    Ok(PairSet {
        pairs,
        strategy,
        threshold,
    })
}

/// Aligns every matrix independently and concatenates the results in input order.
pub fn align_all(
    matrices: &[SimilarityMatrix],
    threshold: f64,
    strategy: Strategy,
) -> Result<PairSet> {
    check_threshold(threshold)?;
    let parts: Vec<PairSet> = matrices
        .par_iter()
        .map(|m| align(m, threshold, strategy))
        .collect::<Result<_>>()?;
    Ok(PairSet {
        pairs: parts.into_iter().flat_map(|p| p.pairs).collect(),
        strategy,
        threshold,
    })
}

/// Rounds a score to the 4 decimals used in every output file.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// One line of `alignments.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub src_id: String,
    pub tgt_id: String,
    pub score: f64,
    pub strategy: Strategy,
    pub threshold: f64,
    pub date: chrono::NaiveDate,
}

impl AlignmentRecord {
    pub fn new(p: &DocPair, strategy: Strategy, threshold: f64) -> Self {
        AlignmentRecord {
            src_id: p.src_id.clone(),
            tgt_id: p.tgt_id.clone(),
            score: round4(p.score),
            strategy,
            threshold,
            date: p.date,
        }
    }

    pub fn doc_pair(&self) -> DocPair {
        DocPair {
            src_id: self.src_id.clone(),
            tgt_id: self.tgt_id.clone(),
            score: self.score,
            date: self.date,
        }
    }
}
