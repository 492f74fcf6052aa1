//! Precision/recall/F1 against a gold set and the threshold sweep that
//! picks the F1-maximizing threshold on a 0.5-step grid over [0, 100].

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::align::{align_cells, Strategy};
use crate::corpus::{unordered_key, DocPair, GoldSet};
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

pub const GRID_STEP: f64 = 0.5;
pub const GRID_POINTS: usize = 201;

/// The sweep grid 0, 0.5, ..., 100.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (0..GRID_POINTS).map(|k| k as f64 * GRID_STEP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl EvalMetrics {
    /// Metrics from raw counts; a zero denominator yields 0.
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EvalMetrics {
            precision,
            recall,
            f1,
            true_positives,
            predicted,
            gold,
        }
    }
}

/// Compares predicted pairs to gold on unordered id tuples; scores are ignored.
pub fn precision_recall_f1(predicted: &[DocPair], gold: &GoldSet) -> EvalMetrics {
    let gold_keys: HashSet<(String, String)> = gold
        .pairs()
        .iter()
        .map(|(a, b)| unordered_key(a, b))
        .collect();
    let predicted_keys: HashSet<(String, String)> = predicted
        .iter()
        .map(|p| unordered_key(&p.src_id, &p.tgt_id))
        .collect();
    let tp = predicted_keys.intersection(&gold_keys).count();
    EvalMetrics::from_counts(tp, predicted_keys.len(), gold_keys.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub strategy: Strategy,
    pub best_threshold: f64,
    pub best_f1: f64,
    pub curve: Vec<(f64, EvalMetrics)>,
}

impl SweepResult {
    pub fn best(&self) -> &EvalMetrics {
        &self
            .curve
            .iter()
            .find(|(t, _)| *t == self.best_threshold)
            .expect("best threshold is on the curve")
            .1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall,f1\n");
        for (t, m) in &self.curve {
            out.push_str(&format!(
                "{t:.1},{:.6},{:.6},{:.6}\n",
                m.precision, m.recall, m.f1
            ));
        }
        out
    }
}

/// Sweeps the grid over all matrices pooled. F1 ties go to the highest threshold.
pub fn sweep_threshold(
    matrices: &[SimilarityMatrix],
    gold: &GoldSet,
    strategy: Strategy,
) -> Result<SweepResult> {
    if gold.is_empty() {
        return Err(Error::Gold("cannot tune against an empty gold set".into()));
    }
    let gold_keys: HashSet<(String, String)> = gold
        .pairs()
        .iter()
        .map(|(a, b)| unordered_key(a, b))
        .collect();

    // Candidate selection is threshold-free; the threshold only filters.
    let candidates: Vec<(f64, bool)> = matrices
        .iter()
        .flat_map(|m| {
            align_cells(m, f64::NEG_INFINITY, strategy)
                .into_iter()
                .map(|c| {
                    let key = unordered_key(&m.row_ids[c.row], &m.col_ids[c.col]);
                    (c.score, gold_keys.contains(&key))
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let curve: Vec<(f64, EvalMetrics)> = threshold_grid()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|t| {
            let (mut predicted, mut tp) = (0, 0);
            for &(score, hit) in &candidates {
                if score >= t {
                    predicted += 1;
                    tp += usize::from(hit);
                }
            }
            (t, EvalMetrics::from_counts(tp, predicted, gold_keys.len()))
        })
        .collect();

    let (best_threshold, best_f1) = curve.iter().fold((0.0, f64::NEG_INFINITY), |best, (t, m)| {
        if m.f1 >= best.1 {
            (*t, m.f1)
        } else {
            best
        }
    });
    Ok(SweepResult {
        strategy,
        best_threshold,
        best_f1,
        curve,
    })
}
