//! Per-document-pair comparability measures computed from sentence
//! alignments: aligned-sentence ratio per side, Pearson correlation of
//! aligned sentence lengths, and Kendall's tau-b over aligned positions
//! (monotonicity).
//!
//! Undefined values are `None` and never coerced to zero.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::DocPair;
use crate::error::{Error, Result};
use crate::sentences::SentencePair;

pub const DEFAULT_ANALYSIS_THRESHOLD: f64 = 46.0;

/// `num_aligned / total_sentences`; `None` for a document without sentences.
pub fn align_ratio(num_aligned: usize, total_sentences: usize) -> Result<Option<f64>> {
    if num_aligned > total_sentences {
        return Err(Error::InvalidArgument(format!(
            "{num_aligned} aligned sentences out of {total_sentences}"
        )));
    }
    if total_sentences == 0 {
        return Ok(None);
    }
    Ok(Some(num_aligned as f64 / total_sentences as f64))
}

/// Pearson's r, single pass over running co-moments.
///
/// `None` for fewer than two observations or zero variance on either side.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson needs paired observations");
    if x.len() < 2 {
        return None;
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (k + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Sum of t(t-1)/2 over runs of equal keys in an already sorted sequence.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort by value, returning the number of inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
///
/// `None` for fewer than two observations or when either variable is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "kendall needs paired observations");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let x_ties = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let joint_ties = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let y_ties = tied_pairs(&ys, |a, b| a.partial_cmp(b) == Some(Ordering::Equal));

    let denom = ((n0 - x_ties) as f64) * ((n0 - y_ties) as f64);
    if denom == 0.0 {
        return None;
    }
    let numer = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    Some((numer / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Pearson r over the character lengths of aligned sentences.
pub fn sentence_length_correlation(pairs: &[SentencePair]) -> Option<f64> {
    let x: Vec<f64> = pairs.iter().map(|p| p.src.char_len as f64).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.tgt.char_len as f64).collect();
    pearson(&x, &y)
}

/// Kendall tau-b over aligned sentence positions.
pub fn monotonicity(pairs: &[SentencePair]) -> Option<f64> {
    let x: Vec<f64> = pairs.iter().map(|p| p.src.idx as f64).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.tgt.idx as f64).collect();
    kendall_tau_b(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub src_id: String,
    pub tgt_id: String,
    pub score: f64,
    pub align_ratio_src: Option<f64>,
    pub align_ratio_tgt: Option<f64>,
    pub length_corr: Option<f64>,
    pub monotonicity: Option<f64>,
    pub n_aligned: usize,
    pub src_sentences: usize,
    pub tgt_sentences: usize,
}

/// Metrics for one document pair from its (length-filtered) sentence pairs.
/// Only pairs scoring at least `analysis_threshold` count.
pub fn pair_metrics(
    pair: &DocPair,
    src_sentences: usize,
    tgt_sentences: usize,
    sentence_pairs: &[SentencePair],
    analysis_threshold: f64,
) -> Result<PairMetrics> {
    let used: Vec<SentencePair> = sentence_pairs
        .iter()
        .filter(|p| p.score >= analysis_threshold)
        .cloned()
        .collect();
    let src_aligned = used.iter().map(|p| p.src.idx).collect::<HashSet<_>>().len();
    let tgt_aligned = used.iter().map(|p| p.tgt.idx).collect::<HashSet<_>>().len();
    Ok(PairMetrics {
        src_id: pair.src_id.clone(),
        tgt_id: pair.tgt_id.clone(),
        score: pair.score,
        align_ratio_src: align_ratio(src_aligned, src_sentences)?,
        align_ratio_tgt: align_ratio(tgt_aligned, tgt_sentences)?,
        length_corr: sentence_length_correlation(&used),
        monotonicity: monotonicity(&used),
        n_aligned: used.len(),
        src_sentences,
        tgt_sentences,
    })
}

fn round6(x: Option<f64>) -> Option<f64> {
    x.map(|v| (v * 1e6).round() / 1e6)
}

impl PairMetrics {
    /// Copy with every float at fixed output precision.
    pub fn rounded(&self) -> PairMetrics {
        PairMetrics {
            score: crate::align::round4(self.score),
            align_ratio_src: round6(self.align_ratio_src),
            align_ratio_tgt: round6(self.align_ratio_tgt),
            length_corr: round6(self.length_corr),
            monotonicity: round6(self.monotonicity),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentences::Sentence;
    use chrono::NaiveDate;

    fn sp(
        src_idx: usize,
        src_len: usize,
        tgt_idx: usize,
        tgt_len: usize,
        score: f64,
    ) -> SentencePair {
        SentencePair {
            src: Sentence::new("d", src_idx, "x".repeat(src_len)),
            tgt: Sentence::new("f", tgt_idx, "y".repeat(tgt_len)),
            score,
        }
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(align_ratio(5, 20).unwrap(), Some(0.25));
        assert_eq!(align_ratio(0, 7).unwrap(), Some(0.0));
        assert_eq!(align_ratio(0, 0).unwrap(), None);
        assert!(align_ratio(3, 2).is_err());
    }

    #[test]
    fn length_correlation_examples() {
        let lin = [
            sp(0, 10, 0, 12, 60.0),
            sp(1, 20, 1, 24, 60.0),
            sp(2, 30, 2, 36, 60.0),
        ];
        assert!((sentence_length_correlation(&lin).unwrap() - 1.0).abs() < 1e-12);
        let inv = [sp(0, 10, 0, 20, 60.0), sp(1, 20, 1, 10, 60.0)];
        assert!((sentence_length_correlation(&inv).unwrap() + 1.0).abs() < 1e-12);
        let mixed = [
            sp(0, 10, 0, 15, 60.0),
            sp(1, 20, 1, 15, 60.0),
            sp(2, 30, 2, 30, 60.0),
        ];
        assert!((sentence_length_correlation(&mixed).unwrap() - 0.8660).abs() < 1e-4);
    }

    #[test]
    fn pearson_degenerate() {
        assert_eq!(pearson(&[1.0], &[2.0]), None);
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), None);
        assert_eq!(pearson(&[], &[]), None);
    }

    #[test]
    fn monotonicity_examples() {
        let same = [
            sp(0, 1, 0, 1, 60.0),
            sp(1, 1, 1, 1, 60.0),
            sp(2, 1, 2, 1, 60.0),
        ];
        assert!((monotonicity(&same).unwrap() - 1.0).abs() < 1e-12);
        let rev = [
            sp(0, 1, 2, 1, 60.0),
            sp(1, 1, 1, 1, 60.0),
            sp(2, 1, 0, 1, 60.0),
        ];
        assert!((monotonicity(&rev).unwrap() + 1.0).abs() < 1e-12);
        let one_swap = [
            sp(0, 1, 0, 1, 60.0),
            sp(1, 1, 2, 1, 60.0),
            sp(2, 1, 1, 1, 60.0),
        ];
        assert!((monotonicity(&one_swap).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(monotonicity(&same[..1]), None);
    }

    #[test]
    fn tau_b_with_ties() {
        // x = [1,2,2,3], y = [1,3,2,3]: C=4, D=0, one tie on each side
        let t = kendall_tau_b(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 3.0]).unwrap();
        assert!((t - 4.0 / 5.0).abs() < 1e-12, "{t}");
        assert_eq!(kendall_tau_b(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn metrics_respect_analysis_threshold() {
        let pair = DocPair {
            src_id: "d".into(),
            tgt_id: "f".into(),
            score: 84.05,
            date: NaiveDate::from_ymd_opt(2021, 11, 9).unwrap(),
        };
        let pairs = [
            sp(0, 40, 1, 44, 80.0),
            sp(2, 60, 0, 50, 70.0),
            sp(3, 35, 3, 30, 45.9),
        ];
        let m = pair_metrics(&pair, 4, 5, &pairs, 46.0).unwrap();
        assert_eq!(m.n_aligned, 2);
        assert_eq!(m.align_ratio_src, Some(0.5));
        assert_eq!(m.align_ratio_tgt, Some(0.4));
        assert!((m.monotonicity.unwrap() + 1.0).abs() < 1e-12);
        assert!((m.length_corr.unwrap() - 1.0).abs() < 1e-12);

        let lone = pair_metrics(&pair, 4, 5, &pairs[..1], 46.0).unwrap();
        assert_eq!(lone.length_corr, None);
        assert_eq!(lone.monotonicity, None);
        let none = pair_metrics(&pair, 0, 0, &[], 46.0).unwrap();
        assert_eq!(none.align_ratio_src, None);
    }
}
