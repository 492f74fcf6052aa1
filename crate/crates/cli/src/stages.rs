use std::collections::{BTreeSet, HashMap};

use anyhow::Result;
use rayon::prelude::*;
use xdalign::align::{align_all, AlignmentRecord, Strategy};
use xdalign::corpus::{Corpus, DocPair, GoldSet};
use xdalign::embedding::{build_alignment_text, Embedder, EmbeddingMatrix, TextUnit};
use xdalign::metrics::{pair_metrics, PairMetrics};
use xdalign::report::{top_k, TokenCounter};
use xdalign::sentences::{
    align_sentences, filter_short_pairs_with, segment_sentences, sentence_units, MinCharsRule,
    RuleSegmenter, Sentence, SentenceAlignmentRecord, SentencePair,
};
use xdalign::similarity::SimilarityMatrix;
use xdalign::tune::{sweep_threshold, SweepResult};

use crate::config::TokenCounterKind;

pub struct Whitespace;

impl TokenCounter for Whitespace {
    fn count(&self, text: &str, _lang: &str) -> usize {
        text.split_whitespace().count()
    }
}

pub fn token_counter(kind: Option<TokenCounterKind>) -> Option<&'static dyn TokenCounter> {
    kind.map(|k| match k {
        TokenCounterKind::Whitespace => &Whitespace as &dyn TokenCounter,
    })
}

pub fn document_units(corpus: &Corpus) -> Result<Vec<TextUnit>> {
    corpus
        .documents()
        .iter()
        .map(|d| Ok(TextUnit::new(d.id.clone(), build_alignment_text(d)?)))
        .collect()
}

/// Sentences of every document taking part in `pairs`, keyed by document id.
pub fn sentence_table(
    corpus: &Corpus,
    pairs: &[DocPair],
    segmenter: &RuleSegmenter,
) -> Result<HashMap<String, Vec<Sentence>>> {
    let ids: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|p| [p.src_id.as_str(), p.tgt_id.as_str()])
        .collect();
    ids.into_iter()
        .map(|id| {
            Ok((
                id.to_string(),
                segment_sentences(corpus.resolve(id)?, segmenter),
            ))
        })
        .collect()
}

/// Sentence units in a stable order (pair order, source side first).
pub fn ordered_sentence_units(
    pairs: &[DocPair],
    table: &HashMap<String, Vec<Sentence>>,
) -> Vec<TextUnit> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in pairs {
        for id in [&p.src_id, &p.tgt_id] {
            if seen.insert(id.as_str()) {
                out.extend(sentence_units(&table[id.as_str()]));
            }
        }
    }
    out
}

pub fn embed_sentences(embedder: &Embedder, units: &[TextUnit]) -> Result<Option<EmbeddingMatrix>> {
    if units.is_empty() {
        return Ok(None);
    }
    Ok(Some(embedder.embed(units)?))
}

/// Rounds scores the way they are written so that in-memory and
/// file-based runs agree exactly.
pub fn as_written(pairs: &[DocPair], strategy: Strategy, threshold: f64) -> Vec<AlignmentRecord> {
    pairs
        .iter()
        .map(|p| AlignmentRecord::new(p, strategy, threshold))
        .collect()
}

pub fn align_documents(
    matrices: &[SimilarityMatrix],
    threshold: f64,
    strategy: Strategy,
) -> Result<Vec<AlignmentRecord>> {
    Ok(align_all(matrices, threshold, strategy)?.records())
}

/// Matrices whose date holds at least one gold pair.
pub fn gold_matrices(
    matrices: &[SimilarityMatrix],
    gold: &GoldSet,
    corpus: &Corpus,
) -> Result<Vec<SimilarityMatrix>> {
    gold.check_against(corpus)?;
    let dates: BTreeSet<_> = gold
        .ids()
        .map(|id| corpus.resolve(id).map(|d| d.publish_date))
        .collect::<xdalign::Result<_>>()?;
    Ok(matrices
        .iter()
        .filter(|m| dates.contains(&m.date))
        .cloned()
        .collect())
}

pub fn tune_all(
    matrices: &[SimilarityMatrix],
    gold: &GoldSet,
    strategies: &[Strategy],
) -> Result<Vec<SweepResult>> {
    strategies
        .iter()
        .map(|&s| Ok(sweep_threshold(matrices, gold, s)?))
        .collect()
}

pub fn select_top(pairs: &[DocPair], k: usize) -> Vec<DocPair> {
    top_k(pairs, k)
}

/// Aligns, then length-filters, the sentences of every pair. Output keeps pair order.
pub fn align_all_sentences(
    pairs: &[DocPair],
    table: &HashMap<String, Vec<Sentence>>,
    vectors: Option<&EmbeddingMatrix>,
    min_chars: usize,
    rule: MinCharsRule,
) -> Result<Vec<Vec<SentencePair>>> {
    let Some(vectors) = vectors else {
        return Ok(vec![Vec::new(); pairs.len()]);
    };
    pairs
        .par_iter()
        .map(|p| {
            let aligned = align_sentences(p, &table[&p.src_id], &table[&p.tgt_id], vectors)?;
            Ok(filter_short_pairs_with(aligned, min_chars, rule))
        })
        .collect()
}

pub fn sentence_records(per_pair: &[Vec<SentencePair>]) -> Vec<SentenceAlignmentRecord> {
    per_pair
        .iter()
        .flatten()
        .map(SentenceAlignmentRecord::from)
        .collect()
}

pub fn all_metrics(
    pairs: &[DocPair],
    table: &HashMap<String, Vec<Sentence>>,
    per_pair: &[Vec<SentencePair>],
    analysis_threshold: f64,
) -> Result<Vec<PairMetrics>> {
    pairs
        .iter()
        .zip(per_pair)
        .map(|(p, sp)| {
            let m = pair_metrics(
                p,
                table[&p.src_id].len(),
                table[&p.tgt_id].len(),
                sp,
                analysis_threshold,
            )?;
            Ok(m.rounded())
        })
        .collect()
}

/// Groups sentence records back by document pair, in the order of `pairs`.
pub fn group_sentence_records(
    pairs: &[DocPair],
    records: &[SentenceAlignmentRecord],
) -> Vec<Vec<SentencePair>> {
    let mut by_pair: HashMap<(&str, &str), Vec<SentencePair>> = HashMap::new();
    for r in records {
        by_pair
            .entry((r.src_doc.as_str(), r.tgt_doc.as_str()))
            .or_default()
            .push(r.to_pair());
    }
    pairs
        .iter()
        .map(|p| by_pair.remove(&p.key()).unwrap_or_default())
        .collect()
}
