//! Removal of faulty document pairs after alignment: scraped error pages and
//! articles that appear verbatim (same language) on both sides.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocPair, Document};
use crate::embedding::build_alignment_text;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanupConfig {
    /// Minimum score for the identical-text check; `None` disables it.
    pub suspicious_score: Option<f64>,
    pub same_language_check: bool,
    /// Trigram-profile cosine above which both sides count as the same language.
    pub same_language_overlap: f64,
    /// Case-insensitive snippets marking scraped error pages.
    pub error_markers: Vec<String>,
}

impl Default for CleanupConfig {
    fn default() -> Self {
        CleanupConfig {
            suspicious_score: Some(99.5),
            same_language_check: true,
            same_language_overlap: 0.9,
            error_markers: Vec::new(),
        }
    }
}

impl CleanupConfig {
    /// A configuration that keeps every pair.
    pub fn disabled() -> Self {
        CleanupConfig {
            suspicious_score: None,
            same_language_check: false,
            same_language_overlap: 0.9,
            error_markers: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.suspicious_score {
            if !(0.0..=100.0).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "suspicious_score {s} outside [0, 100]"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.same_language_overlap) {
            return Err(Error::InvalidArgument(
                "same_language_overlap must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalReason {
    IdenticalText,
    ErrorMarker,
    SameLanguage,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::IdenticalText => "identical-text",
            RemovalReason::ErrorMarker => "error-marker",
            RemovalReason::SameLanguage => "same-language",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    #[serde(flatten)]
    pub pair: DocPair,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleanupOutcome {
    pub kept: Vec<DocPair>,
    pub removed: Vec<Removal>,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn full_text(d: &Document) -> String {
    format!("{} {} {}", d.title, d.lead, d.content)
}

fn trigram_profile(text: &str) -> HashMap<[char; 3], u32> {
    let chars: Vec<char> = normalize_ws(&text.to_lowercase()).chars().collect();
    let mut profile = HashMap::new();
    for w in chars.windows(3) {
        *profile.entry([w[0], w[1], w[2]]).or_insert(0) += 1;
    }
    profile
}

/// Cosine between character-trigram count vectors, in [0, 1].
pub fn trigram_overlap(a: &str, b: &str) -> f64 {
    let (pa, pb) = (trigram_profile(a), trigram_profile(b));
    if pa.is_empty() || pb.is_empty() {
        return 0.0;
    }
    let dot: f64 = pa
        .iter()
        .filter_map(|(k, &x)| pb.get(k).map(|&y| f64::from(x) * f64::from(y)))
        .sum();
    let na: f64 = pa
        .values()
        .map(|&x| f64::from(x).powi(2))
        .sum::<f64>()
        .sqrt();
    let nb: f64 = pb
        .values()
        .map(|&x| f64::from(x).powi(2))
        .sum::<f64>()
        .sqrt();
    (dot / (na * nb)).min(1.0)
}

fn judge(
    pair: &DocPair,
    a: &Document,
    b: &Document,
    config: &CleanupConfig,
    markers: &[String],
) -> Option<RemovalReason> {
    if let Some(min) = config.suspicious_score {
        if pair.score >= min {
            let ta = build_alignment_text(a).map(|t| normalize_ws(&t)).ok();
            let tb = build_alignment_text(b).map(|t| normalize_ws(&t)).ok();
            if ta.is_some() && ta == tb {
                return Some(RemovalReason::IdenticalText);
            }
        }
    }
    if !markers.is_empty() {
        let hit = |d: &Document| {
            let text = full_text(d).to_lowercase();
            markers.iter().any(|m| text.contains(m.as_str()))
        };
        if hit(a) || hit(b) {
            return Some(RemovalReason::ErrorMarker);
        }
    }
    if config.same_language_check
        && trigram_overlap(&full_text(a), &full_text(b)) > config.same_language_overlap
    {
        return Some(RemovalReason::SameLanguage);
    }
    None
}

/// Splits `pairs` into kept and removed, preserving input order in both.
pub fn filter_faulty_pairs(
    pairs: &[DocPair],
    corpus: &Corpus,
    config: &CleanupConfig,
) -> Result<CleanupOutcome> {
    config.validate()?;
    let markers: Vec<String> = config
        .error_markers
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.to_lowercase())
        .collect();
    let verdicts: Vec<Option<RemovalReason>> = pairs
        .par_iter()
        .map(|p| {
            let a = corpus.resolve(&p.src_id)?;
            let b = corpus.resolve(&p.tgt_id)?;
            Ok(judge(p, a, b, config, &markers))
        })
        .collect::<Result<_>>()?;
    let mut out = CleanupOutcome::default();
    for (p, v) in pairs.iter().zip(verdicts) {
        match v {
            Some(reason) => out.removed.push(Removal {
                pair: p.clone(),
                reason,
            }),
            None => out.kept.push(p.clone()),
        }
    }
    Ok(out)
}
