//! Sentence segmentation and mutual-best sentence alignment inside aligned
//! document pairs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::align::{align_cells, Strategy};
use crate::corpus::{DocPair, Document};
use crate::embedding::{EmbeddingMatrix, TextUnit};
use crate::error::Result;
use crate::similarity::{similarity_matrix, DateBucket};

/// Sentence pairs are aligned without a score floor; the analysis
/// threshold is applied later so the release keeps weak pairs too.
pub const SENTENCE_ALIGN_THRESHOLD: f64 = 0.0;

pub const DEFAULT_MIN_CHARS: usize = 30;

pub trait Segmenter: Send + Sync {
    /// Splits `text` into trimmed, non-empty sentences in reading order.
    fn split<'a>(&self, text: &'a str, lang: &str) -> Vec<&'a str>;
}

const DE_ABBREVIATIONS: &[&str] = &[
    "Abs", "Art", "Bd", "bzw", "ca", "Chr", "d.h", "Dr", "evtl", "exkl", "Fr", "Frl", "gegr",
    "ggf", "Hr", "Hrn", "i.d.R", "inkl", "Jh", "Jhd", "Kap", "Mio", "Mrd", "Mt", "Nr", "o.ä",
    "Prof", "resp", "S", "sog", "St", "Str", "u.a", "u.ä", "usw", "vgl", "z.B", "z.T", "zB", "zit",
    "Jan", "Feb", "Febr", "Aug", "Sept", "Okt", "Nov", "Dez", "etc",
];

const FR_ABBREVIATIONS: &[&str] = &[
    "M", "MM", "Mme", "Mmes", "Mlle", "Mlles", "Dr", "Pr", "Me", "Mgr", "St", "Ste", "cf", "env",
    "av", "apr", "J.-C", "n°", "No", "vol", "chap", "p", "fr", "Fr", "mio", "mrd", "janv", "févr",
    "avr", "juil", "sept", "oct", "nov", "déc", "etc", "ex", "resp", "art", "al", "éd",
];

const DE_MONTHS: &[&str] = &[
    "Januar",
    "Jänner",
    "Februar",
    "März",
    "April",
    "Mai",
    "Juni",
    "Juli",
    "August",
    "September",
    "Oktober",
    "November",
    "Dezember",
];

const TERMINALS: &[char] = &['.', '!', '?', '…'];
const CLOSERS: &[char] = &['"', '”', '’', '\'', '»', ')', ']'];
const OPENERS: &[char] = &['"', '“', '„', '«', '‹', '(', '[', '–', '—', '-', '\''];

/// Terminal-punctuation splitter with per-language abbreviation lists.
///
/// A boundary is a run of `. ! ? …`, optionally followed by closing quotes
/// or brackets, then whitespace, then an uppercase letter, a digit or an
/// opening quote. A single period does not split after a listed
/// abbreviation, an uppercase initial, or a day number followed by a month
/// name ("13. November").
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: HashMap<String, HashSet<String>>,
    fallback: HashSet<String>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        let mut abbreviations = HashMap::new();
        abbreviations.insert("de".to_string(), set(DE_ABBREVIATIONS));
        abbreviations.insert("fr".to_string(), set(FR_ABBREVIATIONS));
        let fallback = DE_ABBREVIATIONS
            .iter()
            .chain(FR_ABBREVIATIONS)
            .map(|s| s.to_string())
            .collect();
        RuleSegmenter {
            abbreviations,
            fallback,
        }
    }
}

fn set(words: &[&str]) -> HashSet<String> {
    words.iter().map(|s| s.to_string()).collect()
}

impl RuleSegmenter {
    /// Adds abbreviations (without the trailing period) for `lang`.
    pub fn with_abbreviations<I, S>(mut self, lang: &str, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entry = self.abbreviations.entry(lang.to_string()).or_default();
        for w in words {
            let w = w.into();
            self.fallback.insert(w.clone());
            entry.insert(w);
        }
        self
    }

    fn is_abbreviation(&self, token: &str, lang: &str) -> bool {
        let list = self.abbreviations.get(lang).unwrap_or(&self.fallback);
        list.contains(token)
    }

    fn suppresses_split(&self, before: &str, after: &str, lang: &str) -> bool {
        let token = before
            .rsplit(|c: char| c.is_whitespace() || OPENERS.contains(&c))
            .next()
            .unwrap_or("");
        if token.is_empty() {
            return false;
        }
        if self.is_abbreviation(token, lang) {
            return true;
        }
        let mut chars = token.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if c.is_uppercase() {
                return true;
            }
        }
        if token.chars().all(|c| c.is_ascii_digit()) && token.len() <= 2 {
            let next = after.split_whitespace().next().unwrap_or("");
            let next = next.trim_end_matches(|c: char| !c.is_alphabetic());
            if DE_MONTHS.contains(&next) {
                return true;
            }
        }
        false
    }
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || OPENERS.contains(&c)
}

impl Segmenter for RuleSegmenter {
    fn split<'a>(&self, text: &'a str, lang: &str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if !TERMINALS.contains(&c) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < chars.len() && TERMINALS.contains(&chars[j].1) {
                j += 1;
            }
            let single_period = c == '.' && j - i == 1;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = if k == chars.len() {
                true
            } else {
                k > j && starts_sentence(chars[k].1)
            };
            let suppressed =
                single_period && self.suppresses_split(&text[start..pos], &text[end..], lang);
            if boundary && !suppressed {
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
            i = j.max(i + 1);
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            out.push(tail);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub idx: usize,
    pub text: String,
    pub char_len: usize,
}

impl Sentence {
    pub fn new(doc_id: impl Into<String>, idx: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        Sentence {
            doc_id: doc_id.into(),
            idx,
            char_len: text.chars().count(),
            text,
        }
    }

    /// Id under which this sentence's vector is stored.
    pub fn unit_id(&self) -> String {
        sentence_unit_id(&self.doc_id, self.idx)
    }
}

pub fn sentence_unit_id(doc_id: &str, idx: usize) -> String {
    format!("{doc_id}#{idx}")
}

pub fn segment_sentences(doc: &Document, segmenter: &dyn Segmenter) -> Vec<Sentence> {
    segmenter
        .split(&doc.content, &doc.lang)
        .into_iter()
        .enumerate()
        .map(|(i, s)| Sentence::new(doc.id.clone(), i, s))
        .collect()
}

pub fn sentence_units(sentences: &[Sentence]) -> Vec<TextUnit> {
    sentences
        .iter()
        .map(|s| TextUnit::new(s.unit_id(), s.text.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub src: Sentence,
    pub tgt: Sentence,
    pub score: f64,
}

/// Mutual-best sentence pairs for one aligned document pair.
pub fn align_sentences(
    pair: &DocPair,
    src: &[Sentence],
    tgt: &[Sentence],
    vectors: &EmbeddingMatrix,
) -> Result<Vec<SentencePair>> {
    if src.is_empty() || tgt.is_empty() {
        return Ok(Vec::new());
    }
    let bucket = DateBucket {
        date: pair.date,
        a_ids: src.iter().map(Sentence::unit_id).collect(),
        b_ids: tgt.iter().map(Sentence::unit_id).collect(),
    };
    let m = similarity_matrix(&bucket, vectors)?;
    Ok(
        align_cells(&m, SENTENCE_ALIGN_THRESHOLD, Strategy::Intersection)
            .into_iter()
            .map(|c| SentencePair {
                src: src[c.row].clone(),
                tgt: tgt[c.col].clone(),
                score: c.score,
            })
            .collect(),
    )
}

/// How the minimum-length rule is applied to a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinCharsRule {
    /// Both sentences need at least `min_chars` characters.
    #[default]
    EachSide,
    /// The two sentences together need at least `min_chars` characters.
    Combined,
}

pub fn filter_short_pairs(pairs: Vec<SentencePair>, min_chars: usize) -> Vec<SentencePair> {
    filter_short_pairs_with(pairs, min_chars, MinCharsRule::EachSide)
}

pub fn filter_short_pairs_with(
    pairs: Vec<SentencePair>,
    min_chars: usize,
    rule: MinCharsRule,
) -> Vec<SentencePair> {
    pairs
        .into_iter()
        .filter(|p| match rule {
            MinCharsRule::EachSide => p.src.char_len >= min_chars && p.tgt.char_len >= min_chars,
            MinCharsRule::Combined => p.src.char_len + p.tgt.char_len >= min_chars,
        })
        .collect()
}

/// One line of `sentence_alignments.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAlignmentRecord {
    pub src_doc: String,
    pub tgt_doc: String,
    pub src_idx: usize,
    pub tgt_idx: usize,
    pub src_text: String,
    pub tgt_text: String,
    pub score: f64,
}

impl From<&SentencePair> for SentenceAlignmentRecord {
    fn from(p: &SentencePair) -> Self {
        SentenceAlignmentRecord {
            src_doc: p.src.doc_id.clone(),
            tgt_doc: p.tgt.doc_id.clone(),
            src_idx: p.src.idx,
            tgt_idx: p.tgt.idx,
            src_text: p.src.text.clone(),
            tgt_text: p.tgt.text.clone(),
            score: crate::align::round4(p.score),
        }
    }
}

impl SentenceAlignmentRecord {
    pub fn to_pair(&self) -> SentencePair {
        SentencePair {
            src: Sentence::new(self.src_doc.clone(), self.src_idx, self.src_text.clone()),
            tgt: Sentence::new(self.tgt_doc.clone(), self.tgt_idx, self.tgt_text.clone()),
            score: self.score,
        }
    }
}
