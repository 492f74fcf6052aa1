//! Article records, aligned document pairs and gold sets.
//!
//! Corpora are read from JSON Lines files, one article per line:
//!
//! ```text
//! {"id":"de-1","lang":"de","publish_date":"2021-11-13","title":"…","lead":"…","content":"…"}
//! ```
//!
//! Gold sets are two tab-separated id columns; lines starting with `#` are
//! comments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two corpus languages. Language `a` is the row side of every
/// similarity matrix, language `b` the column side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangPair {
    pub a: String,
    pub b: String,
}

impl LangPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        LangPair {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.a == lang || self.b == lang
    }

    pub fn side(&self, lang: &str) -> Option<Side> {
        if lang == self.a {
            Some(Side::A)
        } else if lang == self.b {
            Some(Side::B)
        } else {
            None
        }
    }

    pub fn as_array(&self) -> [String; 2] {
        [self.a.clone(), self.b.clone()]
    }
}

impl Default for LangPair {
    fn default() -> Self {
        LangPair::new("de", "fr")
    }
}

impl std::fmt::Display for LangPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.a, self.b)
    }
}

impl std::str::FromStr for LangPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(',') {
            Some((a, b))
                if !a.trim().is_empty() && !b.trim().is_empty() && a.trim() != b.trim() =>
            {
                Ok(LangPair::new(a.trim(), b.trim()))
            }
            _ => Err(Error::InvalidArgument(format!(
                "language pair must look like `de,fr`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

/// One news article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub publish_date: NaiveDate,
    pub title: String,
    pub lead: String,
    pub content: String,
    /// Free-form extension fields (rubric, url, ...). Never interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    lang: String,
    publish_date: String,
    title: String,
    lead: String,
    content: String,
    #[serde(default)]
    meta: Option<serde_json::Value>,
}

/// Parses one JSON Lines record. `line_no` is 1-based and only used in errors.
pub fn parse_document_record(line: &str, line_no: usize, langs: &LangPair) -> Result<Document> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    if raw.id.is_empty() {
        return Err(Error::Validation {
            line: line_no,
            message: "empty id".into(),
        });
    }
    if !langs.contains(&raw.lang) {
        return Err(Error::Validation {
            line: line_no,
            message: format!(
                "document `{}` has unknown language `{}` (expected {} or {})",
                raw.id, raw.lang, langs.a, langs.b
            ),
        });
    }
    let publish_date = NaiveDate::parse_from_str(&raw.publish_date, "%Y-%m-%d").map_err(|e| {
        Error::Validation {
            line: line_no,
            message: format!("invalid publish_date `{}`: {e}", raw.publish_date),
        }
    })?;
    Ok(Document {
        id: raw.id,
        lang: raw.lang,
        publish_date,
        title: raw.title.trim().to_string(),
        lead: raw.lead.trim().to_string(),
        content: raw.content,
        meta: raw.meta,
    })
}

impl Document {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("document serialization is infallible")
    }
}

/// Reads a JSON Lines corpus. Blank lines are skipped.
pub fn read_documents(path: &Path, langs: &LangPair) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_documents(&text, langs)
}

pub fn parse_documents(text: &str, langs: &LangPair) -> Result<Vec<Document>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    lines
        .par_iter()
        .map(|&(i, l)| parse_document_record(l, i + 1, langs))
        .collect()
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = Vec::new();
    for d in docs {
        out.extend_from_slice(d.to_json_line().as_bytes());
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub per_language: BTreeMap<String, usize>,
    pub per_date: BTreeMap<NaiveDate, BTreeMap<String, usize>>,
    pub warnings: Vec<String>,
}

/// Checks id uniqueness and language membership and tallies the corpus.
pub fn validate_corpus(docs: &[Document], langs: &LangPair) -> Result<CorpusSummary> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for d in docs {
        if !seen.insert(d.id.as_str()) && !dups.contains(&d.id) {
            dups.push(d.id.clone());
        }
    }
    if !dups.is_empty() {
        return Err(Error::DuplicateIds(dups));
    }
    let mut summary = CorpusSummary::default();
    summary.per_language.insert(langs.a.clone(), 0);
    summary.per_language.insert(langs.b.clone(), 0);
    for d in docs {
        if !langs.contains(&d.lang) {
            return Err(Error::UnknownLanguage {
                id: d.id.clone(),
                lang: d.lang.clone(),
                expected: langs.as_array(),
            });
        }
        *summary.per_language.get_mut(&d.lang).unwrap() += 1;
        *summary
            .per_date
            .entry(d.publish_date)
            .or_default()
            .entry(d.lang.clone())
            .or_insert(0) += 1;
        if d.title.trim().is_empty() {
            summary
                .warnings
                .push(format!("document `{}` has an empty title", d.id));
        }
        if d.lead.trim().is_empty() {
            summary
                .warnings
                .push(format!("document `{}` has an empty lead", d.id));
        }
    }
    Ok(summary)
}

/// A validated corpus with an id index.
#[derive(Debug, Clone)]
pub struct Corpus {
    langs: LangPair,
    docs: Vec<Document>,
    index: HashMap<String, usize>,
    summary: CorpusSummary,
}

impl Corpus {
    pub fn new(docs: Vec<Document>, langs: LangPair) -> Result<Self> {
        let summary = validate_corpus(&docs, &langs)?;
        let index = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Ok(Corpus {
            langs,
            docs,
            index,
            summary,
        })
    }

    pub fn load(path: &Path, langs: LangPair) -> Result<Self> {
        let docs = read_documents(path, &langs)?;
        Corpus::new(docs, langs)
    }

    pub fn langs(&self) -> &LangPair {
        &self.langs
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn summary(&self) -> &CorpusSummary {
        &self.summary
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.docs[i])
    }

    pub fn resolve(&self, id: &str) -> Result<&Document> {
        self.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn side_of(&self, doc: &Document) -> Side {
        self.langs
            .side(&doc.lang)
            .expect("validated corpus only holds configured languages")
    }
}

/// An aligned document pair. `src_id` is from language A, `tgt_id` from
/// language B, and `score` is the scaled cosine in [-100, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPair {
    pub src_id: String,
    pub tgt_id: String,
    pub score: f64,
    pub date: NaiveDate,
}

impl DocPair {
    pub fn key(&self) -> (&str, &str) {
        (&self.src_id, &self.tgt_id)
    }
}

/// Human-verified document pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldSet {
    pairs: Vec<(String, String)>,
}

impl GoldSet {
    pub fn new<I, S, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (s, t) in pairs {
            let (s, t) = (s.into(), t.into());
            if !seen.insert(unordered_key(&s, &t)) {
                return Err(Error::Gold(format!("duplicate pair ({s}, {t})")));
            }
            out.push((s, t));
        }
        Ok(GoldSet { pairs: out })
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 || cols.iter().any(|c| c.trim().is_empty()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "gold rows need exactly two tab-separated ids".into(),
                });
            }
            rows.push((cols[0].trim().to_string(), cols[1].trim().to_string()));
        }
        GoldSet::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GoldSet::parse_tsv(&text)
    }

    /// Fails on the first id that is not in `corpus`.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        for (s, t) in &self.pairs {
            corpus.resolve(s)?;
            corpus.resolve(t)?;
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs
            .iter()
            .any(|(s, t)| unordered_key(s, t) == unordered_key(a, b))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pairs
            .iter()
            .flat_map(|(s, t)| [s.as_str(), t.as_str()])
    }
}

/// Direction-free key used for gold comparison.
pub(crate) fn unordered_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
