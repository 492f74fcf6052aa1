//! Unit-normalized embedding matrices and the providers that fill them.
//!
//! Every matrix handed out by this module has rows of Euclidean norm 1, so
//! cosine similarity downstream is a plain dot product. Two providers exist:
//!
//! - [`FileBackend`] serves precomputed vectors looked up by text-unit id.
//! - [`RemoteBackend`] posts batches of texts to a JSON embedding service.

mod file;
mod remote;
pub mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub use file::FileBackend;
pub use remote::RemoteBackend;

/// Maximum deviation of a stored row norm from 1.0.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Title and lead joined by one space, the text used for document alignment.
pub fn build_alignment_text(doc: &Document) -> Result<String> {
    let title = doc.title.trim();
    let lead = doc.lead.trim();
    match (title.is_empty(), lead.is_empty()) {
        (true, true) => Err(Error::EmptyAlignmentText(doc.id.clone())),
        (false, true) => Ok(title.to_string()),
        (true, false) => Ok(lead.to_string()),
        (false, false) => Ok(format!("{title} {lead}")),
    }
}

/// Row-major matrix of unit vectors keyed by text-unit id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from already-normalized data, checking every invariant.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Integrity("dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Integrity(format!(
                "{} ids but {} floats for dimension {dim}",
                ids.len(),
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact(dim).enumerate() {
            let norm = norm(row);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Integrity(format!(
                    "row {i} (`{}`) has norm {norm}",
                    ids[i]
                )));
            }
        }
        let index = build_index(&ids)?;
        Ok(EmbeddingMatrix {
            ids,
            dim,
            data,
            index,
        })
    }

    /// Normalizes raw rows. All rows must share one dimension; a zero row is
    /// an error carrying its position.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Integrity(format!(
                "{} ids but {} vectors",
                ids.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Integrity(format!(
                    "vector {i} has dimension {} but earlier vectors have {dim}",
                    row.len()
                )));
            }
            data.extend(normalized(row, i)?);
        }
        if rows.is_empty() {
            return Err(Error::Integrity("no vectors".into()));
        }
        EmbeddingMatrix::new(ids, dim, data)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.vector(id)
            .ok_or_else(|| Error::MissingVector(id.to_string()))
    }

    /// Rows for `ids` in the given order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<EmbeddingMatrix> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            data.extend_from_slice(self.require(id.as_ref())?);
        }
        let ids: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
        let index = build_index(&ids)?;
        Ok(EmbeddingMatrix {
            ids,
            dim: self.dim,
            data,
            index,
        })
    }

    /// Concatenates two matrices of equal dimension. Ids must stay unique.
    pub fn concat(&self, other: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let mut ids = self.ids.clone();
        ids.extend(other.ids.iter().cloned());
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        let index = build_index(&ids)?;
        Ok(EmbeddingMatrix {
            ids,
            dim: self.dim,
            data,
            index,
        })
    }
}

fn build_index(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::Integrity(format!("duplicate id `{id}`")));
        }
    }
    Ok(index)
}

fn norm(row: &[f32]) -> f64 {
    row.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

fn normalized(row: &[f32], index: usize) -> Result<Vec<f32>> {
    let n = norm(row);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector { index });
    }
    Ok(row.iter().map(|&x| (f64::from(x) / n) as f32).collect())
}

/// A piece of text to embed, keyed by the id its vector will carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextUnit {
    pub id: String,
    pub text: String,
}

impl TextUnit {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        TextUnit {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Something that turns a batch of texts into raw (unnormalized) vectors,
/// one per input and in input order.
pub trait EmbeddingBackend: Send + Sync {
    fn embed_batch(&self, batch: &[TextUnit]) -> Result<Vec<Vec<f32>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    File,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    /// Concurrent remote requests.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Precomputed vector file served in `file` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector_file: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_model() -> String {
    "paraphrase-multilingual-mpnet-base-v2".into()
}

fn default_batch_size() -> usize {
    64
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    120
}

impl ProviderConfig {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            mode: ProviderMode::File,
            endpoint: None,
            model_name: default_model(),
            batch_size: default_batch_size(),
            auth_token_env: None,
            max_in_flight: default_in_flight(),
            vector_file: Some(path.into()),
            timeout_secs: default_timeout(),
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        ProviderConfig {
            mode: ProviderMode::Remote,
            endpoint: Some(endpoint.into()),
            vector_file: None,
            ..ProviderConfig::file("")
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidArgument(
                "max_in_flight must be at least 1".into(),
            ));
        }
        match self.mode {
            ProviderMode::Remote if self.endpoint.as_deref().is_none_or(str::is_empty) => Err(
                Error::InvalidArgument("remote mode requires an endpoint".into()),
            ),
            ProviderMode::File if self.vector_file.is_none() => Err(Error::InvalidArgument(
                "file mode requires vector_file".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// A backend plus the batching policy applied to it.
pub struct Embedder {
    backend: Box<dyn EmbeddingBackend>,
    batch_size: usize,
    max_in_flight: usize,
}

impl Embedder {
    pub fn new(
        backend: Box<dyn EmbeddingBackend>,
        batch_size: usize,
        max_in_flight: usize,
    ) -> Self {
        Embedder {
            backend,
            batch_size: batch_size.max(1),
            max_in_flight: max_in_flight.max(1),
        }
    }

    pub fn from_config(config: &ProviderConfig) -> Result<Self> {
        config.validate()?;
        let backend: Box<dyn EmbeddingBackend> = match config.mode {
            ProviderMode::File => Box::new(FileBackend::open(
                config.vector_file.as_deref().expect("validated"),
            )?),
            ProviderMode::Remote => Box::new(RemoteBackend::from_config(config)?),
        };
        Ok(Embedder::new(
            backend,
            config.batch_size,
            config.max_in_flight,
        ))
    }

    pub fn embed(&self, units: &[TextUnit]) -> Result<EmbeddingMatrix> {
        embed_texts(
            units,
            self.backend.as_ref(),
            self.batch_size,
            self.max_in_flight,
        )
    }
}

/// Embeds `units` in batches of at most `batch_size`, issuing up to
/// `max_in_flight` batches at once. Output rows follow input order.
pub fn embed_texts(
    units: &[TextUnit],
    backend: &dyn EmbeddingBackend,
    batch_size: usize,
    max_in_flight: usize,
) -> Result<EmbeddingMatrix> {
    if units.is_empty() {
        return Err(Error::InvalidArgument("nothing to embed".into()));
    }
    let batches: Vec<&[TextUnit]> = units.chunks(batch_size.max(1)).collect();
    type Slot = Option<Result<Vec<Vec<f32>>>>;
    let results: Mutex<Vec<Slot>> = Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.clamp(1, batches.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::Relaxed);
                if b >= batches.len() {
                    break;
                }
                let out = backend.embed_batch(batches[b]);
                let failed = out.is_err();
                results.lock().unwrap()[b] = Some(out);
                if failed {
                    // stop handing out new batches
                    next.store(batches.len(), Ordering::Relaxed);
                }
            });
        }
    });

    let mut rows = Vec::with_capacity(units.len());
    for (b, slot) in results.into_inner().unwrap().into_iter().enumerate() {
        let Some(out) = slot else { continue };
        let vectors = out?;
        if vectors.len() != batches[b].len() {
            return Err(Error::Integrity(format!(
                "batch {b}: sent {} texts, received {} vectors",
                batches[b].len(),
                vectors.len()
            )));
        }
        rows.extend(vectors);
    }
    if rows.len() != units.len() {
        return Err(Error::Integrity(
            "embedding aborted before completion".into(),
        ));
    }
    let ids = units.iter().map(|u| u.id.clone()).collect();
    EmbeddingMatrix::from_rows(ids, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn doc(title: &str, lead: &str) -> Document {
        Document {
            id: "d".into(),
            lang: "de".into(),
            publish_date: NaiveDate::from_ymd_opt(2021, 11, 13).unwrap(),
            title: title.into(),
            lead: lead.into(),
            content: String::new(),
            meta: None,
        }
    }

    #[test]
    fn alignment_text_joins_title_and_lead() {
        assert_eq!(build_alignment_text(&doc("A", "B")).unwrap(), "A B");
        assert_eq!(build_alignment_text(&doc("T", "")).unwrap(), "T");
        assert_eq!(build_alignment_text(&doc("", "L")).unwrap(), "L");
        assert!(matches!(
            build_alignment_text(&doc(" ", "")),
            Err(Error::EmptyAlignmentText(_))
        ));
    }

    #[test]
    fn alignment_text_trims_real_headline() {
        let d = doc(
            " Mobilität.: «Ab 2030 bieten wir nur noch vollelektrische Fahrzeuge an» ",
            " Die Elektro-Revolution rollt. Traditionelle Autohersteller haben derzeit einen schweren Stand.",
        );
        assert_eq!(
            build_alignment_text(&d).unwrap(),
            "Mobilität.: «Ab 2030 bieten wir nur noch vollelektrische Fahrzeuge an» \
             Die Elektro-Revolution rollt. Traditionelle Autohersteller haben derzeit einen schweren Stand."
        );
    }

    /// Returns `dims[i]`-long vectors derived from the text; index `zero`
    /// yields an all-zero vector.
    struct Fake {
        dims: fn(usize) -> usize,
        zero: Option<usize>,
        calls: Mutex<Vec<usize>>,
    }

    impl EmbeddingBackend for Fake {
        fn embed_batch(&self, batch: &[TextUnit]) -> Result<Vec<Vec<f32>>> {
            self.calls.lock().unwrap().push(batch.len());
            Ok(batch
                .iter()
                .map(|u| {
                    let i: usize = u.id.parse().unwrap();
                    let d = (self.dims)(i);
                    if Some(i) == self.zero {
                        vec![0.0; d]
                    } else {
                        (0..d).map(|k| (i + k + 1) as f32).collect()
                    }
                })
                .collect())
        }
    }

    fn units(n: usize) -> Vec<TextUnit> {
        (0..n)
            .map(|i| TextUnit::new(i.to_string(), format!("text {i}")))
            .collect()
    }

    #[test]
    fn shape_and_norms() {
        let fake = Fake {
            dims: |_| 4,
            zero: None,
            calls: Mutex::new(vec![]),
        };
        let m = embed_texts(&units(3), &fake, 2, 1).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.dim(), 4);
        for i in 0..3 {
            assert!((norm(m.row(i)) - 1.0).abs() < 1e-6);
        }
        assert_eq!(*fake.calls.lock().unwrap(), vec![2, 1]);
    }

    #[test]
    fn order_is_preserved_across_concurrent_batches() {
        let fake = Fake {
            dims: |_| 3,
            zero: None,
            calls: Mutex::new(vec![]),
        };
        let m = embed_texts(&units(50), &fake, 3, 8).unwrap();
        let serial = embed_texts(&units(50), &fake, 50, 1).unwrap();
        assert_eq!(m, serial);
        assert_eq!(m.ids()[17], "17");
    }

    #[test]
    fn dimension_change_is_integrity_error() {
        let fake = Fake {
            dims: |i| if i < 2 { 4 } else { 5 },
            zero: None,
            calls: Mutex::new(vec![]),
        };
        assert!(matches!(
            embed_texts(&units(4), &fake, 2, 1),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn zero_vector_names_index() {
        let fake = Fake {
            dims: |_| 4,
            zero: Some(2),
            calls: Mutex::new(vec![]),
        };
        assert!(matches!(
            embed_texts(&units(3), &fake, 8, 1),
            Err(Error::ZeroVector { index: 2 })
        ));
    }

    #[test]
    fn matrix_rejects_non_unit_rows_and_duplicate_ids() {
        assert!(EmbeddingMatrix::new(vec!["a".into()], 2, vec![1.0, 1.0]).is_err());
        assert!(EmbeddingMatrix::new(vec!["a".into(), "a".into()], 1, vec![1.0, 1.0]).is_err());
        assert!(EmbeddingMatrix::new(vec!["a".into()], 2, vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(ProviderConfig::remote("").validate().is_err());
        assert!(ProviderConfig::remote("http://localhost:1")
            .validate()
            .is_ok());
        let mut c = ProviderConfig::file("v.xdemb");
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let parsed: ProviderConfig =
            serde_json::from_str(r#"{"mode":"remote","endpoint":"http://x","batch_size":8}"#)
                .unwrap();
        assert_eq!(parsed.batch_size, 8);
        assert_eq!(parsed.max_in_flight, 4);
    }
}
