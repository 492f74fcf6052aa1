//! Scaled cosine scores and per-date similarity matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::corpus::{Corpus, Side};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// `100 * cos(u, v)`, in [-100, 100].
pub fn cosine_score<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument("cosine of a zero vector".into()));
    }
    Ok((100.0 * dot / (nu.sqrt() * nv.sqrt())).clamp(-100.0, 100.0))
}

/// Dot product of two unit rows, scaled to the cosine range.
#[inline]
fn unit_score(u: &[f32], v: &[f32]) -> f64 {
    let dot: f64 = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum();
    (100.0 * dot).clamp(-100.0, 100.0)
}

/// Documents sharing one publish date, split by language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateBucket {
    pub date: NaiveDate,
    pub a_ids: Vec<String>,
    pub b_ids: Vec<String>,
}

impl DateBucket {
    /// Both sides hold at least one document.
    pub fn is_alignable(&self) -> bool {
        !self.a_ids.is_empty() && !self.b_ids.is_empty()
    }
}

/// Partitions the corpus by publish date, keeping ingestion order inside
/// each side.
pub fn bucket_by_date(corpus: &Corpus) -> BTreeMap<NaiveDate, DateBucket> {
    let mut buckets: BTreeMap<NaiveDate, DateBucket> = BTreeMap::new();
    for doc in corpus.documents() {
        let b = buckets
            .entry(doc.publish_date)
            .or_insert_with(|| DateBucket {
                date: doc.publish_date,
                a_ids: Vec::new(),
                b_ids: Vec::new(),
            });
        match corpus.side_of(doc) {
            Side::A => b.a_ids.push(doc.id.clone()),
            Side::B => b.b_ids.push(doc.id.clone()),
        }
    }
    buckets
}

/// Dense row-major score matrix; rows are language A, columns language B.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub date: NaiveDate,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    scores: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_scores(
        date: NaiveDate,
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if scores.len() != row_ids.len() * col_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "{}x{} matrix needs {} scores, got {}",
                row_ids.len(),
                col_ids.len(),
                row_ids.len() * col_ids.len(),
                scores.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(-100.0..=100.0).contains(*s)) {
            return Err(Error::InvalidArgument(format!(
                "score {s} outside [-100, 100]"
            )));
        }
        Ok(SimilarityMatrix {
            date,
            row_ids,
            col_ids,
            scores,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(
        date: NaiveDate,
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        if rows.iter().any(|r| r.len() != col_ids.len()) {
            return Err(Error::InvalidArgument("ragged score rows".into()));
        }
        SimilarityMatrix::from_scores(date, row_ids, col_ids, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.col_ids.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.col_ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.col_ids.len();
        &self.scores[i * c..(i + 1) * c]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_id");
        for c in &self.col_ids {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (i, r) in self.row_ids.iter().enumerate() {
            out.push_str(&csv_field(r));
            for s in self.row(i) {
                let _ = write!(out, ",{s:.4}");
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scores every A-side document of `bucket` against every B-side document.
pub fn similarity_matrix(
    bucket: &DateBucket,
    embeddings: &EmbeddingMatrix,
) -> Result<SimilarityMatrix> {
    if !bucket.is_alignable() {
        return Err(Error::InvalidArgument(format!(
            "bucket {} has an empty side",
            bucket.date
        )));
    }
    let a: Vec<&[f32]> = bucket
        .a_ids
        .iter()
        .map(|id| embeddings.require(id))
        .collect::<Result<_>>()?;
    let b: Vec<&[f32]> = bucket
        .b_ids
        .iter()
        .map(|id| embeddings.require(id))
        .collect::<Result<_>>()?;
    let mut scores = vec![0.0; a.len() * b.len()];
    scores
        .par_chunks_mut(b.len())
        .zip(a.par_iter())
        .for_each(|(row, u)| {
            for (cell, v) in row.iter_mut().zip(&b) {
                *cell = unit_score(u, v);
            }
        });
    Ok(SimilarityMatrix {
        date: bucket.date,
        row_ids: bucket.a_ids.clone(),
        col_ids: bucket.b_ids.clone(),
        scores,
    })
}

/// Matrices for every alignable bucket, in date order.
pub fn similarity_matrices(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
) -> Result<Vec<SimilarityMatrix>> {
    let buckets: Vec<DateBucket> = bucket_by_date(corpus)
        .into_values()
        .filter(DateBucket::is_alignable)
        .collect();
    buckets
        .par_iter()
        .map(|b| similarity_matrix(b, embeddings))
        .collect()
}

/// Writes one `<date>.csv` per matrix into `dir`.
pub fn dump_matrices(matrices: &[SimilarityMatrix], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for m in matrices {
        let path = dir.join(format!("{}.csv", m.date));
        fs::write(&path, m.to_csv()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LangPair};

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 11, 13).unwrap()
    }

    fn doc(id: &str, lang: &str, day: u32) -> Document {
        Document {
            id: id.into(),
            lang: lang.into(),
            publish_date: NaiveDate::from_ymd_opt(2021, 11, day).unwrap(),
            title: "t".into(),
            lead: "l".into(),
            content: String::new(),
            meta: None,
        }
    }

    fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
        let mut dot = 0.0;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..u.len() {
            dot += u[i] * v[i];
            a += u[i] * u[i];
            b += v[i] * v[i];
        }
        100.0 * dot / (a.sqrt() * b.sqrt())
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(
            cosine_score(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(),
            100.0
        );
        assert_eq!(cosine_score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_score(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s - 70.7107).abs() < 1e-4);
        assert!((s - naive_cosine(&[1.0, 0.0], &[1.0, 1.0])).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_score(&[1.0, 0.0], &[1.0]),
            Err(Error::DimensionMismatch { left: 2, right: 1 })
        ));
        assert!(cosine_score(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn buckets_partition_by_date() {
        let corpus = Corpus::new(
            vec![
                doc("d1", "de", 1),
                doc("f1", "fr", 1),
                doc("d2", "de", 2),
                doc("d3", "de", 2),
                doc("d4", "de", 2),
            ],
            LangPair::default(),
        )
        .unwrap();
        let b = bucket_by_date(&corpus);
        assert_eq!(b.len(), 2);
        let first = &b[&NaiveDate::from_ymd_opt(2021, 11, 1).unwrap()];
        assert_eq!(first.a_ids, vec!["d1"]);
        assert_eq!(first.b_ids, vec!["f1"]);
        assert!(first.is_alignable());
        let second = &b[&NaiveDate::from_ymd_opt(2021, 11, 2).unwrap()];
        assert_eq!(second.a_ids.len(), 3);
        assert!(!second.is_alignable());
    }

    #[test]
    fn single_document_bucket_is_unalignable() {
        let corpus = Corpus::new(vec![doc("d1", "de", 1)], LangPair::default()).unwrap();
        let b = bucket_by_date(&corpus);
        assert_eq!(b.len(), 1);
        assert!(!b.values().next().unwrap().is_alignable());
    }

    fn emb(rows: &[(&str, Vec<f32>)]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            rows.iter().map(|(id, _)| id.to_string()).collect(),
            rows.iter().map(|(_, v)| v.clone()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_by_one_identical() {
        let e = emb(&[("a", vec![0.3, 0.4]), ("b", vec![0.3, 0.4])]);
        let bucket = DateBucket {
            date: date(),
            a_ids: vec!["a".into()],
            b_ids: vec!["b".into()],
        };
        let m = similarity_matrix(&bucket, &e).unwrap();
        assert!((m.get(0, 0) - 100.0).abs() < 1e-4);
    }

    #[test]
    fn two_by_two_against_scalar_loop() {
        let r = std::f32::consts::FRAC_1_SQRT_2;
        let e = emb(&[
            ("a1", vec![1.0, 0.0]),
            ("a2", vec![0.0, 1.0]),
            ("b1", vec![1.0, 0.0]),
            ("b2", vec![r, r]),
        ]);
        let bucket = DateBucket {
            date: date(),
            a_ids: vec!["a1".into(), "a2".into()],
            b_ids: vec!["b1".into(), "b2".into()],
        };
        let m = similarity_matrix(&bucket, &e).unwrap();
        let expected = [[100.0, 70.7107], [0.0, 70.7107]];
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert!((m.get(i, j) - want).abs() < 1e-4);
                let u: Vec<f64> = e
                    .require(&bucket.a_ids[i])
                    .unwrap()
                    .iter()
                    .map(|&x| x as f64)
                    .collect();
                let v: Vec<f64> = e
                    .require(&bucket.b_ids[j])
                    .unwrap()
                    .iter()
                    .map(|&x| x as f64)
                    .collect();
                assert!((m.get(i, j) - naive_cosine(&u, &v)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn missing_vector_names_id() {
        let e = emb(&[("a", vec![1.0])]);
        let bucket = DateBucket {
            date: date(),
            a_ids: vec!["a".into()],
            b_ids: vec!["ghost".into()],
        };
        assert!(matches!(
            similarity_matrix(&bucket, &e),
            Err(Error::MissingVector(id)) if id == "ghost"
        ));
    }

    #[test]
    fn csv_dump() {
        let m = SimilarityMatrix::from_rows(
            date(),
            vec!["d1".into()],
            vec!["f,1".into(), "f2".into()],
            &[vec![50.0, 12.34567]],
        )
        .unwrap();
        assert_eq!(m.to_csv(), "row_id,\"f,1\",f2\nd1,50.0000,12.3457\n");
    }

    #[test]
    fn from_scores_checks_range_and_shape() {
        assert!(SimilarityMatrix::from_scores(
            date(),
            vec!["a".into()],
            vec!["b".into()],
            vec![100.5]
        )
        .is_err());
        assert!(
            SimilarityMatrix::from_scores(date(), vec!["a".into()], vec!["b".into()], vec![])
                .is_err()
        );
    }
}
