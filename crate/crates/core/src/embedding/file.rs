use std::collections::HashMap;
use std::path::Path;

use super::store::{self, RawVectors};
use super::{EmbeddingBackend, TextUnit};
use crate::error::{Error, Result};

/// Serves precomputed vectors by text-unit id. Texts are ignored.
#[derive(Debug)]
pub struct FileBackend {
    raw: RawVectors,
    index: HashMap<String, usize>,
}

impl FileBackend {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(FileBackend::from_raw(store::read_raw(path)?))
    }

    pub fn from_raw(raw: RawVectors) -> Self {
        let index = raw
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        FileBackend { raw, index }
    }
}

impl EmbeddingBackend for FileBackend {
    fn embed_batch(&self, batch: &[TextUnit]) -> Result<Vec<Vec<f32>>> {
        batch
            .iter()
            .map(|u| {
                self.index
                    .get(&u.id)
                    .map(|&i| self.raw.row(i).to_vec())
                    .ok_or_else(|| Error::MissingVector(u.id.clone()))
            })
            .collect()
    }
}
