use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one invocation: effective configuration, input and output
/// digests, and per-stage wall time.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub jobs: Option<usize>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub stages: Vec<StageTiming>,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize, jobs: Option<usize>) -> Result<Self> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            jobs,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    /// Records an output. Paths under `root` are stored relative to it.
    pub fn output(&mut self, path: &Path, root: Option<&Path>) -> Result<()> {
        let mut d = digest(path)?;
        if let Some(rel) = root.and_then(|r| path.strip_prefix(r).ok()) {
            d.path = rel.to_string_lossy().replace('\\', "/");
        }
        self.outputs.push(d);
        Ok(())
    }

    /// Runs `f` as a named stage: timing it and labelling any failure.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().with_context(|| format!("stage `{name}` failed"))?;
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: (start.elapsed().as_secs_f64() * 1e3).round() / 1e3,
        });
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path.to_path_buf())
    }
}

/// `out/alignments.jsonl` -> `out/alignments.manifest.json`
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, b"abc").unwrap();
        let d = digest(&p).unwrap();
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(d.bytes, 3);
    }

    #[test]
    fn outputs_are_relative_to_root() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "1").unwrap();
        let mut m = RunManifest::new("t", serde_json::json!({}), None).unwrap();
        m.output(&p, Some(dir.path())).unwrap();
        assert_eq!(m.outputs[0].path, "x.csv");
    }

    #[test]
    fn failing_stage_is_named() {
        let mut m = RunManifest::new("t", serde_json::json!({}), None).unwrap();
        let err = m
            .stage("clean", || -> Result<()> { anyhow::bail!("boom") })
            .unwrap_err();
        assert_eq!(format!("{err:#}"), "stage `clean` failed: boom");
        assert!(m.stages.is_empty());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            manifest_path_for(Path::new("out/alignments.jsonl")),
            PathBuf::from("out/alignments.manifest.json")
        );
    }
}
