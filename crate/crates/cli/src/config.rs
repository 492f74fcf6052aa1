use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use xdalign::align::Strategy;
use xdalign::cleanup::CleanupConfig;
use xdalign::corpus::LangPair;
use xdalign::embedding::ProviderConfig;
use xdalign::metrics::DEFAULT_ANALYSIS_THRESHOLD;
use xdalign::report::{DEFAULT_BINS, DEFAULT_TOP_K};
use xdalign::sentences::{MinCharsRule, DEFAULT_MIN_CHARS};

/// `run.json` for the `pipeline` command. Relative paths are resolved
/// against the directory holding the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "default_langs", with = "lang_pair")]
    pub langs: LangPair,
    pub provider: ProviderConfig,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Replace `threshold` with the sweep optimum when a gold set is given.
    #[serde(default)]
    pub use_tuned_threshold: bool,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_min_chars")]
    pub min_chars: usize,
    #[serde(default)]
    pub min_chars_rule: MinCharsRule,
    #[serde(default = "default_threshold")]
    pub analysis_threshold: f64,
    #[serde(default)]
    pub cleanup: CleanupConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleanup_config: Option<PathBuf>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_low: Option<f64>,
    #[serde(default)]
    pub dump_matrices: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_counter: Option<TokenCounterKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TokenCounterKind {
    /// Whitespace-separated words.
    Whitespace,
}

fn default_langs() -> LangPair {
    LangPair::default()
}

fn default_strategy() -> Strategy {
    Strategy::Intersection
}

fn default_threshold() -> f64 {
    DEFAULT_ANALYSIS_THRESHOLD
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

fn default_min_chars() -> usize {
    DEFAULT_MIN_CHARS
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

mod lang_pair {
    use serde::{Deserialize, Deserializer, Serializer};
    use xdalign::corpus::LangPair;

    pub fn serialize<S: Serializer>(l: &LangPair, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&l.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<LangPair, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub strategy: Option<Strategy>,
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub min_chars: Option<usize>,
    pub analysis_threshold: Option<f64>,
    pub cleanup_config: Option<PathBuf>,
    pub dump_matrices: bool,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut c: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.input = resolve(base, &c.input);
        c.out_dir = resolve(base, &c.out_dir);
        c.gold = c.gold.map(|g| resolve(base, &g));
        c.cleanup_config = c.cleanup_config.map(|g| resolve(base, &g));
        c.provider.vector_file = c.provider.vector_file.map(|v| resolve(base, &v));

        let o = overrides.clone();
        c.out_dir = o.out_dir.unwrap_or(c.out_dir);
        c.gold = o.gold.or(c.gold);
        c.strategy = o.strategy.unwrap_or(c.strategy);
        c.threshold = o.threshold.unwrap_or(c.threshold);
        c.top_k = o.top_k.unwrap_or(c.top_k);
        c.min_chars = o.min_chars.unwrap_or(c.min_chars);
        c.analysis_threshold = o.analysis_threshold.unwrap_or(c.analysis_threshold);
        c.cleanup_config = o.cleanup_config.or(c.cleanup_config);
        c.dump_matrices |= o.dump_matrices;

        // a separate cleanup file replaces the inline block
        if let Some(p) = &c.cleanup_config {
            c.cleanup = load_cleanup(p)?;
            c.cleanup_config = None;
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("threshold", self.threshold),
            ("analysis_threshold", self.analysis_threshold),
        ] {
            if !(0.0..=100.0).contains(&t) {
                bail!("{name} {t} outside [0, 100]");
            }
        }
        if self.histogram_bins == 0 {
            bail!("histogram_bins must be at least 1");
        }
        self.provider.validate()?;
        self.cleanup.validate()?;
        Ok(())
    }
}

pub fn load_cleanup(path: &Path) -> Result<CleanupConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read cleanup config {}", path.display()))?;
    let c: CleanupConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid cleanup config {}", path.display()))?;
    c.validate()?;
    Ok(c)
}

pub fn load_provider(path: &Path) -> Result<ProviderConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read provider config {}", path.display()))?;
    let mut c: ProviderConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid provider config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    c.vector_file = c.vector_file.map(|v| resolve(base, &v));
    c.validate()?;
    Ok(c)
}
