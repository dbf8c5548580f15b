//! Run configuration: a TOML file with per-component sections, overridden by
//! command-line flags. The resolved configuration is hashed into every
//! report so artifacts can be traced to the exact settings that produced
//! them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use simpleqa::error::{Error, Result};
use simpleqa::graphembed::EmbedConfig;
use simpleqa::predicate::{ModelConfig, ModelKind};
use simpleqa::spanner::NerConfig;
use simpleqa::synth::SynthConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub kb: Option<PathBuf>,
    pub names: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub ner: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Kind-specific overrides applied on top of the per-kind defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOverrides {
    pub word_dim: Option<usize>,
    pub char_filters: Option<usize>,
    pub char_widths: Option<Vec<usize>>,
    pub lstm_dim: Option<usize>,
    pub lstm_layers: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub embedding_dim: Option<usize>,
    pub negatives: Option<usize>,
    pub compat_hidden: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub bucket_bits: Option<u32>,
    pub word_ngrams: Option<usize>,
    pub char_ngram: Option<usize>,
}

impl ModelOverrides {
    pub fn apply(&self, kind: ModelKind, seed: u64) -> ModelConfig {
        let mut c = ModelConfig::defaults(kind);
        c.seed = seed;
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { c.$field = v.clone(); })*
            };
        }
        set!(
            word_dim,
            char_filters,
            char_widths,
            lstm_dim,
            lstm_layers,
            epochs,
            learning_rate,
            embedding_dim,
            negatives,
            compat_hidden,
            hidden_dim,
            bucket_bits,
            word_ngrams,
            char_ngram
        );
        c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub k_subjects: usize,
    pub max_ngram: usize,
    /// K values for the Recall@K reports.
    pub ks: Vec<usize>,
    /// Candidates kept per answer in machine output.
    pub top_n: usize,
    pub paths: PathsConfig,
    pub ner: NerConfig,
    pub kb_embed: EmbedConfig,
    pub m1: ModelOverrides,
    pub m2: ModelOverrides,
    pub m3: ModelOverrides,
    pub m4: ModelOverrides,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            workers: 1,
            k_subjects: 400,
            max_ngram: 5,
            ks: vec![1, 2, 5, 10, 25, 100, 400],
            top_n: 5,
            paths: PathsConfig::default(),
            ner: NerConfig::default(),
            kb_embed: EmbedConfig::default(),
            m1: ModelOverrides::default(),
            m2: ModelOverrides::default(),
            m3: ModelOverrides::default(),
            m4: ModelOverrides::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Start from the optional config file, then apply flag overrides.
    pub fn resolve(file: Option<&Path>, seed: Option<u64>, workers: Option<usize>) -> Result<Self> {
        let mut config = match file {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(workers) = workers {
            config.workers = workers;
        }
        // One run seed governs every component unless the file pinned them.
        config.ner.seed = config.seed;
        config.kb_embed.seed = config.seed;
        config.synth.seed = config.seed;
        Ok(config)
    }

    pub fn model_config(&self, kind: ModelKind, embeddings: Option<&Path>) -> ModelConfig {
        let overrides = match kind {
            ModelKind::M1 => &self.m1,
            ModelKind::M2 => &self.m2,
            ModelKind::M3 => &self.m3,
            ModelKind::M4 => &self.m4,
        };
        let mut c = overrides.apply(kind, self.seed);
        c.embedding_path = embeddings.map(Path::to_path_buf);
        c
    }

    /// Stable hash of the resolved configuration. Input locations are
    /// excluded: two runs over the same data in different directories are
    /// the same run, and file contents are fingerprinted separately.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths = PathsConfig::default();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

/// The input paths a command declares must exist before any work starts.
pub fn require_inputs(paths: &[(&str, Option<&PathBuf>)]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (name, path) in paths {
        match path {
            None => {
                return Err(Error::Config(format!(
                    "missing required input `{name}` (flag --{name} or [paths] {name})"
                )))
            }
            Some(p) if !p.exists() => {
                return Err(Error::Config(format!(
                    "input `{name}` does not exist: {}",
                    p.display()
                )))
            }
            Some(p) => out.push((*p).clone()),
        }
    }
    Ok(out)
}
