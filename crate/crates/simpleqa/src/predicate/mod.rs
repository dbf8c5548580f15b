//! The four predicate-prediction architectures. Each model maps a masked
//! question (and, for the pair scorer, a candidate predicate) to a
//! probability usable as P(p|q) in the pair-scoring product.

mod m1;
mod m2;
mod m3;
mod m4;

pub use m1::M1Model;
pub use m2::M2Model;
pub use m3::M3Model;
pub use m4::M4Model;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbstore::KnowledgeGraph;
use crate::spanner::{find_span, tokenize_with_case, QuestionRecord};
use crate::surface::{normalize_surface, SurfaceFormIndex};

/// Placeholder token substituted for the entity mention.
pub const ENTITY_PLACEHOLDER: &str = "e";

/// Ordered predicate URIs seen in training, with dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateVocabulary {
    pub list: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PredicateVocabulary {
    pub fn build(predicates: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = predicates.into_iter().collect();
        let list: Vec<String> = set.into_iter().collect();
        let index = list
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        PredicateVocabulary { list, index }
    }

    /// Restore a persisted predicate list.
    pub fn from_list(list: Vec<String>) -> Self {
        let mut vocab = PredicateVocabulary {
            list,
            index: HashMap::new(),
        };
        vocab.reindex();
        vocab
    }

    pub fn reindex(&mut self) {
        self.index = self
            .list
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
    }

    pub fn id(&self, uri: &str) -> Option<usize> {
        self.index.get(uri).copied()
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }
}

/// Probability per predicate URI over a model's support.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredicateDistribution {
    probs: BTreeMap<String, f64>,
}

impl PredicateDistribution {
    pub fn from_probs(probs: BTreeMap<String, f64>) -> Self {
        PredicateDistribution { probs }
    }

    /// Probability of a predicate; zero outside the support.
    pub fn prob(&self, uri: &str) -> f64 {
        self.probs.get(uri).copied().unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn contains(&self, uri: &str) -> bool {
        self.probs.contains_key(uri)
    }

    pub fn sum(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Highest-probability predicate; ties break lexicographically.
    pub fn argmax(&self) -> Option<(&str, f64)> {
        self.probs
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(k, v)| (k.as_str(), *v))
    }
}

/// A question with its mention span replaced by the placeholder token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedQuestion {
    pub tokens: Vec<String>,
    pub mention_found: bool,
}

impl MaskedQuestion {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Replace the mention's token span (leftmost occurrence) with the
/// placeholder. A missing mention returns the question unmodified with
/// `mention_found` false.
pub fn mask_entity(question: &str, mention: &str) -> MaskedQuestion {
    let tokens: Vec<String> = tokenize_with_case(question)
        .into_iter()
        .map(|t| t.text)
        .collect();
    let normalized = normalize_surface(mention);
    let mention_tokens: Vec<&str> = normalized.split_whitespace().collect();
    if mention_tokens.is_empty() {
        return MaskedQuestion {
            tokens,
            mention_found: false,
        };
    }
    let window = mention_tokens.len();
    let start = (0..(tokens.len() + 1).saturating_sub(window)).find(|&s| {
        tokens[s..s + window]
            .iter()
            .zip(&mention_tokens)
            .all(|(a, b)| a == *b)
    });
    match start {
        Some(s) => {
            let mut masked = Vec::with_capacity(tokens.len() - window + 1);
            masked.extend_from_slice(&tokens[..s]);
            masked.push(ENTITY_PLACEHOLDER.to_string());
            masked.extend_from_slice(&tokens[s + window..]);
            MaskedQuestion {
                tokens: masked,
                mention_found: true,
            }
        }
        None => MaskedQuestion {
            tokens,
            mention_found: false,
        },
    }
}

/// Split a predicate URI on dots and underscores, lowercased, empties
/// dropped.
pub fn tokenize_predicate_uri(uri: &str) -> Vec<String> {
    uri.split(['.', '_'])
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Which of the four architectures a checkpoint holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    M1,
    M2,
    M3,
    M4,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::M1 => "m1",
            ModelKind::M2 => "m2",
            ModelKind::M3 => "m3",
            ModelKind::M4 => "m4",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" | "1" => Ok(ModelKind::M1),
            "m2" | "2" => Ok(ModelKind::M2),
            "m3" | "3" => Ok(ModelKind::M3),
            "m4" | "4" => Ok(ModelKind::M4),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Hyper-parameters for all four model kinds; kind-specific fields are
/// ignored by the others.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub word_dim: usize,
    pub char_filters: usize,
    pub char_widths: Vec<usize>,
    pub lstm_dim: usize,
    pub lstm_layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Output projection width; must equal the embedding table dimension.
    pub embedding_dim: usize,
    /// Path of the role-embedding file (required to rebuild the model).
    pub embedding_path: Option<PathBuf>,
    /// Negative predicates sampled per question.
    pub negatives: usize,
    /// Width of the pair-compatibility hidden layer.
    pub compat_hidden: usize,
    /// Bag-of-n-grams hidden width.
    pub hidden_dim: usize,
    /// log2 of the feature-hashing bucket count.
    pub bucket_bits: u32,
    /// Maximum word n-gram order.
    pub word_ngrams: usize,
    /// Character n-gram size.
    pub char_ngram: usize,
}

impl ModelConfig {
    pub fn defaults(kind: ModelKind) -> Self {
        let base = ModelConfig {
            kind,
            word_dim: 100,
            char_filters: 100,
            char_widths: vec![2, 3, 4],
            lstm_dim: 200,
            lstm_layers: 1,
            epochs: 100,
            learning_rate: 1e-3,
            seed: 1,
            embedding_dim: 200,
            embedding_path: None,
            negatives: 10,
            compat_hidden: 100,
            hidden_dim: 100,
            bucket_bits: 21,
            word_ngrams: 2,
            char_ngram: 5,
        };
        match kind {
            ModelKind::M1 => base,
            ModelKind::M2 => ModelConfig {
                lstm_dim: 400,
                ..base
            },
            ModelKind::M3 => ModelConfig {
                lstm_dim: 400,
                lstm_layers: 2,
                ..base
            },
            ModelKind::M4 => ModelConfig {
                epochs: 50,
                learning_rate: 0.1,
                ..base
            },
        }
    }
}

/// One predicate-model training example: masked question tokens plus the
/// gold pair.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub tokens: Vec<String>,
    pub predicate: String,
    pub subject: String,
}

/// Mask every record with its weak-supervision span. Records with no
/// inferable span keep their unmasked question (flag counted).
pub fn prepare_examples(
    dataset: &[QuestionRecord],
    index: &SurfaceFormIndex,
    max_ngram: usize,
) -> (Vec<TrainExample>, usize) {
    let mut unmasked = 0usize;
    let examples = dataset
        .iter()
        .map(|r| {
            let masked = match find_span(&r.question, &r.subject, index, max_ngram) {
                Some(mention) => mask_entity(&r.question, &mention),
                None => mask_entity(&r.question, ""),
            };
            if !masked.mention_found {
                unmasked += 1;
            }
            TrainExample {
                tokens: masked.tokens,
                predicate: r.predicate.clone(),
                subject: r.subject.clone(),
            }
        })
        .filter(|e| !e.tokens.is_empty())
        .collect();
    (examples, unmasked)
}

/// A trained model of any kind, behind one scoring surface.
pub enum PredicateModel {
    M1(Box<M1Model>),
    M2(Box<M2Model>),
    M3(Box<M3Model>),
    M4(Box<M4Model>),
}

impl From<M1Model> for PredicateModel {
    fn from(m: M1Model) -> Self {
        PredicateModel::M1(Box::new(m))
    }
}

impl From<M2Model> for PredicateModel {
    fn from(m: M2Model) -> Self {
        PredicateModel::M2(Box::new(m))
    }
}

impl From<M3Model> for PredicateModel {
    fn from(m: M3Model) -> Self {
        PredicateModel::M3(Box::new(m))
    }
}

impl From<M4Model> for PredicateModel {
    fn from(m: M4Model) -> Self {
        PredicateModel::M4(Box::new(m))
    }
}

impl PredicateModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            PredicateModel::M1(_) => ModelKind::M1,
            PredicateModel::M2(_) => ModelKind::M2,
            PredicateModel::M3(_) => ModelKind::M3,
            PredicateModel::M4(_) => ModelKind::M4,
        }
    }

    /// P(p|q) over the model's support. The pair scorer needs the candidate
    /// predicate set; the other kinds ignore it.
    pub fn distribution(
        &self,
        tokens: &[String],
        candidates: Option<&BTreeSet<String>>,
    ) -> Result<PredicateDistribution> {
        match self {
            PredicateModel::M1(m) => m.predict(tokens),
            PredicateModel::M2(m) => m.predict(tokens),
            PredicateModel::M3(m) => {
                let candidates = candidates.ok_or_else(|| {
                    Error::Config("the pair scorer needs a candidate predicate set".to_string())
                })?;
                m.distribution(tokens, candidates)
            }
            PredicateModel::M4(m) => m.predict(tokens),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            PredicateModel::M1(m) => m.save(path),
            PredicateModel::M2(m) => m.save(path),
            PredicateModel::M3(m) => m.save(path),
            PredicateModel::M4(m) => m.save(path),
        }
    }

    /// Load any checkpoint by reading its sidecar's declared kind. The
    /// embedding-projection model rebuilds its support from the graph and
    /// embedding table named in its config.
    pub fn load(path: &Path, graph: &KnowledgeGraph) -> Result<Self> {
        let sidecar = crate::spanner::sidecar_path(path);
        let json =
            std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        #[derive(Deserialize)]
        struct KindProbe {
            config: KindOnly,
        }
        #[derive(Deserialize)]
        struct KindOnly {
            kind: ModelKind,
        }
        let probe: KindProbe = serde_json::from_str(&json)?;
        match probe.config.kind {
            ModelKind::M1 => Ok(M1Model::load(path)?.into()),
            ModelKind::M2 => Ok(M2Model::load(path, graph)?.into()),
            ModelKind::M3 => Ok(M3Model::load(path)?.into()),
            ModelKind::M4 => Ok(M4Model::load(path)?.into()),
        }
    }
}
