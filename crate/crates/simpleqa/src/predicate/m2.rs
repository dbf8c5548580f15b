//! Embedding-projection model: the encoder output is projected into the
//! knowledge-base embedding space and trained to maximize cosine similarity
//! with the gold predicate's vector. Prediction scores every KB predicate,
//! so the support is not limited to predicates seen in training.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use numcore::{Checkpoint, Dense, OptimizerState, ParamSet, Tape};

use crate::encoder::{EncoderConfig, TextEncoder};
use crate::error::{Error, Result};
use crate::graphembed::{cosine, EmbeddingTable, Role};
use crate::kbstore::KnowledgeGraph;
use crate::spanner::{sidecar_path, EpochStats, WordVocab};
use crate::wordvec::WordVectors;

use super::{ModelConfig, PredicateDistribution, TrainExample};

pub struct M2Model {
    pub config: ModelConfig,
    /// Every KB predicate, with its subject-role vector. This is the
    /// prediction support.
    predicates: Vec<String>,
    vectors: Vec<Vec<f64>>,
    encoder: TextEncoder,
    proj: Dense,
    params: ParamSet,
}

fn encoder_config(config: &ModelConfig) -> EncoderConfig {
    EncoderConfig {
        word_dim: config.word_dim,
        char_filters: config.char_filters,
        char_widths: config.char_widths.clone(),
        lstm_dim: config.lstm_dim,
        lstm_layers: config.lstm_layers,
    }
}

/// Subject-role vectors for every KB predicate; a missing embedding is a
/// hard error.
fn kb_predicate_vectors(
    graph: &KnowledgeGraph,
    table: &EmbeddingTable,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut predicates = Vec::new();
    let mut vectors = Vec::new();
    for uri in graph.predicate_vocabulary() {
        let v = table.predicate_embedding(uri, Role::Subject)?;
        predicates.push(uri.clone());
        vectors.push(v.to_vec());
    }
    Ok((predicates, vectors))
}

impl M2Model {
    fn build(
        config: &ModelConfig,
        vocab: WordVocab,
        predicates: Vec<String>,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if let Some(bad) = vectors.iter().find(|v| v.len() != config.embedding_dim) {
            return Err(Error::Config(format!(
                "embedding table dimension {} does not match the configured projection width {}",
                bad.len(),
                config.embedding_dim
            )));
        }
        let mut params = ParamSet::new(config.seed);
        let encoder = TextEncoder::new(&mut params, "m2.enc", encoder_config(config), vocab);
        let proj = Dense::new(&mut params, "m2.proj", encoder.output_dim(), config.embedding_dim);
        Ok(M2Model {
            config: config.clone(),
            predicates,
            vectors,
            encoder,
            proj,
            params,
        })
    }

    fn project(&self, tape: &mut Tape, tokens: &[String]) -> Result<numcore::NodeId> {
        let encoded = self.encoder.encode_final(tape, tokens)?;
        Ok(self.proj.forward(tape, encoded)?)
    }

    /// The projected question vector, for inspection.
    pub fn project_values(&self, tokens: &[String]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let projected = self.project(&mut tape, tokens)?;
        Ok(tape.value(projected).to_vec())
    }

    /// Subject-role embedding of a supported predicate.
    pub fn predicate_vector(&self, uri: &str) -> Option<&[f64]> {
        self.predicates
            .iter()
            .position(|p| p == uri)
            .map(|i| self.vectors[i].as_slice())
    }

    /// Cosine against every KB predicate, shifted to `(cos+1)/2` and
    /// normalized into a distribution. Total and order-preserving in cosine.
    pub fn predict(&self, tokens: &[String]) -> Result<PredicateDistribution> {
        let mut tape = Tape::new(&self.params);
        let projected = self.project(&mut tape, tokens)?;
        let p_hat = tape.value(projected).to_vec();
        let mut weights: Vec<f64> = self
            .vectors
            .iter()
            .map(|v| (cosine(&p_hat, v) + 1.0) / 2.0)
            .collect();
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            let uniform = 1.0 / weights.len() as f64;
            weights.fill(uniform);
        } else {
            for w in weights.iter_mut() {
                *w /= sum;
            }
        }
        let mut out = BTreeMap::new();
        for (uri, w) in self.predicates.iter().zip(weights) {
            out.insert(uri.clone(), w);
        }
        Ok(PredicateDistribution::from_probs(out))
    }

    pub fn train(
        examples: &[TrainExample],
        graph: &KnowledgeGraph,
        table: &EmbeddingTable,
        config: &ModelConfig,
        word_vectors: Option<&WordVectors>,
    ) -> Result<(Self, Vec<EpochStats>)> {
        if examples.is_empty() {
            return Err(Error::Data("no training examples".to_string()));
        }
        let (predicates, vectors) = kb_predicate_vectors(graph, table)?;
        let vocab = WordVocab::build(examples.iter().flat_map(|e| e.tokens.iter().cloned()));
        let mut model = M2Model::build(config, vocab, predicates, vectors)?;
        if let Some(wv) = word_vectors {
            model.encoder.init_word_vectors(&mut model.params, wv)?;
        }

        // Gold targets must be embedded as well.
        let gold_vectors: Vec<Vec<f64>> = examples
            .iter()
            .map(|e| {
                table
                    .predicate_embedding(&e.predicate, Role::Subject)
                    .map(|v| v.to_vec())
            })
            .collect::<Result<_>>()?;

        let mut optimizer = OptimizerState::adam(config.learning_rate);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        let mut log = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for &i in &order {
                let grads = {
                    let mut tape = Tape::new(&model.params);
                    let projected = model.project(&mut tape, &examples[i].tokens)?;
                    let target = tape.input1d(gold_vectors[i].clone());
                    let loss = tape.cosine_loss(projected, target)?;
                    loss_sum += tape.value(loss)[0];
                    tape.backward(loss)?
                };
                optimizer
                    .step(&mut model.params, &grads)
                    .map_err(|e| Error::Train(e.to_string()))?;
            }
            log.push(EpochStats {
                epoch: epoch + 1,
                loss: loss_sum / examples.len() as f64,
                accuracy: f64::NAN,
            });
        }
        Ok((model, log))
    }

    /// Fraction of examples whose gold predicate tops the distribution.
    pub fn training_accuracy(&self, examples: &[TrainExample]) -> Result<f64> {
        let mut correct = 0usize;
        for e in examples {
            let dist = self.predict(&e.tokens)?;
            if dist.argmax().map(|(p, _)| p == e.predicate).unwrap_or(false) {
                correct += 1;
            }
        }
        Ok(correct as f64 / examples.len() as f64)
    }

    pub fn support(&self) -> &[String] {
        &self.predicates
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_params(&self.params)
            .save(path)
            .map_err(Error::Num)?;
        let sidecar = M2Sidecar {
            config: self.config.clone(),
            vocab_words: self.encoder.vocab.words.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(path, e))
    }

    /// Rebuild from a checkpoint. The KB predicate support and its vectors
    /// come from the graph plus the embedding file named in the config; a
    /// predicate without an embedding fails the load.
    pub fn load(path: &Path, graph: &KnowledgeGraph) -> Result<Self> {
        let sidecar_file = sidecar_path(path);
        let json =
            std::fs::read_to_string(&sidecar_file).map_err(|e| Error::io(&sidecar_file, e))?;
        let sidecar: M2Sidecar = serde_json::from_str(&json)?;
        let embedding_path = sidecar.config.embedding_path.clone().ok_or_else(|| {
            Error::Config("model config names no embedding file".to_string())
        })?;
        let table = EmbeddingTable::load(&embedding_path)?;
        let (predicates, vectors) = kb_predicate_vectors(graph, &table)?;
        let vocab = WordVocab::from_words(sidecar.vocab_words);
        let mut model = M2Model::build(&sidecar.config, vocab, predicates, vectors)?;
        Checkpoint::load(path)
            .and_then(|c| c.load_into(&mut model.params))
            .map_err(Error::Num)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct M2Sidecar {
    config: ModelConfig,
    vocab_words: Vec<String>,
}
