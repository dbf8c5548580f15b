//! BiLSTM softmax classifier over the training predicate vocabulary.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use numcore::{Checkpoint, Dense, OptimizerState, ParamSet, Tape};

use crate::encoder::{EncoderConfig, TextEncoder};
use crate::error::{Error, Result};
use crate::spanner::{sidecar_path, EpochStats, WordVocab};
use crate::wordvec::WordVectors;

use super::{ModelConfig, PredicateDistribution, PredicateVocabulary, TrainExample};

pub struct M1Model {
    pub config: ModelConfig,
    pub predicates: PredicateVocabulary,
    encoder: TextEncoder,
    out: Dense,
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

impl M1Model {
    fn build(
        config: &ModelConfig,
        vocab: WordVocab,
        predicates: PredicateVocabulary,
    ) -> Self {
        let mut params = ParamSet::new(config.seed);
        let encoder = TextEncoder::new(&mut params, "m1.enc", encoder_config(config), vocab);
        let out = Dense::new(&mut params, "m1.out", encoder.output_dim(), predicates.len());
        M1Model {
            config: config.clone(),
            predicates,
            encoder,
            out,
            params,
        }
    }

    fn logits(&self, tape: &mut Tape, tokens: &[String]) -> Result<numcore::NodeId> {
        let encoded = self.encoder.encode_final(tape, tokens)?;
        Ok(self.out.forward(tape, encoded)?)
    }

    /// Softmax distribution over exactly the training predicates.
    pub fn predict(&self, tokens: &[String]) -> Result<PredicateDistribution> {
        let mut tape = Tape::new(&self.params);
        let logits = self.logits(&mut tape, tokens)?;
        let probs = tape.softmax(logits)?;
        let values = tape.value(probs);
        let mut out = BTreeMap::new();
        for (i, uri) in self.predicates.list.iter().enumerate() {
            out.insert(uri.clone(), values[i]);
        }
        Ok(PredicateDistribution::from_probs(out))
    }

    pub fn train(
        examples: &[TrainExample],
        config: &ModelConfig,
        word_vectors: Option<&WordVectors>,
    ) -> Result<(Self, Vec<EpochStats>)> {
        if examples.is_empty() {
            return Err(Error::Data("no training examples".to_string()));
        }
        let predicates =
            PredicateVocabulary::build(examples.iter().map(|e| e.predicate.clone()));
        let vocab = WordVocab::build(examples.iter().flat_map(|e| e.tokens.iter().cloned()));
        let mut model = M1Model::build(config, vocab, predicates);
        if let Some(vectors) = word_vectors {
            model.encoder.init_word_vectors(&mut model.params, vectors)?;
        }

        let gold: Vec<usize> = examples
            .iter()
            .map(|e| model.predicates.id(&e.predicate).expect("built from examples"))
            .collect();
        let mut optimizer = OptimizerState::adam(config.learning_rate);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        let mut log = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for &i in &order {
                let grads = {
                    let mut tape = Tape::new(&model.params);
                    let logits = model.logits(&mut tape, &examples[i].tokens)?;
                    let probs = tape.softmax(logits)?;
                    let values = tape.value(probs);
                    let best = values
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(k, _)| k)
                        .unwrap();
                    if best == gold[i] {
                        correct += 1;
                    }
                    let loss = tape.nll_loss(probs, gold[i])?;
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
                accuracy: correct as f64 / examples.len() as f64,
            });
        }
        Ok((model, log))
    }

    /// Fraction of examples whose gold predicate is the distribution argmax.
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

    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_params(&self.params)
            .save(path)
            .map_err(Error::Num)?;
        let sidecar = M1Sidecar {
            config: self.config.clone(),
            vocab_words: self.encoder.vocab.words.clone(),
            predicates: self.predicates.list.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar_file = sidecar_path(path);
        let json =
            std::fs::read_to_string(&sidecar_file).map_err(|e| Error::io(&sidecar_file, e))?;
        let sidecar: M1Sidecar = serde_json::from_str(&json)?;
        let vocab = WordVocab::from_words(sidecar.vocab_words);
        let predicates = PredicateVocabulary::from_list(sidecar.predicates);
        let mut model = M1Model::build(&sidecar.config, vocab, predicates);
        Checkpoint::load(path)
            .and_then(|c| c.load_into(&mut model.params))
            .map_err(Error::Num)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct M1Sidecar {
    config: ModelConfig,
    vocab_words: Vec<String>,
    predicates: Vec<String>,
}
