//! Binary pair scorer: separate question and predicate encoders feed a
//! compatibility layer ending in a sigmoid. Trained with the gold predicate
//! as positive against sampled negatives; per-candidate scores are
//! normalized into a distribution over the candidate set.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use numcore::{Checkpoint, Dense, NodeId, OptimizerState, ParamSet, Tape};

use crate::encoder::{EncoderConfig, TextEncoder};
use crate::error::{Error, Result};
use crate::kbstore::KnowledgeGraph;
use crate::spanner::{sidecar_path, EpochStats, WordVocab};
use crate::wordvec::WordVectors;

use super::{tokenize_predicate_uri, ModelConfig, PredicateDistribution, PredicateVocabulary, TrainExample};

pub struct M3Model {
    pub config: ModelConfig,
    pub predicates: PredicateVocabulary,
    q_encoder: TextEncoder,
    p_encoder: TextEncoder,
    compat_hidden: Dense,
    compat_out: Dense,
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

impl M3Model {
    fn build(
        config: &ModelConfig,
        q_vocab: WordVocab,
        p_vocab: WordVocab,
        predicates: PredicateVocabulary,
    ) -> Self {
        let mut params = ParamSet::new(config.seed);
        let q_encoder = TextEncoder::new(&mut params, "m3.q_enc", encoder_config(config), q_vocab);
        let p_encoder = TextEncoder::new(&mut params, "m3.p_enc", encoder_config(config), p_vocab);
        let compat_in = q_encoder.output_dim() + p_encoder.output_dim();
        let compat_hidden = Dense::new(&mut params, "m3.compat_hidden", compat_in, config.compat_hidden);
        let compat_out = Dense::new(&mut params, "m3.compat_out", config.compat_hidden, 1);
        M3Model {
            config: config.clone(),
            predicates,
            q_encoder,
            p_encoder,
            compat_hidden,
            compat_out,
            params,
        }
    }

    fn score_node(
        &self,
        tape: &mut Tape,
        q_encoded: NodeId,
        predicate_uri: &str,
    ) -> Result<NodeId> {
        let p_tokens = tokenize_predicate_uri(predicate_uri);
        let p_encoded = self.p_encoder.encode_final(tape, &p_tokens)?;
        let joint = tape.concat(vec![q_encoded, p_encoded])?;
        let hidden = self.compat_hidden.forward(tape, joint)?;
        let hidden = tape.tanh(hidden);
        let z = self.compat_out.forward(tape, hidden)?;
        Ok(tape.sigmoid(z))
    }

    /// Probability in [0, 1] that the predicate matches the question.
    pub fn score(&self, tokens: &[String], predicate_uri: &str) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let q_encoded = self.q_encoder.encode_final(&mut tape, tokens)?;
        let s = self.score_node(&mut tape, q_encoded, predicate_uri)?;
        Ok(tape.value(s)[0])
    }

    /// Scores over a candidate set, normalized so they form a distribution.
    pub fn distribution(
        &self,
        tokens: &[String],
        candidates: &BTreeSet<String>,
    ) -> Result<PredicateDistribution> {
        if candidates.is_empty() {
            return Ok(PredicateDistribution::default());
        }
        let mut tape = Tape::new(&self.params);
        let q_encoded = self.q_encoder.encode_final(&mut tape, tokens)?;
        let mut scores = BTreeMap::new();
        for uri in candidates {
            let s = self.score_node(&mut tape, q_encoded, uri)?;
            scores.insert(uri.clone(), tape.value(s)[0]);
        }
        let sum: f64 = scores.values().sum();
        if sum <= 0.0 {
            let uniform = 1.0 / scores.len() as f64;
            for v in scores.values_mut() {
                *v = uniform;
            }
        } else {
            for v in scores.values_mut() {
                *v /= sum;
            }
        }
        Ok(PredicateDistribution::from_probs(scores))
    }

    /// Negatives for one example: half uniform over the vocabulary, half
    /// from the gold subject's own predicates when available.
    fn sample_negatives(
        &self,
        gold: &str,
        subject_predicates: &BTreeSet<String>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<String> {
        let budget = self.config.negatives;
        let hard_quota = budget / 2;
        let uniform_quota = budget - hard_quota;

        let mut hard_pool: Vec<&String> =
            subject_predicates.iter().filter(|p| *p != gold).collect();
        hard_pool.shuffle(rng);
        let mut negatives: BTreeSet<String> = hard_pool
            .into_iter()
            .take(hard_quota)
            .cloned()
            .collect();

        let uniform_pool: Vec<&String> = self
            .predicates
            .list
            .iter()
            .filter(|p| *p != gold)
            .collect();
        let target = negatives.len() + uniform_quota;
        let mut guard = 0;
        while negatives.len() < target && guard < budget * 4 && !uniform_pool.is_empty() {
            guard += 1;
            let pick = uniform_pool[rng.random_range(0..uniform_pool.len())];
            negatives.insert(pick.clone());
        }
        negatives.into_iter().collect()
    }

    pub fn train(
        examples: &[TrainExample],
        graph: &KnowledgeGraph,
        config: &ModelConfig,
        word_vectors: Option<&WordVectors>,
    ) -> Result<(Self, Vec<EpochStats>)> {
        if examples.is_empty() {
            return Err(Error::Data("no training examples".to_string()));
        }
        let predicates =
            PredicateVocabulary::build(examples.iter().map(|e| e.predicate.clone()));
        let q_vocab = WordVocab::build(examples.iter().flat_map(|e| e.tokens.iter().cloned()));
        let p_vocab = WordVocab::build(
            predicates
                .list
                .iter()
                .flat_map(|p| tokenize_predicate_uri(p)),
        );
        let mut model = M3Model::build(config, q_vocab, p_vocab, predicates);
        if let Some(wv) = word_vectors {
            model
                .q_encoder
                .init_word_vectors(&mut model.params, wv)?;
        }

        let mut optimizer = OptimizerState::adam(config.learning_rate);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        let mut log = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut ranked_right = 0usize;
            for &i in &order {
                let example = &examples[i];
                let negatives = model.sample_negatives(
                    &example.predicate,
                    graph.predicates_of(&example.subject),
                    &mut rng,
                );
                let grads = {
                    let mut tape = Tape::new(&model.params);
                    let q_encoded = model.q_encoder.encode_final(&mut tape, &example.tokens)?;
                    let pos = model.score_node(&mut tape, q_encoded, &example.predicate)?;
                    let mut losses = vec![tape.bce_loss(pos, 1.0)?];
                    let pos_score = tape.value(pos)[0];
                    let mut beaten = true;
                    for neg in &negatives {
                        let s = model.score_node(&mut tape, q_encoded, neg)?;
                        if tape.value(s)[0] >= pos_score {
                            beaten = false;
                        }
                        losses.push(tape.bce_loss(s, 0.0)?);
                    }
                    if beaten {
                        ranked_right += 1;
                    }
                    let loss = tape.mean_n(losses)?;
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
                accuracy: ranked_right as f64 / examples.len() as f64,
            });
        }
        Ok((model, log))
    }

    /// Fraction of examples whose gold predicate outranks every predicate of
    /// the gold subject under the normalized candidate distribution.
    pub fn training_accuracy(&self, examples: &[TrainExample], graph: &KnowledgeGraph) -> Result<f64> {
        let mut correct = 0usize;
        for e in examples {
            let mut candidates: BTreeSet<String> = graph.predicates_of(&e.subject).clone();
            candidates.insert(e.predicate.clone());
            let dist = self.distribution(&e.tokens, &candidates)?;
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
        let sidecar = M3Sidecar {
            config: self.config.clone(),
            q_vocab_words: self.q_encoder.vocab.words.clone(),
            p_vocab_words: self.p_encoder.vocab.words.clone(),
            predicates: self.predicates.list.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar_file = sidecar_path(path);
        let json =
            std::fs::read_to_string(&sidecar_file).map_err(|e| Error::io(&sidecar_file, e))?;
        let sidecar: M3Sidecar = serde_json::from_str(&json)?;
        let mut model = M3Model::build(
            &sidecar.config,
            WordVocab::from_words(sidecar.q_vocab_words),
            WordVocab::from_words(sidecar.p_vocab_words),
            PredicateVocabulary::from_list(sidecar.predicates),
        );
        Checkpoint::load(path)
            .and_then(|c| c.load_into(&mut model.params))
            .map_err(Error::Num)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct M3Sidecar {
    config: ModelConfig,
    q_vocab_words: Vec<String>,
    p_vocab_words: Vec<String>,
    predicates: Vec<String>,
}
