//! Bag-of-n-grams linear classifier: word 1- and 2-grams plus character
//! n-grams hashed into a fixed bucket table, mean-pooled into a hidden
//! vector and fed to a full softmax. Bucket rows are materialized lazily
//! with a hash-seeded initialization, so the 2^21 default costs memory only
//! for buckets actually touched.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use numcore::{Checkpoint, Tensor};

use crate::error::{Error, Result};
use crate::spanner::{sidecar_path, EpochStats};

use super::{ModelConfig, PredicateDistribution, PredicateVocabulary, TrainExample};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hashed feature ids: word n-grams up to `word_ngrams`, and character
/// n-grams of each `<token>`-padded token.
pub fn features(tokens: &[String], word_ngrams: usize, char_ngram: usize, bucket_bits: u32) -> Vec<u64> {
    let mask = (1u64 << bucket_bits) - 1;
    let mut out = Vec::new();
    for n in 1..=word_ngrams.max(1) {
        if tokens.len() < n {
            break;
        }
        for window in tokens.windows(n) {
            out.push(fnv1a(window.join(" ").as_bytes()) & mask);
        }
    }
    if char_ngram > 0 {
        for token in tokens {
            let padded: Vec<char> = format!("<{token}>").chars().collect();
            if padded.len() < char_ngram {
                continue;
            }
            for window in padded.windows(char_ngram) {
                let gram: String = window.iter().collect();
                out.push(fnv1a(gram.as_bytes()) & mask);
            }
        }
    }
    out
}

pub struct M4Model {
    pub config: ModelConfig,
    pub predicates: PredicateVocabulary,
    /// Lazily materialized input rows, keyed by bucket id.
    input: HashMap<u64, Vec<f64>>,
    /// Dense output matrix, `[vocab, hidden]` row-major.
    output: Vec<f64>,
}

impl M4Model {
    fn new(config: &ModelConfig, predicates: PredicateVocabulary) -> Self {
        let output = vec![0.0; predicates.len() * config.hidden_dim];
        M4Model {
            config: config.clone(),
            predicates,
            input: HashMap::new(),
            output,
        }
    }

    /// Deterministic per-bucket initialization in `±1/hidden`, independent
    /// of the order buckets are first touched.
    fn init_row(config: &ModelConfig, bucket: u64) -> Vec<f64> {
        let mix = config
            .seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(bucket.wrapping_mul(0xd1b54a32d192ed03));
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let limit = 1.0 / config.hidden_dim as f64;
        (0..config.hidden_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect()
    }

    fn row(&mut self, bucket: u64) -> &mut Vec<f64> {
        let config = &self.config;
        self.input
            .entry(bucket)
            .or_insert_with(|| Self::init_row(config, bucket))
    }

    fn hidden(&mut self, feats: &[u64]) -> Vec<f64> {
        let dim = self.config.hidden_dim;
        let mut h = vec![0.0; dim];
        if feats.is_empty() {
            return h;
        }
        for &f in feats {
            let row = self.row(f);
            for (hv, rv) in h.iter_mut().zip(row.iter()) {
                *hv += rv;
            }
        }
        for hv in h.iter_mut() {
            *hv /= feats.len() as f64;
        }
        h
    }

    fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.iter().map(|e| e / sum).collect()
    }

    pub fn extract_features(&self, tokens: &[String]) -> Vec<u64> {
        features(
            tokens,
            self.config.word_ngrams,
            self.config.char_ngram,
            self.config.bucket_bits,
        )
    }

    /// Softmax distribution over the training predicates.
    pub fn predict(&self, tokens: &[String]) -> Result<PredicateDistribution> {
        // Prediction-time bucket materialization must not mutate the model;
        // compute the hidden vector against a scratch view.
        let dim = self.config.hidden_dim;
        let feats = self.extract_features(tokens);
        let mut h = vec![0.0; dim];
        if !feats.is_empty() {
            for &f in &feats {
                match self.input.get(&f) {
                    Some(row) => {
                        for (hv, rv) in h.iter_mut().zip(row) {
                            *hv += rv;
                        }
                    }
                    None => {
                        let row = Self::init_row(&self.config, f);
                        for (hv, rv) in h.iter_mut().zip(&row) {
                            *hv += rv;
                        }
                    }
                }
            }
            for hv in h.iter_mut() {
                *hv /= feats.len() as f64;
            }
        }
        let logits: Vec<f64> = (0..self.predicates.len())
            .map(|c| {
                self.output[c * dim..(c + 1) * dim]
                    .iter()
                    .zip(&h)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let probs = Self::softmax(&logits);
        let mut out = BTreeMap::new();
        for (uri, p) in self.predicates.list.iter().zip(probs) {
            out.insert(uri.clone(), p);
        }
        Ok(PredicateDistribution::from_probs(out))
    }

    pub fn train(examples: &[TrainExample], config: &ModelConfig) -> Result<(Self, Vec<EpochStats>)> {
        if examples.is_empty() {
            return Err(Error::Data("no training examples".to_string()));
        }
        let predicates =
            PredicateVocabulary::build(examples.iter().map(|e| e.predicate.clone()));
        let mut model = M4Model::new(config, predicates);
        let dim = config.hidden_dim;

        let prepared: Vec<(Vec<u64>, usize)> = examples
            .iter()
            .map(|e| {
                (
                    model.extract_features(&e.tokens),
                    model.predicates.id(&e.predicate).expect("built from examples"),
                )
            })
            .collect();

        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        let total_steps = (config.epochs * examples.len()).max(1) as f64;
        let mut step = 0usize;
        let mut log = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for &i in &order {
                let (feats, gold) = &prepared[i];
                let lr = config.learning_rate * (1.0 - step as f64 / total_steps);
                step += 1;
                let h = model.hidden(feats);
                let probs = {
                    let logits: Vec<f64> = (0..model.predicates.len())
                        .map(|c| {
                            model.output[c * dim..(c + 1) * dim]
                                .iter()
                                .zip(&h)
                                .map(|(a, b)| a * b)
                                .sum()
                        })
                        .collect();
                    Self::softmax(&logits)
                };
                loss_sum -= probs[*gold].max(f64::MIN_POSITIVE).ln();
                let best = probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap();
                if best == *gold {
                    correct += 1;
                }

                // delta = p - onehot(gold); update output rows and feature rows.
                let mut grad_h = vec![0.0; dim];
                for (c, p) in probs.iter().enumerate() {
                    let delta = p - f64::from(c == *gold);
                    let row = &mut model.output[c * dim..(c + 1) * dim];
                    for k in 0..dim {
                        grad_h[k] += delta * row[k];
                        row[k] -= lr * delta * h[k];
                    }
                }
                if !feats.is_empty() {
                    let scale = lr / feats.len() as f64;
                    for &f in feats {
                        let row = model.row(f);
                        for k in 0..dim {
                            row[k] -= scale * grad_h[k];
                        }
                    }
                }
            }
            log.push(EpochStats {
                epoch: epoch + 1,
                loss: loss_sum / examples.len() as f64,
                accuracy: correct as f64 / examples.len() as f64,
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

    /// Persist as a checkpoint: touched bucket ids, their rows, and the
    /// output matrix, plus the usual JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dim = self.config.hidden_dim;
        let mut buckets: Vec<u64> = self.input.keys().copied().collect();
        buckets.sort_unstable();
        let ids: Vec<f64> = buckets.iter().map(|&b| b as f64).collect();
        let mut rows = Vec::with_capacity(buckets.len() * dim);
        for &b in &buckets {
            rows.extend_from_slice(&self.input[&b]);
        }
        let checkpoint = Checkpoint {
            seed: self.config.seed,
            tensors: vec![
                (
                    "m4.bucket_ids".to_string(),
                    Tensor::new(vec![buckets.len()], ids).map_err(Error::Num)?,
                ),
                (
                    "m4.bucket_rows".to_string(),
                    Tensor::new(vec![buckets.len(), dim], rows).map_err(Error::Num)?,
                ),
                (
                    "m4.output".to_string(),
                    Tensor::new(vec![self.predicates.len(), dim], self.output.clone())
                        .map_err(Error::Num)?,
                ),
            ],
        };
        checkpoint.save(path).map_err(Error::Num)?;
        let sidecar = M4Sidecar {
            config: self.config.clone(),
            predicates: self.predicates.list.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar_file = sidecar_path(path);
        let json =
            std::fs::read_to_string(&sidecar_file).map_err(|e| Error::io(&sidecar_file, e))?;
        let sidecar: M4Sidecar = serde_json::from_str(&json)?;
        let checkpoint = Checkpoint::load(path).map_err(Error::Num)?;
        let mut tensors: HashMap<String, Tensor> = checkpoint.tensors.into_iter().collect();
        let (ids, rows, output) = match (
            tensors.remove("m4.bucket_ids"),
            tensors.remove("m4.bucket_rows"),
            tensors.remove("m4.output"),
        ) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Data(format!(
                    "{}: checkpoint is missing bag-of-n-grams tensors",
                    path.display()
                )))
            }
        };
        let dim = sidecar.config.hidden_dim;
        let predicates = PredicateVocabulary::from_list(sidecar.predicates);
        let mut model = M4Model::new(&sidecar.config, predicates);
        model.output = output.values().to_vec();
        for (i, id) in ids.values().iter().enumerate() {
            let row = rows.values()[i * dim..(i + 1) * dim].to_vec();
            model.input.insert(*id as u64, row);
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct M4Sidecar {
    config: ModelConfig,
    predicates: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn word_and_char_features_are_extracted() {
        let f = features(&toks("who wrote e"), 2, 5, 21);
        // 3 unigrams + 2 bigrams + char 5-grams of "<who>", "<wrote>", "<e>".
        // "<who>" has 1, "<wrote>" has 3, "<e>" is too short.
        assert_eq!(f.len(), 3 + 2 + 1 + 3);
    }

    #[test]
    fn shared_tokens_share_features_despite_oov_word() {
        let a = features(&toks("who wrote zzzqqq"), 2, 5, 21);
        let b = features(&toks("who wrote yyyxxx"), 2, 5, 21);
        let sa: std::collections::BTreeSet<u64> = a.into_iter().collect();
        let sb: std::collections::BTreeSet<u64> = b.into_iter().collect();
        let inter = sa.intersection(&sb).count();
        let union = sa.union(&sb).count();
        assert!(inter > 0, "no shared features");
        assert!((inter as f64) / (union as f64) > 0.0);
    }

    #[test]
    fn feature_ids_respect_bucket_mask() {
        for f in features(&toks("a bag of grams"), 2, 5, 8) {
            assert!(f < 256);
        }
    }
}
