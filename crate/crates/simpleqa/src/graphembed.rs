//! Role-specific knowledge-base embeddings. Triple completion is cast as
//! classification: a linear bag-of-tokens model predicts the subject from
//! (predicate, object) and the object from (predicate, subject), trained
//! with a negative-sampling objective. Input-side vectors are exported as
//! the embedding table.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbstore::{KnowledgeGraph, Triple};
use crate::spanner::levenshtein;

/// Role of a URI within a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Subject,
    Object,
}

impl Role {
    pub fn suffix(self) -> &'static str {
        match self {
            Role::Subject => "#s",
            Role::Object => "#o",
        }
    }
}

/// URI tagged with its role; subject- and object-role tokens of the same URI
/// are distinct vocabulary items.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoleToken {
    pub uri: String,
    pub role: Role,
}

impl RoleToken {
    pub fn subject(uri: impl Into<String>) -> Self {
        RoleToken {
            uri: uri.into(),
            role: Role::Subject,
        }
    }

    pub fn object(uri: impl Into<String>) -> Self {
        RoleToken {
            uri: uri.into(),
            role: Role::Object,
        }
    }

    pub fn token_string(&self) -> String {
        format!("{}{}", self.uri, self.role.suffix())
    }

    pub fn parse(s: &str) -> Result<Self> {
        if let Some(uri) = s.strip_suffix("#s") {
            Ok(RoleToken::subject(uri))
        } else if let Some(uri) = s.strip_suffix("#o") {
            Ok(RoleToken::object(uri))
        } else {
            Err(Error::Data(format!("`{s}` has no role suffix")))
        }
    }
}

/// One classification sample: predict `target` from the two `inputs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleSample {
    pub target: RoleToken,
    pub inputs: [RoleToken; 2],
}

/// The two samples a triple contributes: subject predicted from
/// (predicate#s, object#o), and object predicted from (predicate#o,
/// subject#s).
pub fn generate_samples(triple: &Triple) -> [TripleSample; 2] {
    [
        TripleSample {
            target: RoleToken::subject(&triple.subject),
            inputs: [
                RoleToken::subject(&triple.predicate),
                RoleToken::object(&triple.object),
            ],
        },
        TripleSample {
            target: RoleToken::object(&triple.object),
            inputs: [
                RoleToken::object(&triple.predicate),
                RoleToken::subject(&triple.subject),
            ],
        },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 200,
            epochs: 5,
            negatives: 5,
            learning_rate: 0.05,
            seed: 1,
        }
    }
}

/// Input-side role-token vectors of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl EmbeddingTable {
    fn new(dim: usize, tokens: Vec<String>, vectors: Vec<f64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        EmbeddingTable {
            dim,
            tokens,
            index,
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Role vector of a trained predicate. Unknown predicates report the
    /// closest known URIs by edit distance.
    pub fn predicate_embedding(&self, uri: &str, role: Role) -> Result<&[f64]> {
        let token = format!("{uri}{}", role.suffix());
        if let Some(v) = self.get(&token) {
            return Ok(v);
        }
        let mut candidates: Vec<(usize, &str)> = self
            .tokens
            .iter()
            .filter_map(|t| t.strip_suffix(role.suffix()))
            .map(|u| (levenshtein(uri, u), u))
            .collect();
        candidates.sort();
        let nearest: Vec<&str> = candidates.iter().take(3).map(|(_, u)| *u).collect();
        Err(Error::Data(format!(
            "no trained embedding for `{uri}` (role {role:?}); nearest known: {}",
            nearest.join(", ")
        )))
    }

    /// Text format: `count dim` header, then one role token per line followed
    /// by its values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{} {}", self.tokens.len(), self.dim).map_err(|e| Error::io(path, e))?;
        for (i, token) in self.tokens.iter().enumerate() {
            let row = &self.vectors[i * self.dim..(i + 1) * self.dim];
            let values: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{token} {}", values.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines().enumerate();
        let (count, dim) = match lines.next() {
            Some((_, Ok(header))) => {
                let parts: Vec<&str> = header.split_whitespace().collect();
                let parsed = (parts.len() == 2)
                    .then(|| Some((parts[0].parse::<usize>().ok()?, parts[1].parse::<usize>().ok()?)))
                    .flatten();
                parsed.ok_or_else(|| Error::parse(path, 1, "expected `count dim` header"))?
            }
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(Error::parse(path, 1, "empty embedding file")),
        };
        let mut tokens = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| Error::parse(path, idx + 1, "missing token"))?;
            let values: std::result::Result<Vec<f64>, _> =
                fields.map(str::parse::<f64>).collect();
            let values =
                values.map_err(|e| Error::parse(path, idx + 1, format!("bad float: {e}")))?;
            if values.len() != dim {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("vector has {} dims, header says {dim}", values.len()),
                ));
            }
            tokens.push(token.to_string());
            vectors.extend(values);
        }
        if tokens.len() != count {
            return Err(Error::Data(format!(
                "{}: header promises {count} tokens, found {}",
                path.display(),
                tokens.len()
            )));
        }
        Ok(EmbeddingTable::new(dim, tokens, vectors))
    }
}

/// Internal trainable state: input and output matrices plus the noise
/// distribution over targets.
struct Trainer {
    dim: usize,
    tokens: Vec<String>,
    token_index: HashMap<String, usize>,
    input: Vec<f64>,
    output: Vec<f64>,
    /// Cumulative distribution over target indices, unigram^(3/4).
    noise_cdf: Vec<f64>,
    noise_targets: Vec<usize>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Trainer {
    fn new(samples: &[TripleSample], config: &EmbedConfig, rng: &mut ChaCha8Rng) -> Self {
        // Sorted vocabulary over every role token in any sample.
        let mut vocab: BTreeMap<String, u64> = BTreeMap::new();
        let mut target_counts: BTreeMap<String, u64> = BTreeMap::new();
        for s in samples {
            *vocab.entry(s.target.token_string()).or_default() += 1;
            *target_counts.entry(s.target.token_string()).or_default() += 1;
            for i in &s.inputs {
                *vocab.entry(i.token_string()).or_default() += 1;
            }
        }
        let tokens: Vec<String> = vocab.keys().cloned().collect();
        let token_index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();

        let dim = config.dim;
        let limit = 1.0 / dim as f64;
        let input: Vec<f64> = (0..tokens.len() * dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let output = vec![0.0; tokens.len() * dim];

        let mut noise_targets = Vec::with_capacity(target_counts.len());
        let mut noise_cdf = Vec::with_capacity(target_counts.len());
        let mut acc = 0.0;
        for (token, count) in &target_counts {
            acc += (*count as f64).powf(0.75);
            noise_targets.push(token_index[token]);
            noise_cdf.push(acc);
        }
        for v in noise_cdf.iter_mut() {
            *v /= acc;
        }

        Trainer {
            dim,
            tokens,
            token_index,
            input,
            output,
            noise_cdf,
            noise_targets,
        }
    }

    fn sample_negative(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random_range(0.0..1.0);
        let pos = self.noise_cdf.partition_point(|&c| c < u);
        self.noise_targets[pos.min(self.noise_targets.len() - 1)]
    }

    fn hidden(&self, inputs: &[usize; 2]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim];
        for &i in inputs {
            let row = &self.input[i * self.dim..(i + 1) * self.dim];
            for (hv, rv) in h.iter_mut().zip(row) {
                *hv += rv;
            }
        }
        for hv in h.iter_mut() {
            *hv /= 2.0;
        }
        h
    }

    #[cfg(test)]
    fn score(&self, target: usize, inputs: &[usize; 2]) -> f64 {
        let h = self.hidden(inputs);
        let row = &self.output[target * self.dim..(target + 1) * self.dim];
        sigmoid(row.iter().zip(&h).map(|(a, b)| a * b).sum())
    }

    /// One positive update with `k` sampled negatives. Returns the sample
    /// loss before the update.
    fn update(
        &mut self,
        target: usize,
        inputs: &[usize; 2],
        k: usize,
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let h = self.hidden(inputs);
        let mut grad_h = vec![0.0; self.dim];
        let mut loss = 0.0;
        let mut pairs: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        pairs.push((target, 1.0));
        for _ in 0..k {
            pairs.push((self.sample_negative(rng), 0.0));
        }
        for (idx, label) in pairs {
            let row = &mut self.output[idx * self.dim..(idx + 1) * self.dim];
            let dot: f64 = row.iter().zip(&h).map(|(a, b)| a * b).sum();
            let p = sigmoid(dot);
            loss -= if label == 1.0 {
                p.max(f64::MIN_POSITIVE).ln()
            } else {
                (1.0 - p).max(f64::MIN_POSITIVE).ln()
            };
            let g = (label - p) * lr;
            for (gh, rv) in grad_h.iter_mut().zip(row.iter()) {
                *gh += g * rv;
            }
            for (rv, hv) in row.iter_mut().zip(&h) {
                *rv += g * hv;
            }
        }
        // Mean over two inputs: each receives half the hidden gradient.
        for &i in inputs {
            let row = &mut self.input[i * self.dim..(i + 1) * self.dim];
            for (rv, gh) in row.iter_mut().zip(&grad_h) {
                *rv += gh / 2.0;
            }
        }
        loss
    }

    fn into_table(self) -> EmbeddingTable {
        EmbeddingTable::new(self.dim, self.tokens, self.input)
    }
}

/// Train the table on every sample the graph generates, reporting the mean
/// sample loss per epoch. Deterministic given the seed; negatives follow the
/// unigram target distribution raised to 3/4.
pub fn train_embeddings_logged(
    graph: &KnowledgeGraph,
    config: &EmbedConfig,
) -> Result<(EmbeddingTable, Vec<crate::spanner::EpochStats>)> {
    if graph.is_empty() {
        return Err(Error::Data("cannot train embeddings on an empty graph".to_string()));
    }
    if config.dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".to_string()));
    }
    let samples: Vec<TripleSample> = graph.triples().iter().flat_map(generate_samples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trainer = Trainer::new(&samples, config, &mut rng);

    let indexed: Vec<(usize, [usize; 2])> = samples
        .iter()
        .map(|s| {
            (
                trainer.token_index[&s.target.token_string()],
                [
                    trainer.token_index[&s.inputs[0].token_string()],
                    trainer.token_index[&s.inputs[1].token_string()],
                ],
            )
        })
        .collect();

    let total_steps = (config.epochs * indexed.len()).max(1) as f64;
    let mut step = 0usize;
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        for (target, inputs) in &indexed {
            let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
            loss_sum += trainer.update(*target, inputs, config.negatives, lr, &mut rng);
            step += 1;
        }
        log.push(crate::spanner::EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / indexed.len() as f64,
            accuracy: f64::NAN,
        });
    }
    Ok((trainer.into_table(), log))
}

/// [`train_embeddings_logged`] without the log.
pub fn train_embeddings(graph: &KnowledgeGraph, config: &EmbedConfig) -> Result<EmbeddingTable> {
    train_embeddings_logged(graph, config).map(|(table, _)| table)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}
