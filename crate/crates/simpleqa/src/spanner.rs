//! Subject-span inference: weakly supervised span labels, the IO-tagging
//! BiLSTM/char-CNN recognizer, and edit-distance snapping of tagger output
//! onto index-matching n-grams.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use numcore::{BiLstm, CharAlphabet, CharCnn, Checkpoint, Dense, Embedding, OptimizerState, ParamSet, Tape};

use crate::error::{Error, Result};
use crate::surface::{extract_ngrams, normalize_surface, SurfaceFormIndex};
use crate::wordvec::WordVectors;

/// One dataset record: a question and its gold (subject, predicate) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question: String,
    pub subject: String,
    pub predicate: String,
    pub object: Option<String>,
}

/// Read a `subject \t predicate \t object \t question` dataset file.
/// Malformed lines are skipped with a warning; more than 10% is an error.
pub fn read_dataset(path: &Path) -> Result<Vec<QuestionRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut lines = 0usize;
    let mut malformed = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        lines += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 || fields[0].is_empty() || fields[1].is_empty() || fields[3].is_empty()
        {
            malformed += 1;
            warn!("{}:{}: malformed dataset line, skipped", path.display(), idx + 1);
            continue;
        }
        records.push(QuestionRecord {
            question: fields[3].to_string(),
            subject: fields[0].to_string(),
            predicate: fields[1].to_string(),
            object: (!fields[2].is_empty()).then(|| fields[2].to_string()),
        });
    }
    if malformed * 10 > lines {
        return Err(Error::Data(format!(
            "{}: {malformed} of {lines} lines malformed (>10%)",
            path.display()
        )));
    }
    Ok(records)
}

/// IO label for one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    I,
    O,
}

/// Tokenized question with IO labels and the merged mention span (inclusive
/// token interval).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanAnnotation {
    pub tokens: Vec<String>,
    pub labels: Vec<Label>,
    pub span: Option<(usize, usize)>,
}

/// Case of the original (pre-normalization) token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseClass {
    Lower,
    Upper,
    Mixed,
}

impl CaseClass {
    pub const COUNT: usize = 3;

    pub fn of(token: &str) -> Self {
        let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
        if letters.is_empty() || letters.iter().all(|c| c.is_lowercase()) {
            CaseClass::Lower
        } else if letters.iter().all(|c| c.is_uppercase()) {
            CaseClass::Upper
        } else {
            CaseClass::Mixed
        }
    }

    pub fn index(self) -> usize {
        match self {
            CaseClass::Lower => 0,
            CaseClass::Upper => 1,
            CaseClass::Mixed => 2,
        }
    }
}

/// A question token: normalized text plus surface features of the original.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasedToken {
    /// Normalized form, equal to the corresponding `normalize_surface` token.
    pub text: String,
    /// Original spelling, for character features.
    pub cased: String,
    pub case: CaseClass,
}

/// Tokenize keeping case information. The sequence of `text` fields equals
/// the whitespace tokens of `normalize_surface(raw)`.
pub fn tokenize_with_case(raw: &str) -> Vec<CasedToken> {
    let replaced: String = raw
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut out = Vec::new();
    for cased in replaced.split_whitespace() {
        let case = CaseClass::of(cased);
        let normalized = normalize_surface(cased);
        if normalized.is_empty() {
            continue;
        }
        for piece in normalized.split_whitespace() {
            out.push(CasedToken {
                text: piece.to_string(),
                cased: cased.to_string(),
                case,
            });
        }
    }
    out
}

/// Unit-cost Levenshtein distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Weak supervision: the first n-gram (longest first, then leftmost) whose
/// index lookup contains the expected URI.
pub fn find_span(
    question: &str,
    gold_subject_uri: &str,
    index: &SurfaceFormIndex,
    max_ngram: usize,
) -> Option<String> {
    extract_ngrams(question, max_ngram)
        .into_iter()
        .find(|ngram| index.contains_uri(ngram, gold_subject_uri))
}

/// Label the question tokens I over the mention span (leftmost occurrence)
/// and O elsewhere. The mention must be a contiguous token subsequence.
pub fn label_tokens(question: &str, mention: &str) -> Result<SpanAnnotation> {
    let tokens: Vec<String> = tokenize_with_case(question)
        .into_iter()
        .map(|t| t.text)
        .collect();
    let normalized_mention = normalize_surface(mention);
    let mention_tokens: Vec<&str> = normalized_mention.split_whitespace().collect();
    if mention_tokens.is_empty() {
        return Err(Error::Data(format!(
            "mention `{mention}` normalizes to nothing"
        )));
    }
    let window = mention_tokens.len();
    let start = (0..(tokens.len() + 1).saturating_sub(window)).find(|&s| {
        tokens[s..s + window]
            .iter()
            .zip(&mention_tokens)
            .all(|(a, b)| a == b)
    });
    let start = start.ok_or_else(|| {
        Error::Data(format!(
            "mention `{mention}` is not a contiguous token subsequence of `{question}`"
        ))
    })?;
    let end = start + window - 1;
    let labels = (0..tokens.len())
        .map(|i| if i >= start && i <= end { Label::I } else { Label::O })
        .collect();
    Ok(SpanAnnotation {
        tokens,
        labels,
        span: Some((start, end)),
    })
}

/// First maximal run of I labels, if any.
pub fn first_i_run(labels: &[Label]) -> Option<(usize, usize)> {
    let start = labels.iter().position(|l| *l == Label::I)?;
    let mut end = start;
    while end + 1 < labels.len() && labels[end + 1] == Label::I {
        end += 1;
    }
    Some((start, end))
}

/// Snap a raw tagged span onto the question n-gram with a non-empty index
/// lookup that minimizes edit distance. Ties prefer longer, then leftmost
/// n-grams (the enumeration order).
pub fn snap_to_index(
    raw_span: &str,
    question: &str,
    index: &SurfaceFormIndex,
    max_ngram: usize,
) -> Option<String> {
    let mut best: Option<(usize, String)> = None;
    for ngram in extract_ngrams(question, max_ngram) {
        if index.lookup(&ngram).is_empty() {
            continue;
        }
        let d = levenshtein(raw_span, &ngram);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, ngram));
        }
    }
    best.map(|(_, ngram)| ngram)
}

/// Hyper-parameters for the span recognizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NerConfig {
    pub word_dim: usize,
    pub char_filters: usize,
    pub char_widths: Vec<usize>,
    pub lstm_dim: usize,
    pub case_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_ngram: usize,
}

impl Default for NerConfig {
    fn default() -> Self {
        NerConfig {
            word_dim: 100,
            char_filters: 100,
            char_widths: vec![2, 3, 4],
            lstm_dim: 300,
            case_dim: 4,
            epochs: 15,
            learning_rate: 1e-3,
            seed: 1,
            max_ngram: 5,
        }
    }
}

/// Word vocabulary with UNK at index 0, in sorted order for reproducibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordVocab {
    pub words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

pub const UNK_WORD: &str = "<unk>";

impl WordVocab {
    pub fn build(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut set: std::collections::BTreeSet<String> = tokens.into_iter().collect();
        set.remove(UNK_WORD);
        let mut words = vec![UNK_WORD.to_string()];
        words.extend(set);
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        WordVocab { words, index }
    }

    /// Restore a persisted word list, including its UNK slot.
    pub fn from_words(words: Vec<String>) -> Self {
        let mut vocab = WordVocab {
            words,
            index: HashMap::new(),
        };
        vocab.reindex();
        vocab
    }

    /// Rebuild the lookup map after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }
}

struct NerLayers {
    word_emb: Embedding,
    char_cnn: CharCnn,
    case_emb: Embedding,
    bilstm: BiLstm,
    out: Dense,
}

fn build_layers(params: &mut ParamSet, config: &NerConfig, vocab_size: usize) -> NerLayers {
    let word_emb = Embedding::new(params, "ner.word_emb", vocab_size, config.word_dim);
    let char_cnn = CharCnn::new(params, "ner.char_cnn", &config.char_widths, config.char_filters);
    let case_emb = Embedding::new(params, "ner.case_emb", CaseClass::COUNT, config.case_dim);
    let input_dim = config.word_dim + config.char_filters + config.case_dim;
    let bilstm = BiLstm::new(params, "ner.bilstm", input_dim, config.lstm_dim);
    let out = Dense::new(params, "ner.out", 2 * config.lstm_dim, 1);
    NerLayers {
        word_emb,
        char_cnn,
        case_emb,
        bilstm,
        out,
    }
}

/// Trained span recognizer. Read-only after training.
pub struct NerModel {
    pub config: NerConfig,
    pub vocab: WordVocab,
    params: ParamSet,
    layers: NerLayers,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Outcome of NER training: the model, per-epoch log, and the number of
/// records weak supervision could not label.
pub struct NerTraining {
    pub model: NerModel,
    pub log: Vec<EpochStats>,
    pub skipped: usize,
    pub used: usize,
}

struct TokenFeatures {
    word: usize,
    chars: Vec<usize>,
    case: usize,
}

fn featurize(vocab: &WordVocab, tokens: &[CasedToken]) -> Vec<TokenFeatures> {
    tokens
        .iter()
        .map(|t| TokenFeatures {
            word: vocab.id(&t.text),
            chars: CharAlphabet::encode(&t.cased),
            case: t.case.index(),
        })
        .collect()
}

impl NerModel {
    fn forward_probs(&self, tape: &mut Tape, feats: &[TokenFeatures]) -> Result<Vec<numcore::NodeId>> {
        let mut inputs = Vec::with_capacity(feats.len());
        for f in feats {
            let w = self.layers.word_emb.forward(tape, f.word)?;
            let c = self.layers.char_cnn.forward(tape, &f.chars)?;
            let k = self.layers.case_emb.forward(tape, f.case)?;
            inputs.push(tape.concat(vec![w, c, k])?);
        }
        let encoded = self.layers.bilstm.encode(tape, &inputs)?;
        let mut probs = Vec::with_capacity(feats.len());
        for h in &encoded.hidden {
            let z = self.layers.out.forward(tape, *h)?;
            probs.push(tape.sigmoid(z));
        }
        Ok(probs)
    }

    /// Tag a question with IO labels and the first maximal I-run.
    pub fn tag(&self, question: &str) -> Result<SpanAnnotation> {
        let tokens = tokenize_with_case(question);
        if tokens.is_empty() {
            return Ok(SpanAnnotation {
                tokens: Vec::new(),
                labels: Vec::new(),
                span: None,
            });
        }
        let feats = featurize(&self.vocab, &tokens);
        let mut tape = Tape::new(&self.params);
        let probs = self.forward_probs(&mut tape, &feats)?;
        let labels: Vec<Label> = probs
            .iter()
            .map(|p| if tape.value(*p)[0] > 0.5 { Label::I } else { Label::O })
            .collect();
        let span = first_i_run(&labels);
        Ok(SpanAnnotation {
            tokens: tokens.into_iter().map(|t| t.text).collect(),
            labels,
            span,
        })
    }

    /// Full prediction: tag, merge the first I-run, then snap the raw span
    /// onto an index-matching n-gram by edit distance.
    pub fn predict_mention(
        &self,
        question: &str,
        index: &SurfaceFormIndex,
        max_ngram: usize,
    ) -> Result<Option<String>> {
        let annotation = self.tag(question)?;
        let Some((start, end)) = annotation.span else {
            return Ok(None);
        };
        let raw = annotation.tokens[start..=end].join(" ");
        Ok(snap_to_index(&raw, question, index, max_ngram))
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_params(&self.params)
            .save(path)
            .map_err(Error::Num)?;
        let sidecar = NerSidecar {
            config: self.config.clone(),
            vocab_words: self.vocab.words.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(sidecar_path(path), json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar_file = sidecar_path(path);
        let json = std::fs::read_to_string(&sidecar_file)
            .map_err(|e| Error::io(&sidecar_file, e))?;
        let sidecar: NerSidecar = serde_json::from_str(&json)?;
        let vocab = WordVocab::from_words(sidecar.vocab_words);
        let checkpoint = Checkpoint::load(path).map_err(Error::Num)?;
        let mut params = ParamSet::new(checkpoint.seed);
        let layers = build_layers(&mut params, &sidecar.config, vocab.len());
        checkpoint.load_into(&mut params).map_err(Error::Num)?;
        Ok(NerModel {
            config: sidecar.config,
            vocab,
            params,
            layers,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct NerSidecar {
    config: NerConfig,
    vocab_words: Vec<String>,
}

pub fn sidecar_path(checkpoint: &Path) -> std::path::PathBuf {
    let mut p = checkpoint.as_os_str().to_owned();
    p.push(".json");
    std::path::PathBuf::from(p)
}

/// Train the recognizer with weak supervision. Records whose span cannot be
/// inferred are skipped (counted); training on zero records is an error.
pub fn train_ner(
    dataset: &[QuestionRecord],
    index: &SurfaceFormIndex,
    config: &NerConfig,
    word_vectors: Option<&WordVectors>,
) -> Result<NerTraining> {
    if dataset.is_empty() {
        return Err(Error::Data("NER training dataset is empty".to_string()));
    }
    let mut examples = Vec::new();
    let mut skipped = 0usize;
    for record in dataset {
        match find_span(&record.question, &record.subject, index, config.max_ngram) {
            Some(mention) => {
                let annotation = label_tokens(&record.question, &mention)?;
                examples.push((record, annotation));
            }
            None => skipped += 1,
        }
    }
    if examples.is_empty() {
        return Err(Error::Data(format!(
            "weak supervision produced no training spans ({skipped} records skipped)"
        )));
    }

    let vocab = WordVocab::build(
        examples
            .iter()
            .flat_map(|(_, a)| a.tokens.iter().cloned()),
    );
    let mut params = ParamSet::new(config.seed);
    let layers = build_layers(&mut params, config, vocab.len());
    if let Some(vectors) = word_vectors {
        vectors.initialize_embedding(&mut params, layers.word_emb.table, &vocab, config.word_dim)?;
    }
    let model = NerModel {
        config: config.clone(),
        vocab,
        params,
        layers,
    };
    let mut model = model;

    let prepared: Vec<(Vec<TokenFeatures>, Vec<f64>)> = examples
        .iter()
        .map(|(record, annotation)| {
            let tokens = tokenize_with_case(&record.question);
            let feats = featurize(&model.vocab, &tokens);
            let targets = annotation
                .labels
                .iter()
                .map(|l| if *l == Label::I { 1.0 } else { 0.0 })
                .collect();
            (feats, targets)
        })
        .collect();

    let mut optimizer = OptimizerState::adam(config.learning_rate);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut total = 0usize;
        for &i in &order {
            let (feats, targets) = &prepared[i];
            let grads = {
                let mut tape = Tape::new(&model.params);
                let probs = model.forward_probs(&mut tape, feats)?;
                let mut losses = Vec::with_capacity(probs.len());
                for (p, y) in probs.iter().zip(targets) {
                    let value = tape.value(*p)[0];
                    if (value > 0.5) == (*y == 1.0) {
                        correct += 1;
                    }
                    total += 1;
                    losses.push(tape.bce_loss(*p, *y)?);
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
            loss: loss_sum / prepared.len() as f64,
            accuracy: correct as f64 / total as f64,
        });
    }

    Ok(NerTraining {
        model,
        log,
        skipped,
        used: prepared.len(),
    })
}

/// Token-level accuracy of the tagger against weak-supervision labels.
pub fn token_accuracy(
    model: &NerModel,
    dataset: &[QuestionRecord],
    index: &SurfaceFormIndex,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for record in dataset {
        let Some(mention) =
            find_span(&record.question, &record.subject, index, model.config.max_ngram)
        else {
            continue;
        };
        let expected = label_tokens(&record.question, &mention)?;
        let got = model.tag(&record.question)?;
        for (e, g) in expected.labels.iter().zip(&got.labels) {
            total += 1;
            if e == g {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Data("no labeled tokens to score".to_string()));
    }
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_index() -> SurfaceFormIndex {
        let mut idx = SurfaceFormIndex::new();
        idx.add("mildred pierced", "m.04t1ftb", 11);
        idx.add("mildred pierced", "m.04t_038", 8);
        idx.add("mildred pierced", "m.0cgv06r", 7);
        idx.add("pierced", "m.0other", 2);
        idx
    }

    #[test]
    fn levenshtein_identity_and_empties() {
        assert_eq!(levenshtein("same", "same"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
    }

    #[test]
    fn levenshtein_textbook_case() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    // Full-matrix reference implementation, kept in textbook shape.
    #[allow(clippy::needless_range_loop)]
    fn levenshtein_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            m[i][0] = i;
        }
        for j in 0..=b.len() {
            m[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                m[i][j] = (m[i - 1][j] + 1)
                    .min(m[i][j - 1] + 1)
                    .min(m[i - 1][j - 1] + cost);
            }
        }
        m[a.len()][b.len()]
    }

    proptest! {
        #[test]
        fn levenshtein_matches_full_matrix_and_is_a_metric(
            a in "[a-d]{0,8}",
            b in "[a-d]{0,8}",
            c in "[a-d]{0,8}",
        ) {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, levenshtein_oracle(&a, &b));
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            let ac = levenshtein(&a, &c);
            let cb = levenshtein(&c, &b);
            prop_assert!(ab <= ac + cb, "triangle inequality violated");
        }
    }

    #[test]
    fn tokenize_aligns_with_normalized_question() {
        let raw = "Who wrote Mildred-Pierced?!";
        let tokens = tokenize_with_case(raw);
        let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        let normalized = crate::surface::normalize_surface(raw);
        let expected: Vec<&str> = normalized.split_whitespace().collect();
        assert_eq!(texts, expected);
        assert_eq!(tokens[0].case, CaseClass::Mixed);
        assert_eq!(tokens[1].case, CaseClass::Lower);
    }

    #[test]
    fn case_classes() {
        assert_eq!(CaseClass::of("who"), CaseClass::Lower);
        assert_eq!(CaseClass::of("NASA"), CaseClass::Upper);
        assert_eq!(CaseClass::of("Mildred"), CaseClass::Mixed);
        assert_eq!(CaseClass::of("123"), CaseClass::Lower);
    }

    #[test]
    fn find_span_returns_the_expected_mention() {
        let index = sample_index();
        let span = find_span("who wrote mildred pierced?", "m.04t1ftb", &index, 5);
        assert_eq!(span.as_deref(), Some("mildred pierced"));
    }

    #[test]
    fn find_span_absent_uri_returns_none() {
        let index = sample_index();
        assert!(find_span("who wrote mildred pierced?", "m.not_there", &index, 5).is_none());
    }

    #[test]
    fn find_span_prefers_longest_first_order() {
        // The gold URI is reachable through two n-grams; enumerate the
        // matches by brute force and apply the ordering rule.
        let mut index = SurfaceFormIndex::new();
        index.add("mildred pierced", "m.04t1ftb", 5);
        index.add("pierced", "m.04t1ftb", 2);
        let question = "who wrote mildred pierced";
        let matches: Vec<String> = extract_ngrams(question, 5)
            .into_iter()
            .filter(|g| index.contains_uri(g, "m.04t1ftb"))
            .collect();
        assert_eq!(matches, ["mildred pierced", "pierced"]);
        let span = find_span(question, "m.04t1ftb", &index, 5);
        assert_eq!(span.as_deref(), Some(matches[0].as_str()));
    }

    #[test]
    fn find_span_result_always_contains_gold() {
        let index = sample_index();
        for question in [
            "who wrote mildred pierced?",
            "mildred pierced",
            "is pierced mildred pierced",
        ] {
            if let Some(span) = find_span(question, "m.04t1ftb", &index, 5) {
                assert!(index.contains_uri(&span, "m.04t1ftb"));
            }
        }
    }

    #[test]
    fn label_tokens_marks_the_mention_span() {
        let ann = label_tokens("who wrote mildred pierced", "mildred pierced").unwrap();
        assert_eq!(ann.tokens, ["who", "wrote", "mildred", "pierced"]);
        assert_eq!(ann.labels, [Label::O, Label::O, Label::I, Label::I]);
        assert_eq!(ann.span, Some((2, 3)));
    }

    #[test]
    fn label_tokens_whole_question_is_all_inside() {
        let ann = label_tokens("Mildred Pierced", "mildred pierced").unwrap();
        assert_eq!(ann.labels, [Label::I, Label::I]);
        assert_eq!(ann.span, Some((0, 1)));
    }

    #[test]
    fn label_tokens_rejects_non_contiguous_mention() {
        assert!(label_tokens("who wrote mildred pierced", "who pierced").is_err());
    }

    #[test]
    fn first_run_keeps_only_the_first_maximal_block() {
        use Label::{I, O};
        assert_eq!(first_i_run(&[O, I, I, O, I]), Some((1, 2)));
        assert_eq!(first_i_run(&[I, I, I]), Some((0, 2)));
        assert_eq!(first_i_run(&[O, O]), None);
    }

    #[test]
    fn snapping_picks_minimum_edit_distance() {
        let index = sample_index();
        // Raw tagger output is one letter short of the indexed form.
        let snapped = snap_to_index("mildred pierce", "who wrote mildred pierced", &index, 5);
        assert_eq!(snapped.as_deref(), Some("mildred pierced"));
        assert_eq!(levenshtein("mildred pierce", "mildred pierced"), 1);
        assert_eq!(levenshtein("mildred pierce", "pierced"), 9);
    }

    #[test]
    fn snapping_without_index_matches_returns_none() {
        let index = SurfaceFormIndex::new();
        assert!(snap_to_index("anything", "some question text", &index, 5).is_none());
    }

    #[test]
    fn snapped_mention_always_has_index_entries() {
        let index = sample_index();
        if let Some(m) = snap_to_index("garbage span", "who wrote mildred pierced", &index, 5) {
            assert!(!index.lookup(&m).is_empty());
        }
    }

    #[test]
    fn dataset_reader_parses_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        std::fs::write(
            &path,
            "m.1\tbook.author\tm.2\twho wrote x?\n\
             m.3\tfilm.director\t\twho directed y?\n\
             broken line\n\
             m.4\tmusic.artist\tm.5\twho sang z?\n\
             m.6\tgeo.country\tm.7\twhere is w?\n\
             m.8\tfood.cuisine\tm.9\twhat cuisine is v?\n\
             m.a\ttv.creator\tm.b\twho created u?\n\
             m.c\torg.founder\tm.d\twho founded t?\n\
             m.e\tbio.habitat\tm.f\twhere lives s?\n\
             m.g\tsports.coach\tm.h\twho coaches r?\n\
             m.i\tpeople.job\tm.j\twhat job has q?\n",
        )
        .unwrap();
        let records = read_dataset(&path).unwrap();
        assert_eq!(records.len(), 10);
        assert_eq!(records[0].subject, "m.1");
        assert_eq!(records[0].question, "who wrote x?");
        assert_eq!(records[1].object, None);
    }

    #[test]
    fn dataset_reader_rejects_too_many_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "only one field\nanother bad\nm.1\tp\to\tq?\n").unwrap();
        assert!(read_dataset(&path).is_err());
    }
}
