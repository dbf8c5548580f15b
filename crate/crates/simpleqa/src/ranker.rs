//! Candidate pair generation and scoring: S(m) from the surface index,
//! C(m) = S(m) x Pred(s), joint score = P(p|q) * P(s|q), best pair by
//! argmax with deterministic tie-breaking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kbstore::KnowledgeGraph;
use crate::predicate::{mask_entity, PredicateModel};
use crate::spanner::NerModel;
use crate::surface::SurfaceFormIndex;

/// A scored (subject, predicate) candidate. The joint score is exactly the
/// product of its two stored components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub subject: String,
    pub predicate: String,
    pub subject_prior: f64,
    pub predicate_prob: f64,
    pub score: f64,
}

/// Candidates in descending score order plus the answer objects of the best
/// pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub pairs: Vec<CandidatePair>,
    pub objects: Option<BTreeSet<String>>,
}

impl RankedAnswer {
    pub fn empty() -> Self {
        RankedAnswer::default()
    }

    pub fn best(&self) -> Option<&CandidatePair> {
        self.pairs.first()
    }

    pub fn is_empty_prediction(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Retained subjects for a mention: the top `k_subjects` index entries.
pub fn retained_subjects<'a>(
    mention: &str,
    index: &'a SurfaceFormIndex,
    k_subjects: usize,
) -> &'a [(String, u64)] {
    let entries = index.lookup(mention);
    &entries[..entries.len().min(k_subjects)]
}

/// C(m): every (subject, predicate) with the subject among the retained
/// index entries and the predicate in Pred(subject). Ordered by subject
/// rank, then predicate.
pub fn candidate_pairs(
    mention: &str,
    index: &SurfaceFormIndex,
    graph: &KnowledgeGraph,
    k_subjects: usize,
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (subject, _) in retained_subjects(mention, index, k_subjects) {
        for predicate in graph.predicates_of(subject) {
            out.push((subject.clone(), predicate.clone()));
        }
    }
    out
}

/// P(s|q): frequencies of the retained subjects normalized to sum to one.
pub fn subject_prior(retained: &[(String, u64)]) -> BTreeMap<String, f64> {
    let total: u64 = retained.iter().map(|(_, f)| f).sum();
    retained
        .iter()
        .map(|(s, f)| (s.clone(), *f as f64 / total as f64))
        .collect()
}

/// Score all candidates with the model's distribution and sort descending.
/// Ties break by higher subject prior, then predicate, then subject.
pub fn score_and_rank(
    masked_tokens: &[String],
    model: &PredicateModel,
    retained: &[(String, u64)],
    graph: &KnowledgeGraph,
) -> Result<RankedAnswer> {
    if retained.is_empty() {
        return Ok(RankedAnswer::empty());
    }
    let priors = subject_prior(retained);
    let mut candidate_predicates: BTreeSet<String> = BTreeSet::new();
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (subject, _) in retained {
        for predicate in graph.predicates_of(subject) {
            candidate_predicates.insert(predicate.clone());
            pairs.push((subject.clone(), predicate.clone()));
        }
    }
    if pairs.is_empty() {
        return Ok(RankedAnswer::empty());
    }
    let distribution = model.distribution(masked_tokens, Some(&candidate_predicates))?;

    let mut scored: Vec<CandidatePair> = pairs
        .into_iter()
        .map(|(subject, predicate)| {
            let subject_prior = priors[&subject];
            let predicate_prob = distribution.prob(&predicate);
            CandidatePair {
                score: subject_prior * predicate_prob,
                subject,
                predicate,
                subject_prior,
                predicate_prob,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                b.subject_prior
                    .partial_cmp(&a.subject_prior)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.predicate.cmp(&b.predicate))
            .then_with(|| a.subject.cmp(&b.subject))
    });
    Ok(RankedAnswer {
        pairs: scored,
        objects: None,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub k_subjects: usize,
    pub max_ngram: usize,
    /// Candidates kept in the emitted answer; the full list stays internal.
    pub top_n: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            k_subjects: 400,
            max_ngram: 5,
            top_n: 5,
        }
    }
}

/// One question's trip through the full pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub question: String,
    pub mention: Option<String>,
    pub masked: Option<String>,
    pub ranked: RankedAnswer,
}

/// Full pipeline: predict the mention, generate candidates, mask the
/// question, rank with the model, attach answer objects. No mention or no
/// candidates yields an empty prediction.
pub fn answer_question(
    question: &str,
    ner: &NerModel,
    model: &PredicateModel,
    index: &SurfaceFormIndex,
    graph: &KnowledgeGraph,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    let mention = ner.predict_mention(question, index, options.max_ngram)?;
    let Some(mention) = mention else {
        return Ok(PipelineOutput {
            question: question.to_string(),
            mention: None,
            masked: None,
            ranked: RankedAnswer::empty(),
        });
    };
    let masked = mask_entity(question, &mention);
    let retained = retained_subjects(&mention, index, options.k_subjects);
    let mut ranked = score_and_rank(&masked.tokens, model, retained, graph)?;
    if let Some(best) = ranked.best() {
        let objects = graph.objects_of(&best.subject, &best.predicate).clone();
        ranked.objects = Some(objects);
    }
    Ok(PipelineOutput {
        question: question.to_string(),
        mention: Some(mention),
        masked: Some(masked.text()),
        ranked,
    })
}

/// Evaluate many questions with a bounded number of worker threads, keeping
/// input order. Models and stores are read-only.
pub fn answer_batch(
    questions: &[String],
    ner: &NerModel,
    model: &PredicateModel,
    index: &SurfaceFormIndex,
    graph: &KnowledgeGraph,
    options: &PipelineOptions,
    workers: usize,
) -> Result<Vec<PipelineOutput>> {
    let workers = workers.max(1);
    if workers == 1 || questions.len() <= 1 {
        return questions
            .iter()
            .map(|q| answer_question(q, ner, model, index, graph, options))
            .collect();
    }
    let chunk = questions.len().div_ceil(workers);
    let results: Vec<Result<Vec<PipelineOutput>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = questions
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|q| answer_question(q, ner, model, index, graph, options))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pipeline worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(questions.len());
    for part in results {
        out.extend(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subject_prior_is_one() {
        let retained = vec![("m.1".to_string(), 4u64)];
        let priors = subject_prior(&retained);
        assert_eq!(priors["m.1"], 1.0);
    }

    #[test]
    fn priors_follow_frequencies() {
        let retained = vec![
            ("m.a".to_string(), 11u64),
            ("m.b".to_string(), 8),
            ("m.c".to_string(), 7),
        ];
        let priors = subject_prior(&retained);
        assert!((priors["m.a"] - 11.0 / 26.0).abs() < 1e-15);
        assert!((priors["m.b"] - 8.0 / 26.0).abs() < 1e-15);
        assert!((priors["m.c"] - 7.0 / 26.0).abs() < 1e-15);
        let sum: f64 = priors.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_pairs_cross_subjects_with_their_predicates() {
        use crate::kbstore::Triple;
        let graph = KnowledgeGraph::from_triples([
            Triple::new("m.01d13qs", "music.release_track.release", "m.r1"),
            Triple::new("m.01d13qs", "music.release_track.recording", "m.r2"),
            Triple::new("m.04t1ftb", "book.written_work.author", "m.a1"),
        ]);
        let mut index = SurfaceFormIndex::new();
        index.add("mildred pierced", "m.04t1ftb", 11);
        index.add("mildred pierced", "m.01d13qs", 2);

        let pairs = candidate_pairs("mildred pierced", &index, &graph, 400);
        assert!(pairs.contains(&(
            "m.01d13qs".to_string(),
            "music.release_track.release".to_string()
        )));
        assert!(pairs.contains(&(
            "m.01d13qs".to_string(),
            "music.release_track.recording".to_string()
        )));
        // Count matches the sum of Pred(s) sizes over retained subjects.
        let expected: usize = index
            .lookup("mildred pierced")
            .iter()
            .map(|(s, _)| graph.predicates_of(s).len())
            .sum();
        assert_eq!(pairs.len(), expected);
        assert_eq!(pairs.len(), 3);
    }

    #[test]
    fn unknown_mention_gives_no_candidates() {
        let graph = KnowledgeGraph::default();
        let index = SurfaceFormIndex::new();
        assert!(candidate_pairs("nothing here", &index, &graph, 10).is_empty());
    }

    #[test]
    fn k_subjects_monotonicity() {
        use crate::kbstore::Triple;
        let graph = KnowledgeGraph::from_triples([
            Triple::new("m.a", "p.one", "x"),
            Triple::new("m.b", "p.two", "y"),
            Triple::new("m.c", "p.three", "z"),
        ]);
        let mut index = SurfaceFormIndex::new();
        index.add("thing", "m.a", 5);
        index.add("thing", "m.b", 3);
        index.add("thing", "m.c", 1);
        let mut previous: Vec<(String, String)> = Vec::new();
        for k in 1..=4 {
            let pairs = candidate_pairs("thing", &index, &graph, k);
            for p in &previous {
                assert!(pairs.contains(p), "raising K dropped pair {p:?}");
            }
            previous = pairs;
        }
    }
}
