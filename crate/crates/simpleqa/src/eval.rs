//! Component-wise evaluation: span recognition accuracy, linking Recall@K,
//! predicate accuracy, answer accuracy, pair/subject/predicate Recall@K, and
//! the four-way error taxonomy. Denominators always count the full test set,
//! including questions with no prediction.

use serde::{Deserialize, Serialize};

use crate::ranker::RankedAnswer;
use crate::spanner::QuestionRecord;
use crate::surface::SurfaceFormIndex;

/// Reference numbers from the full-data evaluation, recorded in reports for
/// side-by-side comparison. They are not assertable at desk scale.
pub mod baselines {
    pub const NER_ACCURACY: f64 = 0.82;
    pub const LINKING_RECALL: &[(usize, f64)] = &[
        (1, 0.68),
        (2, 0.74),
        (5, 0.79),
        (10, 0.81),
        (25, 0.82),
        (100, 0.82),
        (400, 0.82),
    ];
    /// Indexed by model kind 1..=4.
    pub const PREDICATE_ACCURACY: [f64; 4] = [0.74, 0.68, 0.73, 0.79];
    pub const ANSWER_ACCURACY: [f64; 4] = [0.67, 0.61, 0.66, 0.68];
    /// (K, pair, subject, predicate) for the softmax classifier.
    pub const M1_PAIR_RECALL: &[(usize, f64, f64, f64)] = &[
        (1, 0.67, 0.74, 0.74),
        (2, 0.74, 0.78, 0.80),
        (3, 0.77, 0.80, 0.81),
        (4, 0.78, 0.80, 0.82),
        (5, 0.79, 0.81, 0.83),
        (10, 0.80, 0.81, 0.83),
        (20, 0.80, 0.82, 0.84),
    ];
    /// Full-data error analysis: (only wrong predicate, only wrong subject,
    /// wrong both, empty) out of 21687 test instances, 7206 wrong.
    pub const ERROR_COUNTS: (u64, u64, u64, u64) = (1642, 1591, 1911, 2062);
    pub const TEST_INSTANCES: u64 = 21687;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: usize,
    pub value: f64,
    pub numerator: u64,
}

/// One metric with its counts; `value == numerator / denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub numerator: u64,
    pub denominator: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_k: Option<Vec<KPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_baseline_per_k: Option<Vec<(usize, f64)>>,
}

impl EvalReport {
    pub fn fraction(metric: impl Into<String>, numerator: u64, denominator: u64) -> Self {
        EvalReport {
            metric: metric.into(),
            value: if denominator == 0 {
                0.0
            } else {
                numerator as f64 / denominator as f64
            },
            numerator,
            denominator,
            per_k: None,
            published_baseline: None,
            published_baseline_per_k: None,
        }
    }

    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.published_baseline = Some(baseline);
        self
    }
}

/// A question is recognized correctly when looking up the predicted mention
/// returns the gold subject.
pub fn ner_accuracy_from(
    mentions: &[Option<String>],
    records: &[QuestionRecord],
    index: &SurfaceFormIndex,
) -> EvalReport {
    assert_eq!(mentions.len(), records.len());
    let correct = mentions
        .iter()
        .zip(records)
        .filter(|(m, r)| {
            m.as_deref()
                .map(|m| index.contains_uri(m, &r.subject))
                .unwrap_or(false)
        })
        .count() as u64;
    EvalReport::fraction("ner_accuracy", correct, records.len() as u64)
        .with_baseline(baselines::NER_ACCURACY)
}

/// Recall@K of the gold subject among the frequency-ranked lookup results of
/// each mention. Questions without a mention are wrong at every K.
pub fn linking_recall_from(
    mentions: &[Option<String>],
    records: &[QuestionRecord],
    index: &SurfaceFormIndex,
    ks: &[usize],
) -> EvalReport {
    assert_eq!(mentions.len(), records.len());
    let denominator = records.len() as u64;
    let mut per_k = Vec::with_capacity(ks.len());
    for &k in ks {
        let hits = mentions
            .iter()
            .zip(records)
            .filter(|(m, r)| {
                m.as_deref()
                    .map(|m| {
                        index
                            .lookup(m)
                            .iter()
                            .take(k)
                            .any(|(uri, _)| *uri == r.subject)
                    })
                    .unwrap_or(false)
            })
            .count() as u64;
        per_k.push(KPoint {
            k,
            value: if denominator == 0 {
                0.0
            } else {
                hits as f64 / denominator as f64
            },
            numerator: hits,
        });
    }
    let last = per_k.last().cloned();
    EvalReport {
        metric: "linking_recall_at_k".to_string(),
        value: last.as_ref().map(|p| p.value).unwrap_or(0.0),
        numerator: last.map(|p| p.numerator).unwrap_or(0),
        denominator,
        per_k: Some(per_k),
        published_baseline: None,
        published_baseline_per_k: Some(baselines::LINKING_RECALL.to_vec()),
    }
}

fn gold_pair_matches(answer: &RankedAnswer, record: &QuestionRecord) -> bool {
    answer
        .best()
        .map(|b| b.subject == record.subject && b.predicate == record.predicate)
        .unwrap_or(false)
}

/// Top-1 predicate compared against the gold predicate, subject ignored.
pub fn predicate_accuracy_from(
    answers: &[RankedAnswer],
    records: &[QuestionRecord],
) -> EvalReport {
    assert_eq!(answers.len(), records.len());
    let correct = answers
        .iter()
        .zip(records)
        .filter(|(a, r)| {
            a.best()
                .map(|b| b.predicate == r.predicate)
                .unwrap_or(false)
        })
        .count() as u64;
    EvalReport::fraction("predicate_accuracy", correct, records.len() as u64)
}

/// Exact (subject, predicate) match of the best pair.
pub fn answer_accuracy_from(answers: &[RankedAnswer], records: &[QuestionRecord]) -> EvalReport {
    assert_eq!(answers.len(), records.len());
    let correct = answers
        .iter()
        .zip(records)
        .filter(|(a, r)| gold_pair_matches(a, r))
        .count() as u64;
    EvalReport::fraction("answer_accuracy", correct, records.len() as u64)
}

/// Pair, subject, and predicate Recall@K over the ranked candidate lists.
pub struct PairRecallReports {
    pub pair: EvalReport,
    pub subject: EvalReport,
    pub predicate: EvalReport,
}

pub fn pair_recall_from(
    answers: &[RankedAnswer],
    records: &[QuestionRecord],
    ks: &[usize],
) -> PairRecallReports {
    assert_eq!(answers.len(), records.len());
    let denominator = records.len() as u64;
    let mut pair_points = Vec::with_capacity(ks.len());
    let mut subject_points = Vec::with_capacity(ks.len());
    let mut predicate_points = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut pair_hits = 0u64;
        let mut subject_hits = 0u64;
        let mut predicate_hits = 0u64;
        for (a, r) in answers.iter().zip(records) {
            let top = &a.pairs[..a.pairs.len().min(k)];
            if top
                .iter()
                .any(|p| p.subject == r.subject && p.predicate == r.predicate)
            {
                pair_hits += 1;
            }
            if top.iter().any(|p| p.subject == r.subject) {
                subject_hits += 1;
            }
            if top.iter().any(|p| p.predicate == r.predicate) {
                predicate_hits += 1;
            }
        }
        let point = |hits: u64| KPoint {
            k,
            value: if denominator == 0 {
                0.0
            } else {
                hits as f64 / denominator as f64
            },
            numerator: hits,
        };
        pair_points.push(point(pair_hits));
        subject_points.push(point(subject_hits));
        predicate_points.push(point(predicate_hits));
    }
    let report = |metric: &str, points: Vec<KPoint>, baseline_idx: usize| {
        let last = points.last().cloned();
        EvalReport {
            metric: metric.to_string(),
            value: last.as_ref().map(|p| p.value).unwrap_or(0.0),
            numerator: last.map(|p| p.numerator).unwrap_or(0),
            denominator,
            per_k: Some(points),
            published_baseline: None,
            published_baseline_per_k: Some(
                baselines::M1_PAIR_RECALL
                    .iter()
                    .map(|row| {
                        let v = [row.1, row.2, row.3][baseline_idx];
                        (row.0, v)
                    })
                    .collect(),
            ),
        }
    };
    PairRecallReports {
        pair: report("pair_recall_at_k", pair_points, 0),
        subject: report("subject_recall_at_k", subject_points, 1),
        predicate: report("predicate_recall_at_k", predicate_points, 2),
    }
}

/// Mutually exclusive, exhaustive classification of wrong predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub only_wrong_predicate: u64,
    pub only_wrong_subject: u64,
    pub wrong_subject_and_predicate: u64,
    pub empty_prediction: u64,
    pub total_wrong: u64,
    pub total_correct: u64,
    pub total: u64,
}

impl ErrorBreakdown {
    pub fn partition_holds(&self) -> bool {
        self.only_wrong_predicate
            + self.only_wrong_subject
            + self.wrong_subject_and_predicate
            + self.empty_prediction
            == self.total_wrong
            && self.total_wrong + self.total_correct == self.total
    }
}

pub fn error_taxonomy_from(answers: &[RankedAnswer], records: &[QuestionRecord]) -> ErrorBreakdown {
    assert_eq!(answers.len(), records.len());
    let mut out = ErrorBreakdown {
        total: records.len() as u64,
        ..Default::default()
    };
    for (a, r) in answers.iter().zip(records) {
        match a.best() {
            None => {
                out.empty_prediction += 1;
                out.total_wrong += 1;
            }
            Some(best) => {
                let subject_ok = best.subject == r.subject;
                let predicate_ok = best.predicate == r.predicate;
                match (subject_ok, predicate_ok) {
                    (true, true) => out.total_correct += 1,
                    (true, false) => {
                        out.only_wrong_predicate += 1;
                        out.total_wrong += 1;
                    }
                    (false, true) => {
                        out.only_wrong_subject += 1;
                        out.total_wrong += 1;
                    }
                    (false, false) => {
                        out.wrong_subject_and_predicate += 1;
                        out.total_wrong += 1;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::CandidatePair;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(subject: &str, predicate: &str) -> QuestionRecord {
        QuestionRecord {
            question: "q".to_string(),
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: None,
        }
    }

    fn answer(pairs: &[(&str, &str)]) -> RankedAnswer {
        RankedAnswer {
            pairs: pairs
                .iter()
                .enumerate()
                .map(|(i, (s, p))| CandidatePair {
                    subject: s.to_string(),
                    predicate: p.to_string(),
                    subject_prior: 1.0,
                    predicate_prob: 1.0 / (i + 1) as f64,
                    score: 1.0 / (i + 1) as f64,
                })
                .collect(),
            objects: None,
        }
    }

    fn sample_index() -> SurfaceFormIndex {
        let mut idx = SurfaceFormIndex::new();
        idx.add("mildred pierced", "m.04t1ftb", 11);
        idx.add("mildred pierced", "m.04t_038", 8);
        idx.add("mildred pierced", "m.0cgv06r", 7);
        idx
    }

    #[test]
    fn ner_accuracy_extremes() {
        let records = vec![record("m.04t1ftb", "p"), record("m.04t_038", "p")];
        let index = sample_index();
        let all = vec![
            Some("mildred pierced".to_string()),
            Some("mildred pierced".to_string()),
        ];
        assert_eq!(ner_accuracy_from(&all, &records, &index).value, 1.0);
        let none = vec![None, None];
        assert_eq!(ner_accuracy_from(&none, &records, &index).value, 0.0);
    }

    #[test]
    fn ner_accuracy_counts_misses_exactly() {
        // One gold subject deliberately absent from the index.
        let records = vec![
            record("m.04t1ftb", "p"),
            record("m.04t_038", "p"),
            record("m.not_indexed", "p"),
        ];
        let index = sample_index();
        let mentions = vec![Some("mildred pierced".to_string()); 3];
        let report = ner_accuracy_from(&mentions, &records, &index);
        assert_eq!(report.numerator, 2);
        assert_eq!(report.denominator, 3);
        assert!((report.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn linking_recall_saturates_and_ranks() {
        let records = vec![
            record("m.04t1ftb", "p"),
            record("m.0cgv06r", "p"),
            record("m.unreachable", "p"),
        ];
        let mentions = vec![Some("mildred pierced".to_string()); 3];
        let index = sample_index();
        let report = linking_recall_from(&mentions, &records, &index, &[1, 2, 3, 100]);
        let points = report.per_k.as_ref().unwrap();
        // K=1: only the top-ranked subject matches.
        assert_eq!(points[0].numerator, 1);
        // K=3 and beyond: both retrievable subjects, never the third.
        assert_eq!(points[2].numerator, 2);
        assert_eq!(points[3].numerator, 2);
        assert!((points[3].value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn linking_recall_is_monotone_on_random_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let mut index = SurfaceFormIndex::new();
            let subjects: Vec<String> = (0..10).map(|i| format!("m.{i}")).collect();
            for s in &subjects {
                index.add("mention", s, rng.random_range(1..20));
            }
            let records: Vec<QuestionRecord> = (0..8)
                .map(|_| {
                    let s = &subjects[rng.random_range(0..subjects.len())];
                    record(s, "p")
                })
                .collect();
            let mentions: Vec<Option<String>> = (0..records.len())
                .map(|_| rng.random_bool(0.8).then(|| "mention".to_string()))
                .collect();
            let report =
                linking_recall_from(&mentions, &records, &index, &[1, 2, 3, 5, 8, 20]);
            let points = report.per_k.unwrap();
            for w in points.windows(2) {
                assert!(w[1].value >= w[0].value, "recall decreased in K");
            }
        }
    }

    #[test]
    fn predicate_accuracy_ignores_subject() {
        let records = vec![record("m.gold", "p.gold")];
        let answers = vec![answer(&[("m.other", "p.gold")])];
        assert_eq!(predicate_accuracy_from(&answers, &records).value, 1.0);
    }

    #[test]
    fn answer_accuracy_needs_exact_pair() {
        let records = vec![
            record("m.gold", "p.gold"),
            record("m.gold", "p.gold"),
            record("m.gold", "p.gold"),
        ];
        let answers = vec![
            answer(&[("m.gold", "p.gold")]),
            answer(&[("m.gold", "p.other")]),
            RankedAnswer::empty(),
        ];
        let report = answer_accuracy_from(&answers, &records);
        assert_eq!(report.numerator, 1);
        assert_eq!(report.denominator, 3);
    }

    #[test]
    fn pair_recall_at_one_equals_answer_accuracy() {
        let records = vec![
            record("m.a", "p.a"),
            record("m.b", "p.b"),
            record("m.c", "p.c"),
        ];
        let answers = vec![
            answer(&[("m.a", "p.a"), ("m.b", "p.b")]),
            answer(&[("m.x", "p.x"), ("m.b", "p.b")]),
            RankedAnswer::empty(),
        ];
        let recall = pair_recall_from(&answers, &records, &[1, 2]);
        let accuracy = answer_accuracy_from(&answers, &records);
        let at1 = &recall.pair.per_k.as_ref().unwrap()[0];
        assert_eq!(at1.numerator, accuracy.numerator);
        assert_eq!(at1.value, accuracy.value);
        // Subject recall dominates pair recall at every K.
        for (s, p) in recall
            .subject
            .per_k
            .as_ref()
            .unwrap()
            .iter()
            .zip(recall.pair.per_k.as_ref().unwrap())
        {
            assert!(s.value >= p.value);
        }
    }

    #[test]
    fn taxonomy_classifies_each_case() {
        let records = vec![
            record("m.g", "p.g"),
            record("m.g", "p.g"),
            record("m.g", "p.g"),
            record("m.g", "p.g"),
            record("m.g", "p.g"),
        ];
        let answers = vec![
            answer(&[("m.g", "p.g")]),  // correct
            answer(&[("m.g", "p.x")]),  // only wrong predicate
            answer(&[("m.x", "p.g")]),  // only wrong subject
            answer(&[("m.x", "p.x")]),  // both wrong
            RankedAnswer::empty(),      // empty
        ];
        let breakdown = error_taxonomy_from(&answers, &records);
        assert_eq!(breakdown.total_correct, 1);
        assert_eq!(breakdown.only_wrong_predicate, 1);
        assert_eq!(breakdown.only_wrong_subject, 1);
        assert_eq!(breakdown.wrong_subject_and_predicate, 1);
        assert_eq!(breakdown.empty_prediction, 1);
        assert!(breakdown.partition_holds());
    }

    #[test]
    fn taxonomy_partitions_random_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let records: Vec<QuestionRecord> = (0..n).map(|_| record("m.g", "p.g")).collect();
            let answers: Vec<RankedAnswer> = (0..n)
                .map(|_| match rng.random_range(0..5) {
                    0 => answer(&[("m.g", "p.g")]),
                    1 => answer(&[("m.g", "p.x")]),
                    2 => answer(&[("m.x", "p.g")]),
                    3 => answer(&[("m.x", "p.x")]),
                    _ => RankedAnswer::empty(),
                })
                .collect();
            let breakdown = error_taxonomy_from(&answers, &records);
            assert!(breakdown.partition_holds());
            assert_eq!(breakdown.total, n as u64);
        }
    }

    #[test]
    fn published_error_counts_are_consistent() {
        let (a, b, c, d) = baselines::ERROR_COUNTS;
        assert_eq!(a + b + c + d, 7206);
        assert_eq!(7206 + 14481, baselines::TEST_INSTANCES);
    }
}
