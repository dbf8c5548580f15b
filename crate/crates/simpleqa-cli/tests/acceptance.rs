//! Acceptance suite. Each criterion is one test that prints a PASS line
//! with its measurements; thresholds and tolerances are pinned in code.
//!
//! Training-based criteria share one model bundle built on the standard
//! synthetic fixture (200 train questions, 10 predicates, 100 entities,
//! 10% unreachable); per-component training times are measured inside the
//! bundle build so parallel test threads cannot skew them.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use simpleqa::eval;
use simpleqa::graphembed::{train_embeddings, EmbedConfig};
use simpleqa::kbstore::KnowledgeGraph;
use simpleqa::predicate::{
    mask_entity, prepare_examples, M1Model, M2Model, M3Model, M4Model, ModelConfig, ModelKind,
    PredicateModel,
};
use simpleqa::ranker::{answer_question, retained_subjects, PipelineOptions, RankedAnswer};
use simpleqa::spanner::{find_span, token_accuracy, train_ner, NerConfig, NerModel, QuestionRecord};
use simpleqa::surface::{default_name_predicates, SurfaceFormIndex};
use simpleqa::synth::{generate, SynthConfig, SynthData};

const OVERFIT_BUDGET: Duration = Duration::from_secs(300);

struct Bundle {
    data: SynthData,
    index: SurfaceFormIndex,
    ner: NerModel,
    ner_accuracy: f64,
    ner_time: Duration,
    models: Vec<(ModelKind, PredicateModel, f64, Duration)>,
}

fn fixture_config() -> SynthConfig {
    SynthConfig {
        seed: 20240,
        entities: 100,
        predicates: 10,
        extra_predicates: 2,
        train_questions: 200,
        test_questions: 100,
        unreachable_fraction: 0.1,
    }
}

fn bundle() -> &'static Bundle {
    static BUNDLE: OnceLock<Bundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        let data = generate(&fixture_config()).expect("fixture generation");
        let (index, _) = SurfaceFormIndex::build_from_kb(&data.names, &default_name_predicates());

        let started = Instant::now();
        let ner = train_ner(
            &data.train,
            &index,
            &NerConfig {
                word_dim: 24,
                char_filters: 12,
                char_widths: vec![2, 3],
                lstm_dim: 24,
                case_dim: 4,
                epochs: 20,
                learning_rate: 0.01,
                seed: 71,
                max_ngram: 5,
            },
            None,
        )
        .expect("ner training");
        let ner_time = started.elapsed();
        let ner_accuracy = token_accuracy(&ner.model, &data.train, &index).expect("scoring");

        let (examples, _) = prepare_examples(&data.train, &index, 5);

        let started = Instant::now();
        let (m1, _) = M1Model::train(
            &examples,
            &ModelConfig {
                word_dim: 16,
                char_filters: 8,
                char_widths: vec![2, 3],
                lstm_dim: 16,
                epochs: 30,
                learning_rate: 0.01,
                seed: 72,
                ..ModelConfig::defaults(ModelKind::M1)
            },
            None,
        )
        .expect("m1 training");
        let m1_time = started.elapsed();
        let m1_accuracy = m1.training_accuracy(&examples).expect("scoring");

        let started = Instant::now();
        let table = train_embeddings(
            &data.graph,
            &EmbedConfig {
                dim: 16,
                epochs: 15,
                negatives: 5,
                learning_rate: 0.1,
                seed: 73,
            },
        )
        .expect("embedding training");
        let (m2, _) = M2Model::train(
            &examples,
            &data.graph,
            &table,
            &ModelConfig {
                word_dim: 16,
                char_filters: 8,
                char_widths: vec![2, 3],
                lstm_dim: 16,
                epochs: 40,
                learning_rate: 0.01,
                embedding_dim: 16,
                seed: 74,
                ..ModelConfig::defaults(ModelKind::M2)
            },
            None,
        )
        .expect("m2 training");
        let m2_time = started.elapsed();
        let m2_accuracy = m2.training_accuracy(&examples).expect("scoring");

        let started = Instant::now();
        let (m3, _) = M3Model::train(
            &examples,
            &data.graph,
            &ModelConfig {
                word_dim: 16,
                char_filters: 8,
                char_widths: vec![2, 3],
                lstm_dim: 16,
                lstm_layers: 2,
                epochs: 50,
                learning_rate: 0.005,
                negatives: 6,
                compat_hidden: 24,
                seed: 75,
                ..ModelConfig::defaults(ModelKind::M3)
            },
            None,
        )
        .expect("m3 training");
        let m3_time = started.elapsed();
        let m3_accuracy = m3.training_accuracy(&examples, &data.graph).expect("scoring");

        let started = Instant::now();
        let (m4, _) = M4Model::train(
            &examples,
            &ModelConfig {
                hidden_dim: 16,
                bucket_bits: 16,
                epochs: 60,
                learning_rate: 0.5,
                seed: 76,
                ..ModelConfig::defaults(ModelKind::M4)
            },
        )
        .expect("m4 training");
        let m4_time = started.elapsed();
        let m4_accuracy = m4.training_accuracy(&examples).expect("scoring");

        Bundle {
            data,
            index,
            ner: ner.model,
            ner_accuracy,
            ner_time,
            models: vec![
                (ModelKind::M1, m1.into(), m1_accuracy, m1_time),
                (ModelKind::M2, m2.into(), m2_accuracy, m2_time),
                (ModelKind::M3, m3.into(), m3_accuracy, m3_time),
                (ModelKind::M4, m4.into(), m4_accuracy, m4_time),
            ],
        }
    })
}

#[test]
fn c1_gradient_fidelity() {
    use numcore::gradcheck::check;
    use numcore::layers::{BiLstm, CharAlphabet, CharCnn, Dense, Embedding, LstmCell};
    use numcore::params::ParamSet;

    let started = Instant::now();
    let mut worst: f64 = 0.0;

    {
        let mut ps = ParamSet::new(141);
        let layer = Dense::new(&mut ps, "dense", 4, 3);
        let report = check(
            &mut ps,
            |t| {
                let x = t.input1d(vec![0.5, -1.2, 0.3, 2.0]);
                let y = layer.forward(t, x)?;
                let s = t.sigmoid(y);
                Ok(t.sum(s))
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "dense: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(142);
        let emb = Embedding::new(&mut ps, "emb", 6, 5);
        let report = check(
            &mut ps,
            |t| {
                let a = emb.forward(t, 1)?;
                let b = emb.forward(t, 4)?;
                let c = t.concat(vec![a, b])?;
                let s = t.tanh(c);
                Ok(t.sum(s))
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "embedding: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(143);
        let cnn = CharCnn::new(&mut ps, "cnn", &[2, 3, 4], 7);
        let chars = CharAlphabet::encode("acceptance");
        let report = check(
            &mut ps,
            |t| {
                let y = cnn.forward(t, &chars)?;
                let s = t.tanh(y);
                Ok(t.sum(s))
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "char_cnn: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(144);
        let cell = LstmCell::new(&mut ps, "lstm", 3, 4);
        let report = check(
            &mut ps,
            |t| {
                let xs = vec![
                    t.input1d(vec![0.2, -0.7, 1.1]),
                    t.input1d(vec![-0.5, 0.9, 0.0]),
                    t.input1d(vec![1.5, 0.3, -0.2]),
                ];
                let hidden = cell.run(t, &xs)?;
                let cat = t.concat(hidden)?;
                Ok(t.sum(cat))
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "lstm: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(145);
        let bi = BiLstm::new(&mut ps, "bi", 2, 3);
        let report = check(
            &mut ps,
            |t| {
                let xs = vec![t.input1d(vec![0.4, -0.1]), t.input1d(vec![-0.9, 0.6])];
                let out = bi.encode(t, &xs)?;
                let cat = t.concat(vec![out.final_fwd, out.final_bwd])?;
                let s = t.tanh(cat);
                Ok(t.sum(s))
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "bilstm: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(146);
        let out = Dense::new(&mut ps, "out", 4, 5);
        let report = check(
            &mut ps,
            |t| {
                let x = t.input1d(vec![0.1, 0.9, -0.4, 0.7]);
                let logits = out.forward(t, x)?;
                let probs = t.softmax(logits)?;
                t.nll_loss(probs, 2)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "softmax+nll: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(147);
        let out = Dense::new(&mut ps, "out", 3, 1);
        let report = check(
            &mut ps,
            |t| {
                let x = t.input1d(vec![0.3, -0.8, 0.5]);
                let z = out.forward(t, x)?;
                let p = t.sigmoid(z);
                t.bce_loss(p, 1.0)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "sigmoid+bce: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }
    {
        let mut ps = ParamSet::new(148);
        let proj = Dense::new(&mut ps, "proj", 3, 4);
        let report = check(
            &mut ps,
            |t| {
                let x = t.input1d(vec![0.6, -0.2, 1.0]);
                let yhat = proj.forward(t, x)?;
                let target = t.input1d(vec![0.3, 0.3, -0.5, 0.8]);
                t.cosine_loss(yhat, target)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passes(1e-4), "cosine: {}", report.max_rel_err);
        worst = worst.max(report.max_rel_err);
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "gradient checks took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE C1 gradient-fidelity: PASS (worst relative error {worst:.2e}, {elapsed:.2?})"
    );
}

#[test]
fn c2_overfit_suite() {
    let b = bundle();
    assert!(
        b.ner_accuracy >= 0.98,
        "ner token accuracy {} below 0.98",
        b.ner_accuracy
    );
    assert!(
        b.ner_time < OVERFIT_BUDGET,
        "ner training took {:?}",
        b.ner_time
    );
    let mut summary = format!("ner {:.4} ({:.1?})", b.ner_accuracy, b.ner_time);
    for (kind, _, accuracy, time) in &b.models {
        let threshold = match kind {
            ModelKind::M1 | ModelKind::M4 => 0.99,
            ModelKind::M2 | ModelKind::M3 => 0.95,
        };
        assert!(
            accuracy >= &threshold,
            "{} training accuracy {} below {}",
            kind.as_str(),
            accuracy,
            threshold
        );
        assert!(
            time < &OVERFIT_BUDGET,
            "{} training took {:?}",
            kind.as_str(),
            time
        );
        summary.push_str(&format!(", {} {:.4} ({:.1?})", kind.as_str(), accuracy, time));
    }
    println!("ACCEPTANCE C2 overfit-suite: PASS ({summary})");
}

/// Independent argmax over C(m) for one mention: direct enumeration of the
/// product with the declared tie rule.
fn brute_force_best(
    mention: &str,
    masked_tokens: &[String],
    model: &PredicateModel,
    index: &SurfaceFormIndex,
    graph: &KnowledgeGraph,
) -> Option<(String, String)> {
    let retained = retained_subjects(mention, index, 400);
    if retained.is_empty() {
        return None;
    }
    let total: u64 = retained.iter().map(|(_, f)| f).sum();
    let candidates: BTreeSet<String> = retained
        .iter()
        .flat_map(|(s, _)| graph.predicates_of(s).iter().cloned())
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let dist = model.distribution(masked_tokens, Some(&candidates)).unwrap();
    let mut best: Option<(f64, f64, String, String)> = None;
    for (s, freq) in retained {
        let prior = *freq as f64 / total as f64;
        for p in graph.predicates_of(s) {
            let joint = prior * dist.prob(p);
            let better = match &best {
                None => true,
                Some((bj, bprior, bp, bs)) => {
                    joint > *bj
                        || (joint == *bj
                            && (prior > *bprior
                                || (prior == *bprior && (p < bp || (p == bp && *s < *bs)))))
                }
            };
            if better {
                best = Some((joint, prior, p.clone(), s.clone()));
            }
        }
    }
    best.map(|(_, _, p, s)| (s, p))
}

#[test]
fn c3_ranking_oracle_equivalence() {
    let b = bundle();
    assert_eq!(b.data.test.len(), 100, "fixture supplies 100 test questions");
    let options = PipelineOptions::default();
    let started = Instant::now();
    let mut checked = 0usize;
    for (_, model, _, _) in &b.models {
        for record in &b.data.test {
            let output = answer_question(
                &record.question,
                &b.ner,
                model,
                &b.index,
                &b.data.graph,
                &options,
            )
            .unwrap();
            let expected = output.mention.as_ref().and_then(|mention| {
                let masked = mask_entity(&record.question, mention);
                brute_force_best(mention, &masked.tokens, model, &b.index, &b.data.graph)
            });
            let got = output
                .ranked
                .best()
                .map(|p| (p.subject.clone(), p.predicate.clone()));
            assert_eq!(got, expected, "disagreement on {:?}", record.question);
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "oracle comparison took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE C3 ranking-oracle-equivalence: PASS ({checked} comparisons, 100% agreement, {elapsed:.2?})"
    );
}

#[test]
fn c4_index_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(4040);
    let random_index = |rng: &mut ChaCha8Rng| {
        let mut idx = SurfaceFormIndex::new();
        for _ in 0..rng.random_range(1..12) {
            let surface = format!("surface {}", rng.random_range(0..6));
            let uri = format!("m.{:02}", rng.random_range(0..10));
            idx.add(&surface, &uri, rng.random_range(1..100));
        }
        idx
    };
    for _ in 0..1000 {
        let a = random_index(&mut rng);
        let b = random_index(&mut rng);
        let c = random_index(&mut rng);
        assert_eq!(a.merge(&b), b.merge(&a), "merge must commute");
        assert_eq!(
            a.merge(&b).merge(&c),
            a.merge(&b.merge(&c)),
            "merge must associate"
        );
        // Frequency aggregation: every (surface, uri) frequency in the merge
        // is the sum of the operand frequencies.
        let merged = a.merge(&b);
        for (surface, entries) in merged.iter() {
            for (uri, freq) in entries {
                let fa = a
                    .lookup(surface)
                    .iter()
                    .find(|(u, _)| u == uri)
                    .map(|(_, f)| *f)
                    .unwrap_or(0);
                let fb = b
                    .lookup(surface)
                    .iter()
                    .find(|(u, _)| u == uri)
                    .map(|(_, f)| *f)
                    .unwrap_or(0);
                assert_eq!(*freq, fa + fb);
            }
        }
    }

    let mut sample = SurfaceFormIndex::new();
    sample.add("mildred pierced", "m.04t1ftb", 5);
    sample.add("mildred pierced", "m.04t_038", 8);
    sample.add("mildred pierced", "m.0cgv06r", 7);
    let mut other = SurfaceFormIndex::new();
    other.add("mildred pierced", "m.04t1ftb", 6);
    let merged = sample.merge(&other);
    let rows: Vec<(String, u64)> = merged.lookup("mildred pierced").to_vec();
    assert_eq!(
        rows,
        vec![
            ("m.04t1ftb".to_string(), 11),
            ("m.04t_038".to_string(), 8),
            ("m.0cgv06r".to_string(), 7),
        ],
        "sample rows must come back in frequency order 11, 8, 7"
    );
    println!("ACCEPTANCE C4 index-algebra: PASS (1000 randomized trials, sample rows 11/8/7 in order)");
}

#[test]
fn c5_weak_supervision() {
    let data = generate(&fixture_config()).unwrap();
    let (index, _) = SurfaceFormIndex::build_from_kb(&data.names, &default_name_predicates());
    let mut reachable_total = 0usize;
    let mut reachable_found = 0usize;
    let mut unreachable_total = 0usize;
    let mut unreachable_absent = 0usize;
    for (record, reachable) in data
        .train
        .iter()
        .zip(&data.train_reachable)
        .chain(data.test.iter().zip(&data.test_reachable))
    {
        let span = find_span(&record.question, &record.subject, &index, 5);
        if *reachable {
            reachable_total += 1;
            if let Some(span) = span {
                assert!(
                    index.contains_uri(&span, &record.subject),
                    "span must contain the gold URI"
                );
                reachable_found += 1;
            }
        } else {
            unreachable_total += 1;
            if span.is_none() {
                unreachable_absent += 1;
            }
        }
    }
    assert_eq!(
        reachable_found, reachable_total,
        "every indexed gold surface must be recovered"
    );
    assert_eq!(
        unreachable_absent, unreachable_total,
        "every unreachable question must come back empty"
    );
    assert_eq!(unreachable_total, 30, "10% of 300 questions");
    println!(
        "ACCEPTANCE C5 weak-supervision: PASS ({reachable_found}/{reachable_total} recovered, {unreachable_absent}/{unreachable_total} absent)"
    );
}

#[test]
fn c6_metric_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(6060);
    let record = |s: &str, p: &str| QuestionRecord {
        question: "q".to_string(),
        subject: s.to_string(),
        predicate: p.to_string(),
        object: None,
    };
    for _ in 0..50 {
        let n = rng.random_range(1..40);
        let subjects: Vec<String> = (0..6).map(|i| format!("m.{i}")).collect();
        let predicates: Vec<String> = (0..6).map(|i| format!("p.{i}")).collect();
        let records: Vec<QuestionRecord> = (0..n)
            .map(|_| {
                record(
                    &subjects[rng.random_range(0..subjects.len())],
                    &predicates[rng.random_range(0..predicates.len())],
                )
            })
            .collect();
        // Random ranked answers, possibly empty.
        let answers: Vec<RankedAnswer> = (0..n)
            .map(|_| {
                let pairs = rng.random_range(0..8);
                let mut answer = RankedAnswer::empty();
                let mut score = 1.0;
                for _ in 0..pairs {
                    score *= rng.random_range(0.1..1.0);
                    answer.pairs.push(simpleqa::ranker::CandidatePair {
                        subject: subjects[rng.random_range(0..subjects.len())].clone(),
                        predicate: predicates[rng.random_range(0..predicates.len())].clone(),
                        subject_prior: 1.0,
                        predicate_prob: score,
                        score,
                    });
                }
                answer
            })
            .collect();

        // Linking mentions: random hit-or-miss lookups.
        let mut index = SurfaceFormIndex::new();
        for s in &subjects {
            index.add("mention", s, rng.random_range(1..30));
        }
        let mentions: Vec<Option<String>> = (0..n)
            .map(|_| rng.random_bool(0.8).then(|| "mention".to_string()))
            .collect();
        let ks = [1, 2, 3, 5, 10, 50];
        let linking = eval::linking_recall_from(&mentions, &records, &index, &ks);
        for w in linking.per_k.as_ref().unwrap().windows(2) {
            assert!(w[1].value >= w[0].value, "linking recall must be monotone");
        }

        let recalls = eval::pair_recall_from(&answers, &records, &ks);
        for report in [&recalls.pair, &recalls.subject, &recalls.predicate] {
            for w in report.per_k.as_ref().unwrap().windows(2) {
                assert!(w[1].value >= w[0].value, "pair recall must be monotone");
            }
        }

        let taxonomy = eval::error_taxonomy_from(&answers, &records);
        assert!(taxonomy.partition_holds(), "taxonomy must partition");

        let accuracy = eval::answer_accuracy_from(&answers, &records);
        let at1 = &recalls.pair.per_k.as_ref().unwrap()[0];
        assert_eq!(accuracy.numerator, at1.numerator);
        assert_eq!(accuracy.value, at1.value);
    }
    println!("ACCEPTANCE C6 metric-properties: PASS (50 random prediction sets)");
}

#[test]
fn c7_distribution_validity() {
    let b = bundle();
    let mut rng = ChaCha8Rng::seed_from_u64(7070);
    let words = [
        "who", "what", "which", "wrote", "made", "zarvox", "quill", "e", "of", "the", "marnie",
        "unknownword", "xyzzy", "country", "author", "artist",
    ];
    let random_tokens = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.random_range(1..8);
        (0..len)
            .map(|_| words[rng.random_range(0..words.len())].to_string())
            .collect()
    };
    let all_predicates: Vec<String> = b
        .data
        .graph
        .predicate_vocabulary()
        .iter()
        .cloned()
        .collect();

    let mut checked = 0usize;
    for (kind, model, _, _) in &b.models {
        for _ in 0..250 {
            let tokens = random_tokens(&mut rng);
            let candidates: BTreeSet<String> = (0..rng.random_range(1..6))
                .map(|_| all_predicates[rng.random_range(0..all_predicates.len())].clone())
                .collect();
            let dist = model.distribution(&tokens, Some(&candidates)).unwrap();
            let sum = dist.sum();
            assert!(
                (sum - 1.0).abs() < 1e-6,
                "{}: distribution sums to {sum}",
                kind.as_str()
            );
            checked += 1;
        }
    }

    // The embedding-projection support strictly contains the training-only
    // predicate vocabulary: the fixture holds out KB-only predicates.
    let training_preds: BTreeSet<&String> = b.data.train.iter().map(|r| &r.predicate).collect();
    let m2 = &b.models[1].1;
    let dist = m2
        .distribution(&["who".to_string(), "is".to_string(), "e".to_string()], None)
        .unwrap();
    assert!(dist.support_len() > training_preds.len());
    for p in &training_preds {
        assert!(dist.contains(p), "training predicate {p} missing from support");
    }
    let held_out: Vec<&String> = all_predicates
        .iter()
        .filter(|p| !training_preds.contains(*p))
        .collect();
    assert!(!held_out.is_empty(), "fixture must hold out predicates");
    for p in &held_out {
        assert!(dist.contains(p), "held-out predicate {p} missing from support");
    }
    println!(
        "ACCEPTANCE C7 distribution-validity: PASS ({checked} random inputs, support {} > training {})",
        dist.support_len(),
        training_preds.len()
    );
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_simpleqa"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn full_pipeline(dir: &Path, seed: &str) {
    let d = |name: &str| dir.join(name).to_string_lossy().to_string();
    let config_path = dir.join("run.toml");
    std::fs::write(
        &config_path,
        r#"
workers = 2
[ner]
word_dim = 16
char_filters = 8
char_widths = [2, 3]
lstm_dim = 12
epochs = 4
learning_rate = 0.01
[kb_embed]
dim = 8
epochs = 4
learning_rate = 0.1
[m1]
word_dim = 12
char_filters = 6
char_widths = [2]
lstm_dim = 8
epochs = 4
learning_rate = 0.01
[m2]
word_dim = 12
char_filters = 6
char_widths = [2]
lstm_dim = 8
epochs = 4
learning_rate = 0.01
embedding_dim = 8
[m3]
word_dim = 10
char_filters = 6
char_widths = [2]
lstm_dim = 8
lstm_layers = 2
epochs = 3
learning_rate = 0.005
negatives = 3
compat_hidden = 8
[m4]
hidden_dim = 8
bucket_bits = 12
epochs = 6
learning_rate = 0.3
"#,
    )
    .unwrap();
    let config = config_path.to_string_lossy().to_string();
    let base = ["--config", config.as_str(), "--seed", seed];

    let synth_out = d("data");
    run_cli(
        &[&base[..], &[
            "synth", "--out", &synth_out, "--entities", "30", "--predicates", "5",
            "--extra-predicates", "2", "--train-questions", "40", "--test-questions", "20",
            "--unreachable", "0.1",
        ]]
        .concat(),
    );
    let kb = d("data/kb.tsv");
    let names = d("data/names.tsv");
    let train = d("data/train.tsv");
    let test = d("data/test.tsv");
    let index = d("index.tsv");
    run_cli(&[&base[..], &["build-index", "--kb", &names, "--out", &index]].concat());

    let ner = d("ner.ckpt");
    run_cli(
        &[&base[..], &[
            "train", "--kind", "ner", "--dataset", &train, "--index", &index, "--out", &ner,
        ]]
        .concat(),
    );
    let emb = d("emb.txt");
    run_cli(&[&base[..], &["train", "--kind", "kb-embed", "--kb", &kb, "--out", &emb]].concat());
    for kind in ["m1", "m2", "m3", "m4"] {
        let out = d(&format!("{kind}.ckpt"));
        let mut args = vec![
            "train", "--kind", kind, "--dataset", train.as_str(), "--index", index.as_str(),
            "--out", out.as_str(),
        ];
        if kind == "m2" {
            args.extend(["--kb", kb.as_str(), "--embeddings", emb.as_str()]);
        }
        if kind == "m3" {
            args.extend(["--kb", kb.as_str()]);
        }
        run_cli(&[&base[..], &args[..]].concat());
    }
    for kind in ["m1", "m2", "m3", "m4"] {
        let model = d(&format!("{kind}.ckpt"));
        let out = d(&format!("eval-{kind}"));
        run_cli(
            &[&base[..], &[
                "evaluate", "--dataset", &test, "--index", &index, "--kb", &kb, "--ner", &ner,
                "--model", &model, "--out", &out,
            ]]
            .concat(),
        );
    }
}

#[test]
fn c8_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    full_pipeline(dir_a.path(), "4242");
    full_pipeline(dir_b.path(), "4242");
    let mut compared = 0usize;
    for kind in ["m1", "m2", "m3", "m4"] {
        for file in [
            format!("eval-{kind}/report.json"),
            format!("eval-{kind}/table_linking.tsv"),
            format!("eval-{kind}/table_predicate_accuracy.tsv"),
            format!("eval-{kind}/table_answer_accuracy.tsv"),
            format!("eval-{kind}/table_pair_recall.tsv"),
            format!("eval-{kind}/table_error_analysis.tsv"),
        ] {
            let a = std::fs::read(dir_a.path().join(&file)).unwrap();
            let b = std::fs::read(dir_b.path().join(&file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical-seed runs");
            compared += 1;
        }
    }
    println!("ACCEPTANCE C8 determinism: PASS ({compared} report files byte-identical)");
}

/// Full-data mode: point the harness at real dataset files to compute every
/// reported table. Not gated; excluded from the default test run.
///
/// SIMPLEQA_KB, SIMPLEQA_NAMES (or a prebuilt SIMPLEQA_INDEX), SIMPLEQA_TRAIN,
/// SIMPLEQA_TEST name the files; artifacts land in SIMPLEQA_OUT.
#[test]
#[ignore = "requires user-supplied full datasets; run with --ignored"]
fn c9_full_data_mode() {
    let var = |name: &str| std::env::var(name).ok();
    let (Some(kb), Some(names), Some(train), Some(test), Some(out)) = (
        var("SIMPLEQA_KB"),
        var("SIMPLEQA_NAMES"),
        var("SIMPLEQA_TRAIN"),
        var("SIMPLEQA_TEST"),
        var("SIMPLEQA_OUT"),
    ) else {
        panic!("set SIMPLEQA_KB, SIMPLEQA_NAMES, SIMPLEQA_TRAIN, SIMPLEQA_TEST, SIMPLEQA_OUT");
    };
    let out_dir = std::path::PathBuf::from(&out);
    std::fs::create_dir_all(&out_dir).unwrap();
    let index = out_dir.join("index.tsv").to_string_lossy().to_string();
    run_cli(&["build-index", "--kb", &names, "--out", &index]);
    let ner = out_dir.join("ner.ckpt").to_string_lossy().to_string();
    run_cli(&["train", "--kind", "ner", "--dataset", &train, "--index", &index, "--out", &ner]);
    let model = out_dir.join("m1.ckpt").to_string_lossy().to_string();
    run_cli(&["train", "--kind", "m1", "--dataset", &train, "--index", &index, "--out", &model]);
    let eval_out = out_dir.join("eval").to_string_lossy().to_string();
    run_cli(&[
        "evaluate", "--dataset", &test, "--index", &index, "--kb", &kb, "--ner", &ner,
        "--model", &model, "--out", &eval_out,
    ]);
    println!("ACCEPTANCE C9 full-data-mode: computed reports under {eval_out}");
}
