//! Synthetic micro-KB and question-set generator: a desk-scale stand-in for
//! a full triple dump plus question dataset. Facts and name labels are
//! written as separate triple files, mirroring how fact KBs and label dumps
//! ship separately. Every artifact is a pure function of the seed, so
//! reruns are byte-identical.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbstore::{KnowledgeGraph, Triple};
use crate::spanner::QuestionRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub entities: usize,
    /// Predicates that appear in questions.
    pub predicates: usize,
    /// Extra predicates present in the KB but in no question; they keep the
    /// KB predicate vocabulary strictly larger than the training vocabulary.
    pub extra_predicates: usize,
    pub train_questions: usize,
    pub test_questions: usize,
    /// Fraction of questions whose gold subject has no surface form in the
    /// name triples, so span inference must fail on them.
    pub unreachable_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            entities: 100,
            predicates: 10,
            extra_predicates: 2,
            train_questions: 200,
            test_questions: 100,
            unreachable_fraction: 0.1,
        }
    }
}

const FIRST_NAMES: &[&str] = &[
    "zarvox", "quillon", "marnie", "tivoli", "brask", "veldt", "ossian", "drumlin", "fenwick",
    "galdra", "hespera", "ingvar", "jorvik", "kelpra", "lumen", "morvane", "nyx", "ombra",
    "pryden", "quastor", "rivelin", "sorrel", "thaleia", "umbrel", "vesper", "wrenna", "xandor",
    "yslene", "zephra", "aldric",
];

const SECOND_NAMES: &[&str] = &[
    "quill", "harrow", "brume", "cairn", "dells", "ember", "frost", "grange", "holt", "isle",
    "knoll", "lagoon", "marsh", "nook", "orchard", "pike", "quarry", "ridge", "strand", "tarn",
    "underwood", "vale", "weir", "yarrow", "zenith", "ashford", "birchwood", "crest", "dunmore",
    "eastgate",
];

/// (domain, type, property) parts of the synthetic predicate URIs. The
/// property token also drives the question templates, which keeps the
/// question wording informative about the predicate.
const PREDICATE_PARTS: &[(&str, &str, &str)] = &[
    ("book", "written_work", "author"),
    ("music", "album", "artist"),
    ("film", "film", "director"),
    ("people", "person", "profession"),
    ("geo", "location", "country"),
    ("tv", "program", "creator"),
    ("sports", "team", "coach"),
    ("food", "dish", "cuisine"),
    ("bio", "species", "habitat"),
    ("org", "company", "founder"),
    ("astro", "body", "satellite"),
    ("law", "case", "court"),
    ("games", "title", "designer"),
    ("art", "painting", "painter"),
];

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn capitalize_name(name: &str) -> String {
    name.split(' ').map(capitalize).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
struct SynthEntity {
    uri: String,
    /// Lowercase two-token name; unnamed entities still carry one so their
    /// questions read naturally, it just never reaches the name triples.
    name: String,
    named: bool,
}

/// Generated corpus: fact triples, name triples, and question splits with
/// reachability bookkeeping (whether the gold subject has any indexed
/// surface form).
#[derive(Debug, Clone)]
pub struct SynthData {
    pub config: SynthConfig,
    /// Fact KB; drives Pred(s) and answer objects.
    pub graph: KnowledgeGraph,
    /// Name and alias triples; the surface index is built from these.
    pub names: KnowledgeGraph,
    pub train: Vec<QuestionRecord>,
    pub train_reachable: Vec<bool>,
    pub test: Vec<QuestionRecord>,
    pub test_reachable: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthMeta {
    pub config: SynthConfig,
    pub train_reachable: Vec<bool>,
    pub test_reachable: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub kb: PathBuf,
    pub names: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub meta: PathBuf,
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    if config.entities == 0 || config.predicates == 0 || config.train_questions == 0 {
        return Err(Error::Config(
            "entities, predicates, and train questions must be positive".to_string(),
        ));
    }
    if config.predicates + config.extra_predicates > PREDICATE_PARTS.len() {
        return Err(Error::Config(format!(
            "at most {} predicates are available",
            PREDICATE_PARTS.len()
        )));
    }
    if !(0.0..=1.0).contains(&config.unreachable_fraction) {
        return Err(Error::Config(
            "unreachable fraction must be in [0, 1]".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let question_predicates: Vec<String> = PREDICATE_PARTS[..config.predicates]
        .iter()
        .map(|(d, t, p)| format!("{d}.{t}.{p}"))
        .collect();
    let extra_predicates: Vec<String> = PREDICATE_PARTS
        [config.predicates..config.predicates + config.extra_predicates]
        .iter()
        .map(|(d, t, p)| format!("{d}.{t}.{p}"))
        .collect();

    // Unnamed entities exist to make their questions unanswerable through
    // the index.
    let unnamed_count = if config.unreachable_fraction > 0.0 {
        (config.entities / 10).max(1)
    } else {
        0
    };

    let mut entities = Vec::with_capacity(config.entities);
    let mut used_names: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..config.entities {
        let (a, b) = loop {
            let a = rng.random_range(0..FIRST_NAMES.len());
            let b = rng.random_range(0..SECOND_NAMES.len());
            if used_names.insert((a, b)) {
                break (a, b);
            }
        };
        entities.push(SynthEntity {
            uri: format!("m.0syn{i:04}"),
            name: format!("{} {}", FIRST_NAMES[a], SECOND_NAMES[b]),
            named: i >= unnamed_count,
        });
    }

    let mut name_triples = Vec::new();
    for (i, e) in entities.iter().enumerate() {
        if !e.named {
            continue;
        }
        name_triples.push(Triple::new(&e.uri, "type.object.name", capitalize_name(&e.name)));
        match rng.random_range(0..10) {
            // Alias equal to the own name: label multiplicity becomes 2.
            0 => name_triples.push(Triple::new(
                &e.uri,
                "common.topic.alias",
                capitalize_name(&e.name),
            )),
            // Alias borrowed from another named entity: ambiguous surface.
            1 | 2 => {
                let other = &entities[rng.random_range(0..entities.len())];
                if other.named && other.uri != entities[i].uri {
                    name_triples.push(Triple::new(
                        &e.uri,
                        "common.topic.alias",
                        capitalize_name(&other.name),
                    ));
                }
            }
            _ => {}
        }
    }

    // Facts: every entity gets one to three question predicates.
    let mut fact_triples = Vec::new();
    let mut facts: Vec<(usize, String)> = Vec::new();
    for (i, _) in entities.iter().enumerate() {
        let count = rng.random_range(1..=3usize.min(question_predicates.len()));
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        while chosen.len() < count {
            chosen.insert(rng.random_range(0..question_predicates.len()));
        }
        for p in chosen {
            let object = &entities[rng.random_range(0..entities.len())].uri;
            fact_triples.push(Triple::new(
                &entities[i].uri,
                &question_predicates[p],
                object,
            ));
            facts.push((i, question_predicates[p].clone()));
        }
    }
    // Held-out predicates get deterministic facts so they are guaranteed to
    // be part of the KB predicate vocabulary without entering any question.
    for (k, p) in extra_predicates.iter().enumerate() {
        for step in 0..3 {
            let subject = (k + 1 + step * 7) % entities.len();
            let object = (subject + 3) % entities.len();
            fact_triples.push(Triple::new(&entities[subject].uri, p, &entities[object].uri));
        }
    }
    let graph = KnowledgeGraph::from_triples(fact_triples);
    let names = KnowledgeGraph::from_triples(name_triples);

    let named_facts: Vec<&(usize, String)> =
        facts.iter().filter(|(i, _)| entities[*i].named).collect();
    let unnamed_facts: Vec<&(usize, String)> =
        facts.iter().filter(|(i, _)| !entities[*i].named).collect();
    if named_facts.is_empty() {
        return Err(Error::Data("generator produced no named facts".to_string()));
    }
    if config.unreachable_fraction > 0.0 && unnamed_facts.is_empty() {
        return Err(Error::Data(
            "generator produced no unnamed facts for unreachable questions".to_string(),
        ));
    }

    let mut make_split = |count: usize| -> (Vec<QuestionRecord>, Vec<bool>) {
        let unreachable = (count as f64 * config.unreachable_fraction).round() as usize;
        let mut records = Vec::with_capacity(count);
        let mut reachable_flags = Vec::with_capacity(count);
        for q in 0..count {
            let reachable = q >= unreachable;
            let pool = if reachable { &named_facts } else { &unnamed_facts };
            let (entity_idx, predicate) = pool.choose(&mut rng).expect("pool checked nonempty");
            let entity = &entities[*entity_idx];
            let (_, _, prop) = PREDICATE_PARTS
                .iter()
                .find(|(d, t, p)| format!("{d}.{t}.{p}") == *predicate)
                .expect("generated from the table");
            let display = capitalize_name(&entity.name);
            let question = match rng.random_range(0..3) {
                0 => format!("who is the {prop} of {display}?"),
                1 => format!("what is the {prop} of {display}?"),
                _ => format!("which {prop} does {display} have?"),
            };
            let object = graph
                .objects_of(&entity.uri, predicate)
                .iter()
                .next()
                .cloned();
            records.push(QuestionRecord {
                question,
                subject: entity.uri.clone(),
                predicate: predicate.clone(),
                object,
            });
            reachable_flags.push(reachable);
        }
        (records, reachable_flags)
    };

    let (train, train_reachable) = make_split(config.train_questions);
    let (test, test_reachable) = make_split(config.test_questions);

    Ok(SynthData {
        config: config.clone(),
        graph,
        names,
        train,
        train_reachable,
        test,
        test_reachable,
    })
}

fn write_kb(graph: &KnowledgeGraph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for t in graph.triples() {
        writeln!(w, "{}\t{}\t{}", t.subject, t.predicate, t.object)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_dataset(records: &[QuestionRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            r.subject,
            r.predicate,
            r.object.as_deref().unwrap_or(""),
            r.question
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl SynthData {
    /// Write `kb.tsv`, `names.tsv`, `train.tsv`, `test.tsv`, and `meta.json`
    /// under `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<SynthPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SynthPaths {
            kb: dir.join("kb.tsv"),
            names: dir.join("names.tsv"),
            train: dir.join("train.tsv"),
            test: dir.join("test.tsv"),
            meta: dir.join("meta.json"),
        };
        write_kb(&self.graph, &paths.kb)?;
        write_kb(&self.names, &paths.names)?;
        write_dataset(&self.train, &paths.train)?;
        write_dataset(&self.test, &paths.test)?;
        let meta = SynthMeta {
            config: self.config.clone(),
            train_reachable: self.train_reachable.clone(),
            test_reachable: self.test_reachable.clone(),
        };
        std::fs::write(&paths.meta, serde_json::to_string_pretty(&meta)?)
            .map_err(|e| Error::io(&paths.meta, e))?;
        Ok(paths)
    }
}
