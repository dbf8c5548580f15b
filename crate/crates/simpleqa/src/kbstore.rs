//! Triple store: loads tab-separated facts and answers subject → predicates
//! and (subject, predicate) → objects queries.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::sync::LazyLock;

use log::warn;

use crate::error::{Error, Result};

/// One (subject, predicate, object) fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines: usize,
    pub malformed: usize,
    pub unique_triples: usize,
    pub duplicates: usize,
}

static EMPTY_SET: LazyLock<BTreeSet<String>> = LazyLock::new(BTreeSet::new);

/// Deduplicated triples with derived lookup maps. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    pred_of: HashMap<String, BTreeSet<String>>,
    objects: HashMap<(String, String), BTreeSet<String>>,
    predicates: BTreeSet<String>,
}

impl KnowledgeGraph {
    pub fn from_triples(input: impl IntoIterator<Item = Triple>) -> Self {
        let set: BTreeSet<Triple> = input.into_iter().collect();
        let mut graph = KnowledgeGraph {
            triples: set.into_iter().collect(),
            ..Default::default()
        };
        for t in &graph.triples {
            graph
                .pred_of
                .entry(t.subject.clone())
                .or_default()
                .insert(t.predicate.clone());
            graph
                .objects
                .entry((t.subject.clone(), t.predicate.clone()))
                .or_default()
                .insert(t.object.clone());
            graph.predicates.insert(t.predicate.clone());
        }
        graph
    }

    /// Parse `subject \t predicate \t object` lines. Malformed lines are
    /// skipped with a warning; more than 10% malformed is a hard error.
    pub fn load_from_reader(reader: impl BufRead, source: &Path) -> Result<(Self, LoadStats)> {
        let mut stats = LoadStats::default();
        let mut seen: BTreeSet<Triple> = BTreeSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.is_empty() {
                continue;
            }
            stats.lines += 1;
            let mut fields = line.split('\t');
            let (s, p, o) = (fields.next(), fields.next(), fields.next());
            match (s, p, o) {
                (Some(s), Some(p), Some(o)) if !s.is_empty() && !p.is_empty() => {
                    if !seen.insert(Triple::new(s, p, o)) {
                        stats.duplicates += 1;
                    }
                }
                _ => {
                    stats.malformed += 1;
                    warn!("{}:{}: malformed triple line, skipped", source.display(), idx + 1);
                }
            }
        }
        if stats.malformed * 10 > stats.lines {
            return Err(Error::Data(format!(
                "{}: {} of {} lines malformed (>10%)",
                source.display(),
                stats.malformed,
                stats.lines
            )));
        }
        stats.unique_triples = seen.len();
        Ok((KnowledgeGraph::from_triples(seen), stats))
    }

    pub fn load(path: &Path) -> Result<(Self, LoadStats)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load_from_reader(std::io::BufReader::new(file), path)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// `Pred(s)`: all predicates the subject appears with. Empty for unknown
    /// subjects.
    pub fn predicates_of(&self, subject: &str) -> &BTreeSet<String> {
        self.pred_of.get(subject).unwrap_or(&EMPTY_SET)
    }

    /// All objects of matching triples; empty if none.
    pub fn objects_of(&self, subject: &str, predicate: &str) -> &BTreeSet<String> {
        self.objects
            .get(&(subject.to_string(), predicate.to_string()))
            .unwrap_or(&EMPTY_SET)
    }

    /// Union of `Pred(s)` over all subjects.
    pub fn predicate_vocabulary(&self) -> &BTreeSet<String> {
        &self.predicates
    }
}
