//! Inverted surface-form index: normalized entity mentions mapped to
//! (entity URI, frequency) entries, ranked by frequency.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::kbstore::KnowledgeGraph;

/// Lowercase, replace every non-alphanumeric character by a space, collapse
/// whitespace runs, and trim. Idempotent.
pub fn normalize_surface(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let replaced: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    replaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// All token n-grams of the normalized sentence up to length `m`, ordered
/// longest first, then left to right.
pub fn extract_ngrams(sentence: &str, m: usize) -> Vec<String> {
    let normalized = normalize_surface(sentence);
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    let mut out = Vec::new();
    for k in (1..=m.min(tokens.len())).rev() {
        for start in 0..=tokens.len() - k {
            out.push(tokens[start..start + k].join(" "));
        }
    }
    out
}

const FILE_HEADER: &str = "surface\turi\tfrequency";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub entries_added: usize,
    pub labels_skipped: usize,
}

/// Map from normalized surface form to `(uri, frequency)` entries, each list
/// sorted by frequency descending with ties broken by URI.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurfaceFormIndex {
    map: BTreeMap<String, Vec<(String, u64)>>,
}

/// The label predicates harvested by default.
pub fn default_name_predicates() -> BTreeSet<String> {
    ["type.object.name", "common.topic.alias"]
        .into_iter()
        .map(str::to_string)
        .collect()
}

impl SurfaceFormIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `count` occurrences of `(surface, uri)`. The surface is normalized
    /// internally.
    pub fn add(&mut self, surface: &str, uri: &str, count: u64) {
        let surface = normalize_surface(surface);
        if surface.is_empty() || count == 0 {
            return;
        }
        let entries = self.map.entry(surface).or_default();
        match entries.iter_mut().find(|(u, _)| u == uri) {
            Some((_, freq)) => *freq += count,
            None => entries.push((uri.to_string(), count)),
        }
        Self::sort_entries(entries);
    }

    fn sort_entries(entries: &mut [(String, u64)]) {
        entries.sort_by(|(ua, fa), (ub, fb)| fb.cmp(fa).then_with(|| ua.cmp(ub)));
    }

    /// Harvest every `(s, p, label)` triple whose predicate is a name
    /// predicate; frequency counts label multiplicity.
    pub fn build_from_kb(
        graph: &KnowledgeGraph,
        name_predicates: &BTreeSet<String>,
    ) -> (Self, BuildStats) {
        let mut index = SurfaceFormIndex::new();
        let mut stats = BuildStats::default();
        for t in graph.triples() {
            if !name_predicates.contains(&t.predicate) {
                continue;
            }
            if normalize_surface(&t.object).is_empty() {
                warn!(
                    "label for {} normalizes to empty string, skipped",
                    t.subject
                );
                stats.labels_skipped += 1;
                continue;
            }
            index.add(&t.object, &t.subject, 1);
            stats.entries_added += 1;
        }
        (index, stats)
    }

    /// Union of two indexes; frequencies add where `(surface, uri)` occurs in
    /// both.
    pub fn merge(&self, other: &SurfaceFormIndex) -> SurfaceFormIndex {
        let mut out = self.clone();
        for (surface, entries) in &other.map {
            for (uri, freq) in entries {
                out.add(surface, uri, *freq);
            }
        }
        out
    }

    /// Exact-match entries for the normalized mention, best frequency first.
    pub fn lookup(&self, mention: &str) -> &[(String, u64)] {
        self.map
            .get(&normalize_surface(mention))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains_uri(&self, mention: &str, uri: &str) -> bool {
        self.lookup(mention).iter().any(|(u, _)| u == uri)
    }

    /// Number of distinct surface forms.
    pub fn surface_count(&self) -> usize {
        self.map.len()
    }

    /// Number of (surface, uri) entries.
    pub fn entry_count(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }

    /// Sum of all frequency counts.
    pub fn total_frequency(&self) -> u64 {
        self.map
            .values()
            .flat_map(|v| v.iter().map(|(_, f)| f))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, u64)])> {
        self.map.iter().map(|(s, v)| (s.as_str(), v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Write as TSV: header line, then rows sorted by surface and entry rank.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<std::fs::File>, line: String| {
            w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
        };
        write(&mut w, format!("{FILE_HEADER}\n"))?;
        for (surface, entries) in &self.map {
            for (uri, freq) in entries {
                write(&mut w, format!("{surface}\t{uri}\t{freq}\n"))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(header))) if header == FILE_HEADER => {}
            Some((_, Ok(header))) => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("unrecognized index header `{header}`"),
                ))
            }
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(Error::parse(path, 1, "empty index file, header expected")),
        }
        let mut index = SurfaceFormIndex::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, idx + 1, "expected 3 tab-separated fields"));
            }
            let freq: u64 = fields[2]
                .parse()
                .ok()
                .filter(|f| *f >= 1)
                .ok_or_else(|| Error::parse(path, idx + 1, "frequency must be a positive integer"))?;
            if fields[0] != normalize_surface(fields[0]) {
                return Err(Error::parse(path, idx + 1, "surface form is not normalized"));
            }
            index.add(fields[0], fields[1], freq);
        }
        Ok(index)
    }
}
