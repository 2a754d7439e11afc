//! The learned model: an in-memory keyed store of transitions from state
//! sequences to successor states, attributed with utility and evidence count,
//! with exact and similarity-based retrieval and JSON/DOT serialization.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::map::Entry;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{EncodedState, EncodingConfig, SequenceKey};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file I/O: {0}")]
    Io(#[from] io::Error),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
}

/// Accumulated utility and evidence count of one stored transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub utility: i64,
    pub count: u64,
}

/// Everything stored under one sequence key: the per-key experience count and
/// the map of successor states, in insertion order.
#[derive(Debug, Clone)]
pub struct KeyEntry {
    key_count: u64,
    transitions: IndexMap<EncodedState, TransitionStats>,
    // Flattened f64 form and its norm, cached for the similarity scan.
    flat: Vec<f64>,
    norm: f64,
}

impl KeyEntry {
    fn new(key: &SequenceKey) -> KeyEntry {
        let flat = key.flattened();
        let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        KeyEntry { key_count: 0, transitions: IndexMap::new(), flat, norm }
    }

    pub fn key_count(&self) -> u64 {
        self.key_count
    }

    pub fn transitions(&self) -> impl ExactSizeIterator<Item = (&EncodedState, &TransitionStats)> {
        self.transitions.iter()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn get(&self, successor: &EncodedState) -> Option<&TransitionStats> {
        self.transitions.get(successor)
    }
}

/// A similarity-based retrieval result.
#[derive(Debug, Clone, Copy)]
pub struct SimilarMatch<'a> {
    pub key: &'a SequenceKey,
    pub similarity: f64,
    pub entry: &'a KeyEntry,
}

/// The transition graph. Keys and successors are stored in insertion order,
/// which is also the deterministic tie-break order for retrieval.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    encoding: EncodingConfig,
    entries: IndexMap<SequenceKey, KeyEntry>,
}

impl TransitionGraph {
    pub fn new(encoding: EncodingConfig) -> TransitionGraph {
        TransitionGraph { encoding, entries: IndexMap::new() }
    }

    pub fn encoding(&self) -> &EncodingConfig {
        &self.encoding
    }

    /// Number of distinct sequence keys.
    pub fn key_count(&self) -> usize {
        self.entries.len()
    }

    /// Total number of stored transitions across all keys.
    pub fn transition_count(&self) -> usize {
        self.entries.values().map(|e| e.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&SequenceKey, &KeyEntry)> {
        self.entries.iter()
    }

    /// Raw entry access without the experience-count filter (tests, export).
    pub fn get(&self, key: &SequenceKey) -> Option<&KeyEntry> {
        self.entries.get(key)
    }

    /// Records one learning event: the transition's count grows by 1, its
    /// utility by `delta_u`, and the key's experience count by 1. New keys and
    /// successors are created on first sight.
    pub fn record_transition(&mut self, key: SequenceKey, successor: EncodedState, delta_u: i64) {
        assert!(delta_u == 1 || delta_u == -1, "unit feedback expected, got {delta_u}");
        let entry = match self.entries.entry(key) {
            Entry::Occupied(o) => o.into_mut(),
            Entry::Vacant(v) => {
                let fresh = KeyEntry::new(v.key());
                v.insert(fresh)
            }
        };
        entry.key_count += 1;
        let stats = entry
            .transitions
            .entry(successor)
            .or_insert(TransitionStats { utility: 0, count: 0 });
        stats.utility += delta_u;
        stats.count += 1;
    }

    /// Returns the key's transitions iff the key exists and its experience
    /// count reaches `min_key_experience` (the SC threshold).
    pub fn lookup_exact(&self, key: &SequenceKey, min_key_experience: u64) -> Option<&KeyEntry> {
        self.entries.get(key).filter(|e| e.key_count >= min_key_experience)
    }

    /// Scans all keys with experience count >= `min_key_experience` and
    /// returns the one with maximal cosine similarity to `key`, provided that
    /// similarity reaches `threshold`. Ties are broken by insertion order
    /// (the earlier key wins). Intended for when [`lookup_exact`] missed.
    ///
    /// [`lookup_exact`]: TransitionGraph::lookup_exact
    pub fn lookup_similar(
        &self,
        key: &SequenceKey,
        min_key_experience: u64,
        threshold: f64,
    ) -> Option<SimilarMatch<'_>> {
        let mut query = Vec::with_capacity(key.flat_len());
        key.flatten_into(&mut query);
        let qnorm = query.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut best: Option<(f64, &SequenceKey, &KeyEntry)> = None;
        for (stored, entry) in &self.entries {
            if entry.key_count < min_key_experience || entry.flat.len() != query.len() {
                continue;
            }
            let sim = if qnorm == 0.0 || entry.norm == 0.0 {
                0.0
            } else {
                let dot: f64 = query.iter().zip(&entry.flat).map(|(a, b)| a * b).sum();
                dot / (qnorm * entry.norm)
            };
            if best.map_or(true, |(b, _, _)| sim > b) {
                best = Some((sim, stored, entry));
            }
        }
        best.and_then(|(similarity, key, entry)| {
            (similarity >= threshold).then_some(SimilarMatch { key, similarity, entry })
        })
    }

    /// A copy with transitions of count < `min_count` removed; keys left with
    /// no transitions are dropped and key counts are recomputed so the result
    /// is itself a valid graph.
    pub fn pruned(&self, min_count: u64) -> TransitionGraph {
        let mut out = TransitionGraph::new(self.encoding);
        for (key, entry) in &self.entries {
            let surviving: IndexMap<EncodedState, TransitionStats> = entry
                .transitions
                .iter()
                .filter(|(_, t)| t.count >= min_count)
                .map(|(s, t)| (s.clone(), *t))
                .collect();
            if surviving.is_empty() {
                continue;
            }
            let mut fresh = KeyEntry::new(key);
            fresh.key_count = surviving.values().map(|t| t.count).sum();
            fresh.transitions = surviving;
            out.entries.insert(key.clone(), fresh);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        let doc = ModelFile {
            version: MODEL_FORMAT_VERSION,
            encoding_config: self.encoding,
            entries: self
                .entries
                .iter()
                .map(|(key, entry)| FileEntry {
                    key: key.clone(),
                    key_count: entry.key_count,
                    transitions: entry
                        .transitions
                        .iter()
                        .map(|(successor, stats)| FileTransition {
                            successor: successor.clone(),
                            utility: stats.utility,
                            count: stats.count,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_writer(w, &doc).map_err(|e| match e.io_error_kind() {
            Some(_) => ModelError::Io(e.into()),
            None => ModelError::Malformed(e.to_string()),
        })
    }

    pub fn load(path: &Path) -> Result<TransitionGraph, ModelError> {
        let file = File::open(path)?;
        Self::read_json(BufReader::new(file))
    }

    pub fn read_json<R: io::Read>(r: R) -> Result<TransitionGraph, ModelError> {
        let doc: ModelFile =
            serde_json::from_reader(r).map_err(|e| ModelError::Malformed(e.to_string()))?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion {
                found: doc.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let mut graph = TransitionGraph::new(doc.encoding_config);
        let mut state_len: Option<usize> = None;
        let mut key_len: Option<usize> = None;
        for (i, fe) in doc.entries.into_iter().enumerate() {
            let check = |ok: bool, what: &str| {
                if ok {
                    Ok(())
                } else {
                    Err(ModelError::Malformed(format!("entry {i}: {what}")))
                }
            };
            check(!fe.key.is_empty(), "empty key")?;
            check(!fe.transitions.is_empty(), "empty transition list")?;
            check(
                *key_len.get_or_insert(fe.key.len()) == fe.key.len(),
                "inconsistent context size",
            )?;
            for state in fe.key.states().iter().map(Some).chain(std::iter::once(None)) {
                if let Some(s) = state {
                    check(*state_len.get_or_insert(s.len()) == s.len(), "inconsistent state length")?;
                }
            }
            let mut entry = KeyEntry::new(&fe.key);
            entry.key_count = fe.key_count;
            let mut total = 0u64;
            for ft in fe.transitions {
                check(
                    *state_len.get_or_insert(ft.successor.len()) == ft.successor.len(),
                    "inconsistent state length",
                )?;
                check(
                    ft.successor.action(&doc.encoding_config).is_some(),
                    "invalid action component in successor",
                )?;
                check(ft.count >= 1, "transition count below 1")?;
                check(ft.utility.unsigned_abs() <= ft.count, "utility magnitude exceeds count")?;
                total += ft.count;
                let stats = TransitionStats { utility: ft.utility, count: ft.count };
                check(entry.transitions.insert(ft.successor, stats).is_none(), "duplicate successor")?;
            }
            check(total == fe.key_count, "key_count does not match transition counts")?;
            let duplicate = graph.entries.insert(fe.key, entry).is_some();
            check(!duplicate, "duplicate key")?;
        }
        Ok(graph)
    }

    /// Emits the graph as a DOT digraph: key and successor nodes labeled with
    /// their encoded vectors, edges labeled `U=<u> C=<c>`, edges of count
    /// below `min_count` omitted.
    pub fn export_dot<W: Write>(&self, min_count: u64, w: &mut W) -> io::Result<()> {
        writeln!(w, "digraph transitions {{")?;
        let mut successor_ids: IndexMap<&EncodedState, usize> = IndexMap::new();
        let mut pending_edges: Vec<String> = Vec::new();
        for (ki, (key, entry)) in self.entries.iter().enumerate() {
            let mut declared = false;
            for (successor, stats) in &entry.transitions {
                if stats.count < min_count {
                    continue;
                }
                if !declared {
                    writeln!(w, "  k{ki} [shape=box, label=\"{}\"];", key_label(key))?;
                    declared = true;
                }
                let next = successor_ids.len();
                let si = *successor_ids.entry(successor).or_insert(next);
                pending_edges.push(format!(
                    "  k{ki} -> s{si} [label=\"U={} C={}\"];",
                    stats.utility, stats.count
                ));
            }
        }
        for (successor, si) in &successor_ids {
            writeln!(w, "  s{si} [label=\"{}\"];", vector_label(successor))?;
        }
        for edge in pending_edges {
            writeln!(w, "{edge}")?;
        }
        writeln!(w, "}}")
    }
}

impl PartialEq for TransitionGraph {
    /// Structural identity: same encoding, same keys and successors in the
    /// same order, with equal utilities and counts.
    fn eq(&self, other: &Self) -> bool {
        self.encoding == other.encoding
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|((ka, ea), (kb, eb))| {
                    ka == kb
                        && ea.key_count == eb.key_count
                        && ea.transitions.len() == eb.transitions.len()
                        && ea
                            .transitions
                            .iter()
                            .zip(eb.transitions.iter())
                            .all(|((sa, ta), (sb, tb))| sa == sb && ta == tb)
                })
    }
}

fn vector_label(state: &EncodedState) -> String {
    let parts: Vec<String> = state.components().iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(","))
}

fn key_label(key: &SequenceKey) -> String {
    let parts: Vec<String> = key.states().iter().map(vector_label).collect();
    parts.join(" ")
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    encoding_config: EncodingConfig,
    entries: Vec<FileEntry>,
}

#[derive(Serialize, Deserialize)]
struct FileEntry {
    key: SequenceKey,
    key_count: u64,
    transitions: Vec<FileTransition>,
}

#[derive(Serialize, Deserialize)]
struct FileTransition {
    successor: EncodedState,
    utility: i64,
    count: u64,
}
