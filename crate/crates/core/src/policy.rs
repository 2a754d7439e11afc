//! Action selection: retrieve the candidate transitions for the current
//! situation, filter them by the utility/count thresholds, and pick the
//! successor with maximal utility (or utility times evidence count), falling
//! back to a uniformly random action when nothing applies.

use rand::Rng;
use serde::Serialize;

use crate::graph::TransitionGraph;
use crate::state::{make_key, Action, EncodedState, SequenceKey, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// CS: number of states forming the lookup key.
    pub context_size: usize,
    /// SS: minimum cosine similarity for an approximate key match.
    pub similarity_threshold: f64,
    /// SC: minimum experience count of a key to be considered.
    pub min_key_experience: u64,
    /// TU: minimum utility of a candidate transition; `None` disables.
    pub min_utility: Option<i64>,
    /// TC: minimum evidence count of a candidate transition.
    pub min_transition_count: u64,
    /// CU: score candidates by U*C instead of U.
    pub counted_utility: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            context_size: 2,
            similarity_threshold: 0.9,
            min_key_experience: 2,
            min_utility: Some(0),
            min_transition_count: 1,
            counted_utility: false,
        }
    }
}

/// How the action was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    Similar,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub successor: EncodedState,
    pub utility: i64,
    pub count: u64,
    pub action: Action,
}

/// The retrieval result for one situation: the matched key and its surviving
/// candidate transitions (possibly none after filtering).
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub mode: MatchMode,
    pub key: SequenceKey,
    pub similarity: f64,
    pub candidates: Vec<Candidate>,
}

/// One candidate as it appears on a trace line.
#[derive(Debug, Clone, Serialize)]
pub struct TraceCandidate {
    pub successor: EncodedState,
    #[serde(rename = "U")]
    pub utility: i64,
    #[serde(rename = "C")]
    pub count: u64,
    pub score: i64,
}

/// The local-interpretability record: which key matched, every candidate with
/// its score, and the winner. Produced for every decision.
#[derive(Debug, Clone, Serialize)]
pub struct DecisionTrace {
    pub matched_key: Option<SequenceKey>,
    pub similarity: Option<f64>,
    pub candidates: Vec<TraceCandidate>,
    pub chosen: Option<EncodedState>,
    pub mode: MatchMode,
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub action: Action,
    pub trace: DecisionTrace,
}

fn passes_filters(utility: i64, count: u64, config: &PolicyConfig) -> bool {
    if let Some(tu) = config.min_utility {
        if utility < tu {
            return false;
        }
    }
    count >= config.min_transition_count
}

/// Exact lookup first, similarity lookup otherwise; candidates below the
/// TU/TC thresholds are dropped. `None` when no key matched at all.
pub fn candidate_transitions(
    graph: &TransitionGraph,
    key: &SequenceKey,
    config: &PolicyConfig,
) -> Option<CandidateSet> {
    let (mode, matched, similarity, entry) =
        match graph.lookup_exact(key, config.min_key_experience) {
            Some(entry) => (MatchMode::Exact, key.clone(), 1.0, entry),
            None => {
                let m = graph.lookup_similar(
                    key,
                    config.min_key_experience,
                    config.similarity_threshold,
                )?;
                (MatchMode::Similar, m.key.clone(), m.similarity, m.entry)
            }
        };
    let candidates = entry
        .transitions()
        .filter(|(_, t)| passes_filters(t.utility, t.count, config))
        .filter_map(|(successor, t)| {
            successor.action(graph.encoding()).map(|action| Candidate {
                successor: successor.clone(),
                utility: t.utility,
                count: t.count,
                action,
            })
        })
        .collect();
    Some(CandidateSet { mode, key: matched, similarity, candidates })
}

fn score(c: &Candidate, counted_utility: bool) -> i64 {
    if counted_utility {
        c.utility * c.count as i64
    } else {
        c.utility
    }
}

/// Argmax over candidates; ties broken by higher count, then lower action id,
/// then insertion order.
fn best_candidate_index(candidates: &[Candidate], counted_utility: bool) -> usize {
    debug_assert!(!candidates.is_empty());
    let mut best = 0;
    for i in 1..candidates.len() {
        let (a, b) = (&candidates[i], &candidates[best]);
        let (sa, sb) = (score(a, counted_utility), score(b, counted_utility));
        if sa > sb
            || (sa == sb && (a.count > b.count || (a.count == b.count && a.action < b.action)))
        {
            best = i;
        }
    }
    best
}

fn random_decision<R: Rng + ?Sized>(rng: &mut R) -> Decision {
    let action = Action::from_id(rng.random_range(0..Action::COUNT as i32)).unwrap();
    Decision {
        action,
        trace: DecisionTrace {
            matched_key: None,
            similarity: None,
            candidates: Vec::new(),
            chosen: None,
            mode: MatchMode::Random,
        },
    }
}

/// Chooses the next action for the given state history. Falls back to a
/// uniformly random action when the history is shorter than the context size
/// or no candidate survives; otherwise the action is extracted from the
/// winning successor's action component.
pub fn select_action<R: Rng + ?Sized>(
    graph: &TransitionGraph,
    history: &[StateVector],
    config: &PolicyConfig,
    rng: &mut R,
) -> Decision {
    let Some(key) = make_key(history, config.context_size, graph.encoding()) else {
        return random_decision(rng);
    };
    let Some(set) = candidate_transitions(graph, &key, config) else {
        return random_decision(rng);
    };
    if set.candidates.is_empty() {
        return random_decision(rng);
    }
    let winner = best_candidate_index(&set.candidates, config.counted_utility);
    let trace = DecisionTrace {
        matched_key: Some(set.key),
        similarity: Some(set.similarity),
        candidates: set
            .candidates
            .iter()
            .map(|c| TraceCandidate {
                successor: c.successor.clone(),
                utility: c.utility,
                count: c.count,
                score: score(c, config.counted_utility),
            })
            .collect(),
        chosen: Some(set.candidates[winner].successor.clone()),
        mode: set.mode,
    };
    Decision { action: set.candidates[winner].action, trace }
}
