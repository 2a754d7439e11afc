//! Interpretable state representation: per-step state vectors, the encoding
//! options that control which components enter the model, sequence keys, and
//! the cosine similarity used for approximate retrieval.

use serde::{Deserialize, Serialize};

/// The four game actions, by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Noop = 0,
    Fire = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::Noop, Action::Fire, Action::Left, Action::Right];

    pub fn from_id(id: i32) -> Option<Action> {
        match id {
            0 => Some(Action::Noop),
            1 => Some(Action::Fire),
            2 => Some(Action::Left),
            3 => Some(Action::Right),
            _ => None,
        }
    }

    pub fn id(self) -> i32 {
        self as i32
    }
}

/// Per-step feedback flags. `pos` and `neg` are never both set in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Feedback {
    pub pos: bool,
    pub neg: bool,
}

impl Feedback {
    pub const NONE: Feedback = Feedback { pos: false, neg: false };

    pub fn new(pos: bool, neg: bool) -> Feedback {
        Feedback { pos, neg }
    }

    pub fn is_event(self) -> bool {
        self.pos || self.neg
    }
}

/// One time-step's interpretable observation.
///
/// `features` are the transformed sensor readings (here: ball column and
/// paddle column, with -1 for ball when no ball is in play), `feedback` the
/// per-step reward flags, and `action` the action executed at this step (the
/// one that produces the transition into the next state).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVector {
    pub features: Vec<i32>,
    pub feedback: Feedback,
    pub action: Action,
}

impl StateVector {
    pub fn new(features: Vec<i32>, feedback: Feedback, action: Action) -> StateVector {
        StateVector { features, feedback, action }
    }
}

/// Controls which optional components enter the encoded vector.
///
/// `include_feedback` is the SR hyper-parameter, `one_hot_actions` is EA.
/// For a fixed config the encoded length is constant, so encoded vectors can
/// serve as exact-match map keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub include_feedback: bool,
    pub one_hot_actions: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig { include_feedback: true, one_hot_actions: false }
    }
}

impl EncodingConfig {
    pub fn action_len(&self) -> usize {
        if self.one_hot_actions {
            Action::COUNT
        } else {
            1
        }
    }

    pub fn encoded_len(&self, feature_len: usize) -> usize {
        feature_len + if self.include_feedback { 2 } else { 0 } + self.action_len()
    }
}

/// A state vector flattened under a fixed [`EncodingConfig`]:
/// features, then `(pos, neg)` iff SR, then the action (scalar id or one-hot).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedState(pub Vec<i32>);

impl EncodedState {
    pub fn components(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Decodes the trailing action component. `None` when the component is
    /// malformed (out-of-range id, or a one-hot block that is not exactly one
    /// `1` among `0`s).
    pub fn action(&self, config: &EncodingConfig) -> Option<Action> {
        let n = config.action_len();
        if self.0.len() < n {
            return None;
        }
        let tail = &self.0[self.0.len() - n..];
        if config.one_hot_actions {
            let mut hot = None;
            for (i, &v) in tail.iter().enumerate() {
                match v {
                    0 => {}
                    1 => {
                        if hot.is_some() {
                            return None;
                        }
                        hot = Some(i as i32);
                    }
                    _ => return None,
                }
            }
            hot.and_then(Action::from_id)
        } else {
            Action::from_id(tail[0])
        }
    }
}

/// Flattens a state into its encoded vector. Deterministic and total on
/// well-formed states.
pub fn encode(state: &StateVector, config: &EncodingConfig) -> EncodedState {
    let mut out = Vec::with_capacity(config.encoded_len(state.features.len()));
    out.extend_from_slice(&state.features);
    if config.include_feedback {
        out.push(state.feedback.pos as i32);
        out.push(state.feedback.neg as i32);
    }
    if config.one_hot_actions {
        for a in Action::ALL {
            out.push((a == state.action) as i32);
        }
    } else {
        out.push(state.action.id());
    }
    EncodedState(out)
}

/// Ordered window of encoded states (oldest first); the model's lookup key.
/// Two keys are equal iff all encoded components are equal element-wise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SequenceKey {
    states: Vec<EncodedState>,
}

impl SequenceKey {
    pub fn new(states: Vec<EncodedState>) -> SequenceKey {
        SequenceKey { states }
    }

    pub fn states(&self) -> &[EncodedState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Total component count across all states.
    pub fn flat_len(&self) -> usize {
        self.states.iter().map(|s| s.len()).sum()
    }

    /// Appends the concatenation of all encoded components as f64 to `out`.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for s in &self.states {
            out.extend(s.0.iter().map(|&v| v as f64));
        }
    }

    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.flatten_into(&mut out);
        out
    }
}

/// Takes the last `cs` states of `history` as a key; `None` when the history
/// holds fewer than `cs` states.
pub fn make_key(history: &[StateVector], cs: usize, config: &EncodingConfig) -> Option<SequenceKey> {
    if cs == 0 || history.len() < cs {
        return None;
    }
    let window = &history[history.len() - cs..];
    Some(SequenceKey::new(window.iter().map(|s| encode(s, config)).collect()))
}

/// Cosine of the angle between two flat vectors. Returns 0.0 when either
/// vector is all-zero, so retrieval stays total on degenerate states.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Cosine similarity between the concatenated encodings of two keys, in
/// [-1, 1]. Both keys must come from the same encoding config and context
/// size; identical non-zero keys yield 1.0.
pub fn key_similarity(a: &SequenceKey, b: &SequenceKey) -> f64 {
    if a == b {
        // Exact equality short-circuits to 1.0 unless the encoding is all-zero.
        let fa = a.flattened();
        return if fa.iter().all(|&v| v == 0.0) { 0.0 } else { 1.0 };
    }
    cosine(&a.flattened(), &b.flattened())
}
