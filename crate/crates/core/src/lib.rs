//! Experiential learning on state-sequence transition graphs.
//!
//! The model is a keyed store of transitions from short sequences of
//! interpretable states to successor states, each attributed with a signed
//! utility and an evidence count. Learning applies one global feedback delta
//! to every transition of an episode segment; decisions retrieve the current
//! situation (exactly or by cosine similarity) and pick the successor with
//! maximal utility. A deterministic brick-breaking environment and an
//! experiment harness round out the crate.

pub mod agent;
pub mod breakout;
pub mod graph;
pub mod harness;
pub mod learner;
pub mod perception;
pub mod policy;
pub mod state;

pub use agent::{automated_act, run_game, AgentKind, GameOutcome, GameSettings, GameSinks};
pub use breakout::{Breakout, EnvError, Observation, StepResult};
pub use graph::{ModelError, SimilarMatch, TransitionGraph, TransitionStats, MODEL_FORMAT_VERSION};
pub use harness::{GameRecord, HarnessError, RunConfig, RunReport, RunSummary, SweepSpec};
pub use learner::{
    feedback_delta, imitation_record, on_feedback, EpisodeBuffer, LearnerConfig, LearningMode,
};
pub use perception::{transform, transform_observation, Features, PerceptionError};
pub use policy::{candidate_transitions, select_action, Decision, DecisionTrace, MatchMode, PolicyConfig};
pub use state::{
    cosine, encode, key_similarity, make_key, Action, EncodedState, EncodingConfig, Feedback,
    SequenceKey, StateVector,
};
