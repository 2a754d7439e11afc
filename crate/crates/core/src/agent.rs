//! The three behavior policies and the per-game step loop wiring perception,
//! learner and decision policy together.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::breakout::{Breakout, EnvError};
use crate::graph::TransitionGraph;
use crate::learner::{feedback_delta, imitation_record, on_feedback, EpisodeBuffer, LearnerConfig};
use crate::perception::{transform_observation, Features};
use crate::policy::{select_action, DecisionTrace, MatchMode, PolicyConfig};
use crate::state::{Action, EncodedState, Feedback, SequenceKey, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    /// Rule-based teacher that tracks the ball's column.
    Automated,
    /// Uniform random baseline; never touches the model.
    Random,
    /// Decision policy over the transition graph, learning per LM.
    Model,
}

impl AgentKind {
    pub fn parse(s: &str) -> Option<AgentKind> {
        match s {
            "automated" => Some(AgentKind::Automated),
            "random" => Some(AgentKind::Random),
            "model" => Some(AgentKind::Model),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Automated => "automated",
            AgentKind::Random => "random",
            AgentKind::Model => "model",
        }
    }
}

/// The rule-based teacher: serve when no ball is visible, otherwise move the
/// paddle center toward the ball's current column.
pub fn automated_act(features: &Features) -> Action {
    if features.ball_x < 0 {
        return Action::Fire;
    }
    if features.paddle_x < features.ball_x {
        Action::Right
    } else if features.paddle_x > features.ball_x {
        Action::Left
    } else {
        Action::Noop
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("sink I/O: {0}")]
    Io(#[from] io::Error),
}

/// One recorded learning event, as emitted on the optional event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub game: u32,
    pub step: u64,
    pub key: SequenceKey,
    pub successor: EncodedState,
    pub delta: i64,
}

/// One decision-trace line.
#[derive(Serialize)]
struct TraceLine<'a> {
    game: u32,
    step: u64,
    #[serde(flatten)]
    trace: &'a DecisionTrace,
    action: i32,
}

/// Optional per-game output sinks.
#[derive(Default)]
pub struct GameSinks<'a> {
    /// JSON-lines decision traces (model agent only).
    pub trace: Option<&'a mut dyn Write>,
    /// Recorded learning events.
    pub events: Option<&'a mut dyn FnMut(TransitionEvent)>,
}

impl GameSinks<'_> {
    pub fn none() -> Self {
        GameSinks::default()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GameSettings {
    pub frame_cap: u32,
    pub learner: LearnerConfig,
    pub policy: PolicyConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GameOutcome {
    pub score: u32,
    pub steps: u64,
    pub pos_events: u32,
    pub neg_events: u32,
    pub terminated: bool,
    pub truncated: bool,
}

/// Plays one full game. The model agent reads (and per LM mutates) `graph`;
/// the automated agent records its experience through the same learner; the
/// random agent never touches the model.
pub fn run_game(
    env_seed: u64,
    policy_seed: u64,
    kind: AgentKind,
    graph: &mut TransitionGraph,
    settings: &GameSettings,
    game_index: u32,
    sinks: &mut GameSinks<'_>,
) -> Result<GameOutcome, GameError> {
    let mut env = Breakout::new(env_seed, settings.frame_cap);
    let mut rng = ChaCha8Rng::seed_from_u64(policy_seed);
    let mut buffer = EpisodeBuffer::new();
    let mut outcome = GameOutcome::default();
    let mut obs = env.observation();
    let mut feedback = Feedback::NONE;

    loop {
        let step = outcome.steps;
        let features = transform_observation(&obs);
        let action = match kind {
            AgentKind::Automated => automated_act(&features),
            AgentKind::Random => uniform_action(&mut rng),
            AgentKind::Model => {
                let decision = select_action(graph, buffer.history(), &settings.policy, &mut rng);
                if let Some(w) = sinks.trace.as_mut() {
                    let line = TraceLine {
                        game: game_index,
                        step,
                        trace: &decision.trace,
                        action: decision.action.id(),
                    };
                    serde_json::to_writer(&mut *w, &line).map_err(io::Error::from)?;
                    w.write_all(b"\n")?;
                }
                debug_assert!(
                    decision.trace.mode == MatchMode::Random
                        || decision.trace.chosen.as_ref().and_then(|s| s.action(graph.encoding()))
                            == Some(decision.action)
                );
                decision.action
            }
        };

        count_event(feedback, &mut outcome);
        if kind != AgentKind::Random {
            buffer.observe(StateVector::new(features.to_vec(), feedback, action));
            learn_from_feedback(feedback, kind, &mut buffer, graph, settings, game_index, step, sinks);
        }

        let result = env.step(action)?;
        outcome.steps += 1;
        feedback = Feedback::new(result.points > 0, result.life_lost);
        obs = result.observation;

        if result.terminated || result.truncated {
            outcome.terminated = result.terminated;
            outcome.truncated = result.truncated;
            // Feedback arriving with the final frame still delimits (and may
            // train on) the closing segment; no action follows, so the
            // terminal state carries a neutral NOOP.
            count_event(feedback, &mut outcome);
            if kind != AgentKind::Random && feedback.is_event() {
                let features = transform_observation(&obs);
                buffer.observe(StateVector::new(features.to_vec(), feedback, Action::Noop));
                learn_from_feedback(
                    feedback,
                    kind,
                    &mut buffer,
                    graph,
                    settings,
                    game_index,
                    outcome.steps,
                    sinks,
                );
            }
            break;
        }
    }

    outcome.score = env.score();
    Ok(outcome)
}

fn count_event(feedback: Feedback, outcome: &mut GameOutcome) {
    match feedback_delta(feedback) {
        d if d > 0 => outcome.pos_events += 1,
        d if d < 0 => outcome.neg_events += 1,
        _ => {}
    }
}

#[allow(clippy::too_many_arguments)]
fn learn_from_feedback(
    feedback: Feedback,
    kind: AgentKind,
    buffer: &mut EpisodeBuffer,
    graph: &mut TransitionGraph,
    settings: &GameSettings,
    game_index: u32,
    step: u64,
    sinks: &mut GameSinks<'_>,
) {
    let delta = feedback_delta(feedback);
    if delta == 0 {
        return;
    }
    let recorded = if kind == AgentKind::Automated {
        imitation_record(buffer, graph, delta, &settings.learner)
    } else {
        on_feedback(buffer, graph, delta, &settings.learner)
    };
    if let Some(emit) = sinks.events.as_mut() {
        for (key, successor) in recorded {
            emit(TransitionEvent { game: game_index, step, key, successor, delta });
        }
    }
}

fn uniform_action<R: Rng>(rng: &mut R) -> Action {
    Action::from_id(rng.random_range(0..Action::COUNT as i32)).unwrap()
}
