//! Episode history, feedback detection, and the global-feedback utility
//! update: every transition in the segment bounded by two feedback events
//! receives the same delta.

use crate::graph::TransitionGraph;
use crate::state::{encode, EncodedState, EncodingConfig, Feedback, SequenceKey, StateVector};

/// The LM hyper-parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearningMode {
    /// 0 - no learning.
    Off,
    /// 1 - learning on positive feedback only.
    PositiveOnly,
    /// 2 - learning on positive and negative feedback both.
    Full,
}

impl LearningMode {
    pub fn from_id(id: u8) -> Option<LearningMode> {
        match id {
            0 => Some(LearningMode::Off),
            1 => Some(LearningMode::PositiveOnly),
            2 => Some(LearningMode::Full),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            LearningMode::Off => 0,
            LearningMode::PositiveOnly => 1,
            LearningMode::Full => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LearnerConfig {
    pub context_size: usize,
    pub mode: LearningMode,
    pub encoding: EncodingConfig,
}

/// The per-step utility delta: +1 for a positive feedback step, -1 for a
/// negative one, 0 otherwise. Every flagged step is its own feedback event.
/// Should both flags ever be set at once (unreachable in this simulator),
/// negative wins.
pub fn feedback_delta(y: Feedback) -> i64 {
    if y.neg {
        -1
    } else if y.pos {
        1
    } else {
        0
    }
}

/// The state history since (and including the carry-over context before) the
/// last feedback event. Append-only between events.
#[derive(Debug, Clone, Default)]
pub struct EpisodeBuffer {
    history: Vec<StateVector>,
}

impl EpisodeBuffer {
    pub fn new() -> EpisodeBuffer {
        EpisodeBuffer::default()
    }

    pub fn observe(&mut self, state: StateVector) {
        self.history.push(state);
    }

    pub fn history(&self) -> &[StateVector] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Retains exactly the last `cs` states (all of them when fewer), so the
    /// next segment's first transitions still have full context.
    fn flush(&mut self, cs: usize) {
        if self.history.len() > cs {
            self.history.drain(..self.history.len() - cs);
        }
    }
}

/// Applies the global-feedback update for one feedback event: every window of
/// the buffer with a full `cs`-length context records its transition with the
/// same `delta`, subject to the learning-mode gate; the buffer is then
/// flushed to its last `cs` states. Returns the recorded (key, successor)
/// pairs for the optional event log.
pub fn on_feedback(
    buffer: &mut EpisodeBuffer,
    graph: &mut TransitionGraph,
    delta: i64,
    config: &LearnerConfig,
) -> Vec<(SequenceKey, EncodedState)> {
    debug_assert!(delta == 1 || delta == -1, "unit feedback expected");
    let learn = match config.mode {
        LearningMode::Off => false,
        LearningMode::PositiveOnly => delta > 0,
        LearningMode::Full => true,
    };
    let mut recorded = Vec::new();
    let cs = config.context_size;
    if learn && buffer.history.len() > cs {
        let encoded: Vec<EncodedState> =
            buffer.history.iter().map(|s| encode(s, &config.encoding)).collect();
        for i in cs..encoded.len() {
            let key = SequenceKey::new(encoded[i - cs..i].to_vec());
            let successor = encoded[i].clone();
            graph.record_transition(key.clone(), successor.clone(), delta);
            recorded.push((key, successor));
        }
    }
    buffer.flush(cs);
    recorded
}

/// Named entry point for the rule-based teacher: the automated agent's
/// experience populates the same model a model-based agent later loads.
/// Contract-identical to [`on_feedback`].
pub fn imitation_record(
    buffer: &mut EpisodeBuffer,
    graph: &mut TransitionGraph,
    delta: i64,
    config: &LearnerConfig,
) -> Vec<(SequenceKey, EncodedState)> {
    on_feedback(buffer, graph, delta, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Action;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cfg(cs: usize, mode: LearningMode) -> LearnerConfig {
        LearnerConfig { context_size: cs, mode, encoding: EncodingConfig::default() }
    }

    fn state(ball: i32, paddle: i32) -> StateVector {
        StateVector::new(vec![ball, paddle], Feedback::NONE, Action::Noop)
    }

    fn filled(n: usize) -> EpisodeBuffer {
        let mut b = EpisodeBuffer::new();
        for i in 0..n {
            b.observe(state(i as i32, 2 * i as i32));
        }
        b
    }

    // Window enumeration reimplemented from the definition.
    fn window_oracle(states: &[StateVector], cs: usize) -> Vec<(Vec<StateVector>, StateVector)> {
        let mut out = Vec::new();
        for i in 0..states.len() {
            if i >= cs {
                out.push((states[i - cs..i].to_vec(), states[i].clone()));
            }
        }
        out
    }

    #[test]
    fn observe_appends() {
        let mut b = EpisodeBuffer::new();
        b.observe(state(1, 1));
        assert_eq!(b.len(), 1);
        b.observe(state(2, 2));
        assert_eq!(b.history()[1], state(2, 2));

        let mut rng = StdRng::seed_from_u64(5);
        for i in 0..1000 {
            let before = b.len();
            b.observe(state(rng.random_range(0..72), rng.random_range(0..72)));
            assert_eq!(b.len(), before + 1, "append {i}");
        }
    }

    #[test]
    fn delta_signs() {
        assert_eq!(feedback_delta(Feedback::new(true, false)), 1);
        assert_eq!(feedback_delta(Feedback::new(false, true)), -1);
        assert_eq!(feedback_delta(Feedback::NONE), 0);
        // Documented rule for the unreachable double-flag case: negative wins.
        assert_eq!(feedback_delta(Feedback::new(true, true)), -1);
    }

    #[test]
    fn positive_event_records_every_window() {
        let c = cfg(2, LearningMode::Full);
        let mut b = filled(5);
        let states = b.history().to_vec();
        let mut g = TransitionGraph::new(c.encoding);

        let recorded = on_feedback(&mut b, &mut g, 1, &c);
        let expected = window_oracle(&states, 2);
        assert_eq!(recorded.len(), 3);
        assert_eq!(recorded.len(), expected.len());
        for ((key, successor), (ctx, succ)) in recorded.iter().zip(&expected) {
            let want: Vec<EncodedState> = ctx.iter().map(|s| encode(s, &c.encoding)).collect();
            assert_eq!(key.states(), &want[..]);
            assert_eq!(*successor, encode(succ, &c.encoding));
            let t = g.get(key).unwrap().get(successor).unwrap();
            assert_eq!((t.utility, t.count), (1, 1));
        }
    }

    #[test]
    fn positive_only_mode_skips_negative_events() {
        let c = cfg(2, LearningMode::PositiveOnly);
        let mut b = filled(5);
        let mut g = TransitionGraph::new(c.encoding);
        let before = g.clone();

        let recorded = on_feedback(&mut b, &mut g, -1, &c);
        assert!(recorded.is_empty());
        assert_eq!(g, before);
        // The episode boundary still applies.
        assert_eq!(b.len(), 2);

        let recorded = on_feedback(&mut filled(5), &mut g, 1, &c);
        assert_eq!(recorded.len(), 3);
    }

    #[test]
    fn learning_off_never_touches_the_graph() {
        let c = cfg(2, LearningMode::Off);
        let mut g = TransitionGraph::new(c.encoding);
        let before = g.clone();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let mut b = filled(rng.random_range(0..20));
            let delta = if rng.random_bool(0.5) { 1 } else { -1 };
            assert!(on_feedback(&mut b, &mut g, delta, &c).is_empty());
        }
        assert_eq!(g, before);
    }

    #[test]
    fn exact_context_buffer_records_nothing() {
        let c = cfg(3, LearningMode::Full);
        let mut b = filled(3);
        let before = b.history().to_vec();
        let mut g = TransitionGraph::new(c.encoding);
        assert!(on_feedback(&mut b, &mut g, 1, &c).is_empty());
        assert!(g.is_empty());
        assert_eq!(b.history(), &before[..]);
    }

    #[test]
    fn flush_retains_context_across_segments() {
        let c = cfg(2, LearningMode::Full);
        let mut b = filled(5);
        let mut g = TransitionGraph::new(c.encoding);
        on_feedback(&mut b, &mut g, 1, &c);
        assert_eq!(b.len(), 2);
        let retained = b.history().to_vec();

        b.observe(state(100, 100));
        let recorded = on_feedback(&mut b, &mut g, -1, &c);
        // The one new state gets a full-context window spanning the boundary.
        assert_eq!(recorded.len(), 1);
        let want: Vec<EncodedState> = retained.iter().map(|s| encode(s, &c.encoding)).collect();
        assert_eq!(recorded[0].0.states(), &want[..]);
    }

    #[test]
    fn window_count_matches_oracle_for_random_segments() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..200 {
            let cs = rng.random_range(1..5);
            let n = rng.random_range(0..30);
            let c = cfg(cs, LearningMode::Full);
            let mut b = filled(n);
            let states = b.history().to_vec();
            let mut g = TransitionGraph::new(c.encoding);
            let recorded = on_feedback(&mut b, &mut g, 1, &c);
            assert_eq!(recorded.len(), window_oracle(&states, cs).len());
            assert_eq!(b.len(), n.min(cs));
        }
    }

    #[test]
    fn imitation_record_matches_on_feedback_replay() {
        let c = cfg(2, LearningMode::Full);
        let mut rng = StdRng::seed_from_u64(8);
        let mut via_imitation = TransitionGraph::new(c.encoding);
        let mut via_feedback = TransitionGraph::new(c.encoding);
        let mut b1 = EpisodeBuffer::new();
        let mut b2 = EpisodeBuffer::new();
        for _ in 0..500 {
            let s = state(rng.random_range(-1..72), rng.random_range(0..72));
            b1.observe(s.clone());
            b2.observe(s);
            if rng.random_bool(0.1) {
                let delta = if rng.random_bool(0.7) { 1 } else { -1 };
                let a = imitation_record(&mut b1, &mut via_imitation, delta, &c);
                let b = on_feedback(&mut b2, &mut via_feedback, delta, &c);
                assert_eq!(a, b);
            }
        }
        assert_eq!(via_imitation, via_feedback);
    }
}
