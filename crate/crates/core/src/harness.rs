//! Experiment orchestration: run configuration, the deterministic seeding
//! discipline, multi-game runs against one persistent model, JSON-lines game
//! logs, sliding-window statistics, hyper-parameter sweeps and model export.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_game, AgentKind, GameError, GameSinks, GameSettings, TransitionEvent};
use crate::breakout::{DEFAULT_FRAME_CAP, MAX_FRAME_CAP};
use crate::graph::{ModelError, TransitionGraph};
use crate::learner::{LearnerConfig, LearningMode};
use crate::policy::PolicyConfig;
use crate::state::EncodingConfig;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    LogParse { path: String, line: usize, message: String },
    #[error("loaded model was built with sr={model_sr}, ea={model_ea} but the run wants sr={run_sr}, ea={run_ea}")]
    EncodingMismatch { model_sr: bool, model_ea: bool, run_sr: bool, run_ea: bool },
}

/// Everything one run needs: the nine hyper-parameters, agent kind, game
/// count, master seed, frame cap and optional file outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub games: u32,
    pub master_seed: u64,
    pub frame_cap: u32,
    /// CS
    pub context_size: usize,
    /// LM
    pub learning_mode: LearningMode,
    /// SR
    pub include_feedback: bool,
    /// EA
    pub one_hot_actions: bool,
    /// CU
    pub counted_utility: bool,
    /// SC
    pub min_key_experience: u64,
    /// SS
    pub similarity_threshold: f64,
    /// TU (None disables the filter)
    pub min_utility: Option<i64>,
    /// TC
    pub min_transition_count: u64,
    pub run_id: Option<String>,
    pub load_model: Option<PathBuf>,
    pub save_model: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agent: AgentKind::Model,
            games: 100,
            master_seed: 41,
            frame_cap: DEFAULT_FRAME_CAP,
            context_size: 2,
            learning_mode: LearningMode::Full,
            include_feedback: true,
            one_hot_actions: false,
            counted_utility: false,
            min_key_experience: 2,
            similarity_threshold: 0.9,
            min_utility: Some(0),
            min_transition_count: 1,
            run_id: None,
            load_model: None,
            save_model: None,
            log: None,
            trace: None,
            events: None,
        }
    }
}

impl RunConfig {
    pub fn encoding(&self) -> EncodingConfig {
        EncodingConfig {
            include_feedback: self.include_feedback,
            one_hot_actions: self.one_hot_actions,
        }
    }

    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            context_size: self.context_size,
            mode: self.learning_mode,
            encoding: self.encoding(),
        }
    }

    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            context_size: self.context_size,
            similarity_threshold: self.similarity_threshold,
            min_key_experience: self.min_key_experience,
            min_utility: self.min_utility,
            min_transition_count: self.min_transition_count,
            counted_utility: self.counted_utility,
        }
    }

    pub fn settings(&self) -> GameSettings {
        GameSettings { frame_cap: self.frame_cap, learner: self.learner(), policy: self.policy() }
    }

    pub fn effective_run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| {
            format!(
                "{}-cs{}-lm{}-ss{}-seed{}",
                self.agent.name(),
                self.context_size,
                self.learning_mode.id(),
                self.similarity_threshold,
                self.master_seed
            )
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.games < 1 {
            return bad("games must be >= 1".into());
        }
        if self.context_size < 1 {
            return bad("cs must be >= 1".into());
        }
        if self.frame_cap < 1 || self.frame_cap > MAX_FRAME_CAP {
            return bad(format!("frame-cap must be in 1..={MAX_FRAME_CAP}"));
        }
        if self.min_key_experience < 1 {
            return bad("sc must be >= 1".into());
        }
        if self.min_transition_count < 1 {
            return bad("tc must be >= 1".into());
        }
        if !self.similarity_threshold.is_finite() {
            return bad("ss must be finite".into());
        }
        Ok(())
    }
}

/// One game log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub run_id: String,
    pub seed: u64,
    pub game: u32,
    pub score: u32,
    pub steps: u64,
    pub frames_cumulative: u64,
    pub pos_events: u32,
    pub neg_events: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub agent: String,
    pub games: u32,
    pub mean: f64,
    pub max: u32,
    pub min: u32,
    pub total_frames: u64,
    pub model_keys: usize,
    pub model_transitions: usize,
    pub elapsed_secs: f64,
    pub steps_per_sec: f64,
}

#[derive(Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub records: Vec<GameRecord>,
    pub graph: TransitionGraph,
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Environment = 0,
    Policy = 1,
}

/// The fixed splitting rule: one master seed deterministically yields the
/// environment seed and the fallback-rng seed for every game index, so the
/// whole multi-game trajectory is a pure function of (master seed, config).
pub fn derive_seed(master: u64, game: u64, stream: SeedStream) -> u64 {
    splitmix64(master ^ splitmix64(game.wrapping_mul(2).wrapping_add(stream as u64 + 1)))
}

fn open_writer(path: &Option<PathBuf>) -> Result<Option<BufWriter<File>>, HarnessError> {
    match path {
        Some(p) => Ok(Some(BufWriter::new(File::create(p)?))),
        None => Ok(None),
    }
}

fn write_json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(io::Error::from)?;
    w.write_all(b"\n")
}

/// Loads (or creates) the model, plays `games` games sequentially against it,
/// writes the configured logs and returns the records, summary and final
/// graph. Saves the model afterwards when requested.
pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let mut graph = match &config.load_model {
        Some(p) => {
            let g = TransitionGraph::load(p)?;
            let want = config.encoding();
            if *g.encoding() != want {
                return Err(HarnessError::EncodingMismatch {
                    model_sr: g.encoding().include_feedback,
                    model_ea: g.encoding().one_hot_actions,
                    run_sr: want.include_feedback,
                    run_ea: want.one_hot_actions,
                });
            }
            g
        }
        None => TransitionGraph::new(config.encoding()),
    };

    let run_id = config.effective_run_id();
    let settings = config.settings();
    let mut log_w = open_writer(&config.log)?;
    let mut trace_w = open_writer(&config.trace)?;
    let mut events_w = open_writer(&config.events)?;
    let has_events = events_w.is_some();

    let mut records = Vec::with_capacity(config.games as usize);
    let mut frames_cumulative = 0u64;
    let start = Instant::now();
    for game in 1..=config.games {
        let env_seed = derive_seed(config.master_seed, game as u64, SeedStream::Environment);
        let policy_seed = derive_seed(config.master_seed, game as u64, SeedStream::Policy);

        let mut event_error: Option<io::Error> = None;
        let mut emit = |e: TransitionEvent| {
            if let (Some(w), None) = (events_w.as_mut(), event_error.as_ref()) {
                if let Err(err) = write_json_line(w, &e) {
                    event_error = Some(err);
                }
            }
        };
        let outcome = {
            let mut sinks = GameSinks {
                trace: trace_w.as_mut().map(|w| w as &mut dyn Write),
                events: if has_events {
                    Some(&mut emit as &mut dyn FnMut(TransitionEvent))
                } else {
                    None
                },
            };
            run_game(env_seed, policy_seed, config.agent, &mut graph, &settings, game, &mut sinks)?
        };
        if let Some(err) = event_error {
            return Err(err.into());
        }

        frames_cumulative += outcome.steps;
        let record = GameRecord {
            run_id: run_id.clone(),
            seed: config.master_seed,
            game,
            score: outcome.score,
            steps: outcome.steps,
            frames_cumulative,
            pos_events: outcome.pos_events,
            neg_events: outcome.neg_events,
        };
        if let Some(w) = log_w.as_mut() {
            write_json_line(w, &record)?;
        }
        records.push(record);
    }
    let elapsed_secs = start.elapsed().as_secs_f64();

    for w in [log_w.as_mut(), trace_w.as_mut(), events_w.as_mut()].into_iter().flatten() {
        w.flush()?;
    }
    if let Some(p) = &config.save_model {
        graph.save(p)?;
    }

    let mean =
        records.iter().map(|r| r.score as f64).sum::<f64>() / records.len().max(1) as f64;
    let summary = RunSummary {
        run_id,
        agent: config.agent.name().to_string(),
        games: config.games,
        mean,
        max: records.iter().map(|r| r.score).max().unwrap_or(0),
        min: records.iter().map(|r| r.score).min().unwrap_or(0),
        total_frames: frames_cumulative,
        model_keys: graph.key_count(),
        model_transitions: graph.transition_count(),
        elapsed_secs,
        steps_per_sec: if elapsed_secs > 0.0 { frames_cumulative as f64 / elapsed_secs } else { 0.0 },
    };
    Ok(RunReport { summary, records, graph })
}

/// Reads a JSON-lines game log; parse failures cite the line number.
pub fn read_game_log(path: &Path) -> Result<Vec<GameRecord>, HarnessError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| HarnessError::LogParse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads a JSON-lines event log written via `RunConfig::events`.
pub fn read_event_log(path: &Path) -> Result<Vec<TransitionEvent>, HarnessError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| HarnessError::LogParse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(event);
    }
    Ok(out)
}

/// One point of the per-game curve: the raw score, the mean over the trailing
/// window, and the cumulative frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub game: u32,
    pub score: u32,
    pub window_mean: f64,
    pub frames_cumulative: u64,
}

pub fn sliding_window(records: &[GameRecord], window: usize) -> Vec<CurvePoint> {
    let window = window.max(1);
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &records[lo..=i];
            let mean = slice.iter().map(|x| x.score as f64).sum::<f64>() / slice.len() as f64;
            CurvePoint {
                game: r.game,
                score: r.score,
                window_mean: mean,
                frames_cumulative: r.frames_cumulative,
            }
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str = "run_id,game,score,window_mean,frames_cumulative";

pub fn write_curve_rows<W: Write>(
    w: &mut W,
    run_id: &str,
    points: &[CurvePoint],
) -> io::Result<()> {
    for p in points {
        writeln!(w, "{run_id},{},{},{},{}", p.game, p.score, p.window_mean, p.frames_cumulative)?;
    }
    Ok(())
}

/// A grid over hyper-parameters and seeds; every list is a sweep axis and the
/// cells are their cartesian product.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    pub context_sizes: Vec<usize>,
    pub learning_modes: Vec<LearningMode>,
    pub include_feedback: Vec<bool>,
    pub one_hot_actions: Vec<bool>,
    pub counted_utility: Vec<bool>,
    pub min_key_experience: Vec<u64>,
    pub similarity_thresholds: Vec<f64>,
    pub min_utility: Vec<Option<i64>>,
    pub min_transition_counts: Vec<u64>,
    pub jobs: usize,
}

impl SweepSpec {
    /// A degenerate grid holding just the base configuration's values.
    pub fn new(base: RunConfig) -> SweepSpec {
        SweepSpec {
            seeds: vec![base.master_seed],
            context_sizes: vec![base.context_size],
            learning_modes: vec![base.learning_mode],
            include_feedback: vec![base.include_feedback],
            one_hot_actions: vec![base.one_hot_actions],
            counted_utility: vec![base.counted_utility],
            min_key_experience: vec![base.min_key_experience],
            similarity_thresholds: vec![base.similarity_threshold],
            min_utility: vec![base.min_utility],
            min_transition_counts: vec![base.min_transition_count],
            jobs: 1,
            base,
        }
    }

    /// Expands the grid in a fixed deterministic order.
    pub fn cells(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &cs in &self.context_sizes {
            for &lm in &self.learning_modes {
                for &sr in &self.include_feedback {
                    for &ea in &self.one_hot_actions {
                        for &cu in &self.counted_utility {
                            for &sc in &self.min_key_experience {
                                for &ss in &self.similarity_thresholds {
                                    for &tu in &self.min_utility {
                                        for &tc in &self.min_transition_counts {
                                            for &seed in &self.seeds {
                                                let mut c = self.base.clone();
                                                c.context_size = cs;
                                                c.learning_mode = lm;
                                                c.include_feedback = sr;
                                                c.one_hot_actions = ea;
                                                c.counted_utility = cu;
                                                c.min_key_experience = sc;
                                                c.similarity_threshold = ss;
                                                c.min_utility = tu;
                                                c.min_transition_count = tc;
                                                c.master_seed = seed;
                                                c.run_id = None;
                                                c.log = None;
                                                c.trace = None;
                                                c.events = None;
                                                c.save_model = None;
                                                out.push(c);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn format_tu(tu: Option<i64>) -> String {
    match tu {
        Some(v) => v.to_string(),
        None => "none".to_string(),
    }
}

/// One sweep result row; `error` is empty on success.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cs: usize,
    pub lm: u8,
    pub sr: bool,
    pub ea: bool,
    pub cu: bool,
    pub sc: u64,
    pub ss: f64,
    pub tu: String,
    pub tc: u64,
    pub seed: u64,
    pub games: u32,
    pub mean: f64,
    pub max: u32,
    pub total_frames: u64,
    pub error: String,
}

fn run_cell(config: &RunConfig) -> SweepRow {
    let mut row = SweepRow {
        cs: config.context_size,
        lm: config.learning_mode.id(),
        sr: config.include_feedback,
        ea: config.one_hot_actions,
        cu: config.counted_utility,
        sc: config.min_key_experience,
        ss: config.similarity_threshold,
        tu: format_tu(config.min_utility),
        tc: config.min_transition_count,
        seed: config.master_seed,
        games: config.games,
        mean: 0.0,
        max: 0,
        total_frames: 0,
        error: String::new(),
    };
    match run(config) {
        Ok(report) => {
            row.mean = report.summary.mean;
            row.max = report.summary.max;
            row.total_frames = report.summary.total_frames;
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

/// Runs every (cell, seed) as an independent run, up to `jobs` in parallel.
/// Per-cell failures land in the row's `error` column; the sweep continues.
/// Row order is the deterministic grid order regardless of `jobs`.
pub fn sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Vec::new();
    }
    let jobs = spec.jobs.max(1).min(cells.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<SweepRow>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let row = run_cell(&cells[i]);
                *slots[i].lock().unwrap() = Some(row);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("cell completed")).collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "cs,lm,sr,ea,cu,sc,ss,tu,tc,seed,games,mean,max,total_frames,error";

pub fn write_sweep_rows<W: Write>(w: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cs, r.lm, r.sr, r.ea, r.cu, r.sc, r.ss, r.tu, r.tc, r.seed, r.games, r.mean, r.max,
            r.total_frames, r.error
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Option<ExportFormat> {
        match s {
            "dot" => Some(ExportFormat::Dot),
            "json" => Some(ExportFormat::Json),
            _ => None,
        }
    }
}

/// Loads a model file and re-emits it as DOT, or as JSON with transitions of
/// count below `min_count` pruned away.
pub fn export_model(
    model: &Path,
    min_count: u64,
    format: ExportFormat,
    out: &Path,
) -> Result<(), HarnessError> {
    if min_count < 1 {
        return Err(HarnessError::Config("min-count must be >= 1".into()));
    }
    let graph = TransitionGraph::load(model)?;
    match format {
        ExportFormat::Dot => {
            let mut w = BufWriter::new(File::create(out)?);
            graph.export_dot(min_count, &mut w)?;
            w.flush()?;
        }
        ExportFormat::Json => {
            graph.pruned(min_count).save(out)?;
        }
    }
    Ok(())
}

/// Parses a flat `key=value` config file ('#' starts a comment line).
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "line {}: expected key=value, got {raw:?}",
                i + 1
            )));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// TU accepts an integer or `none` (the filter-disabling value).
pub fn parse_tu(value: &str) -> Option<Option<i64>> {
    if value.eq_ignore_ascii_case("none") {
        return Some(None);
    }
    value.parse().ok().map(Some)
}

/// Applies one config-file entry. Unknown keys and unparsable values are
/// usage errors naming the offending key.
pub fn apply_config_entry(
    config: &mut RunConfig,
    key: &str,
    value: &str,
) -> Result<(), HarnessError> {
    let bad = |expected: &str| {
        HarnessError::Config(format!("key {key:?}: invalid value {value:?}, expected {expected}"))
    };
    match key {
        "agent" => config.agent = AgentKind::parse(value).ok_or_else(|| bad("automated|random|model"))?,
        "games" => config.games = value.parse().map_err(|_| bad("integer"))?,
        "seed" => config.master_seed = value.parse().map_err(|_| bad("integer"))?,
        "frame-cap" | "frame_cap" => config.frame_cap = value.parse().map_err(|_| bad("integer"))?,
        "cs" => config.context_size = value.parse().map_err(|_| bad("integer"))?,
        "lm" => {
            let id: u8 = value.parse().map_err(|_| bad("0|1|2"))?;
            config.learning_mode = LearningMode::from_id(id).ok_or_else(|| bad("0|1|2"))?;
        }
        "sr" => config.include_feedback = parse_bool(value).ok_or_else(|| bad("true|false"))?,
        "ea" => config.one_hot_actions = parse_bool(value).ok_or_else(|| bad("true|false"))?,
        "cu" => config.counted_utility = parse_bool(value).ok_or_else(|| bad("true|false"))?,
        "sc" => config.min_key_experience = value.parse().map_err(|_| bad("integer"))?,
        "ss" => config.similarity_threshold = value.parse().map_err(|_| bad("number"))?,
        "tu" => config.min_utility = parse_tu(value).ok_or_else(|| bad("integer or none"))?,
        "tc" => config.min_transition_count = value.parse().map_err(|_| bad("integer"))?,
        "run-id" | "run_id" => config.run_id = Some(value.to_string()),
        "load-model" | "load_model" => config.load_model = Some(PathBuf::from(value)),
        "save-model" | "save_model" => config.save_model = Some(PathBuf::from(value)),
        "log" => config.log = Some(PathBuf::from(value)),
        "trace" => config.trace = Some(PathBuf::from(value)),
        "events" => config.events = Some(PathBuf::from(value)),
        _ => return Err(HarnessError::Config(format!("unknown config key {key:?}"))),
    }
    Ok(())
}
