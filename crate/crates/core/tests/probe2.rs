// Temporary diagnosis probe; run with --ignored. Not part of the suite.

use std::path::PathBuf;
use tglearn::harness::{run, RunConfig};
use tglearn::{AgentKind, LearningMode};

fn cfg(agent: AgentKind, games: u32, seed: u64) -> RunConfig {
    RunConfig { agent, games, master_seed: seed, ..RunConfig::default() }
}

fn trace_modes(path: &PathBuf) -> (u64, u64, u64) {
    let text = std::fs::read_to_string(path).unwrap();
    let (mut exact, mut similar, mut random) = (0, 0, 0);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        match v["mode"].as_str().unwrap() {
            "exact" => exact += 1,
            "similar" => similar += 1,
            _ => random += 1,
        }
    }
    (exact, similar, random)
}

#[test]
#[ignore]
fn probe_frozen_variants() {
    let dir = tempfile::tempdir().unwrap();

    for (name, cs, ss_train) in [("cs2", 2usize, 0.9), ("cs1", 1usize, 0.99)] {
        let model = dir.path().join(format!("{name}.json"));
        let mut c = cfg(AgentKind::Automated, 100, 41);
        c.context_size = cs;
        c.save_model = Some(model.clone());
        let auto = run(&c).unwrap();
        println!("[{name}] automated mean={:.1} keys={}", auto.summary.mean, auto.summary.model_keys);

        for (label, ss, sc, tu) in [
            ("defaults", ss_train, 2u64, Some(0i64)),
            ("sc1", ss_train, 1, Some(0)),
            ("tu-none", ss_train, 2, None),
            ("sc1+tu-none", ss_train, 1, None),
            ("ss0.8", 0.8, 2, Some(0)),
        ] {
            let trace = dir.path().join(format!("{name}-{label}.trace"));
            let mut c = cfg(AgentKind::Model, 100, 41);
            c.context_size = cs;
            c.learning_mode = LearningMode::Off;
            c.similarity_threshold = ss;
            c.min_key_experience = sc;
            c.min_utility = tu;
            c.load_model = Some(model.clone());
            c.trace = Some(trace.clone());
            let t = std::time::Instant::now();
            let r = run(&c).unwrap();
            let (e, s, rr) = trace_modes(&trace);
            let total = (e + s + rr) as f64;
            println!(
                "[{name}] frozen {label}: mean={:.1} (ratio {:.2}) exact={:.2} similar={:.2} random={:.3} elapsed={:.0}s",
                r.summary.mean,
                r.summary.mean / auto.summary.mean,
                e as f64 / total,
                s as f64 / total,
                rr as f64 / total,
                t.elapsed().as_secs_f64(),
            );
        }
    }
}
