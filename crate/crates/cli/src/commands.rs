//! Subcommand implementations. Each returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::Path;

use memex_core::gateway::GatewayPolicy;
use memex_core::prompt::SYSTEM_PROMPT;
use memex_core::reward::episode_return;
use memex_core::store::ExperienceStore;
use memex_core::trajectory::{export_segments, segment, CallClass, Outcome, TrajectoryLog};
use memex_core::world::{run_household, HouseholdEnv, OracleFullContext, OracleIndexed};
use memex_core::{replay, KernelError, Policy};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{PolicyChoice, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn print_json(value: &impl Serialize) {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub traj_id: String,
    pub seed: u64,
    pub outcome: String,
    pub success: bool,
    pub reward: f64,
    pub steps: usize,
    pub peak_working_tokens: usize,
    pub mean_working_tokens: f64,
    pub compress_calls: usize,
    pub read_calls: usize,
    pub compressions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_working_tokens: f64,
    pub peak_working_tokens: usize,
    pub mean_compress_calls: f64,
    pub mean_read_calls: f64,
    pub policy_errors: usize,
    pub per_episode: Vec<EpisodeSummary>,
}

fn summarize(seed: u64, t: &TrajectoryLog) -> EpisodeSummary {
    let working: Vec<usize> = t.steps.iter().map(|s| s.working_after).collect();
    let count = |class: CallClass| t.steps.iter().filter(|s| s.class == class).count();
    EpisodeSummary {
        traj_id: t.header.traj_id.clone(),
        seed,
        outcome: match &t.terminal.outcome {
            Outcome::Finished { .. } => "finished".into(),
            Outcome::MaxStepReached => "max_step_reached".into(),
            Outcome::PolicyError { .. } => "policy_error".into(),
        },
        success: t.terminal.breakdown.r_task == 1.0,
        reward: t.terminal.breakdown.total,
        steps: t.steps.len(),
        peak_working_tokens: working.iter().copied().max().unwrap_or(0),
        mean_working_tokens: if working.is_empty() {
            0.0
        } else {
            working.iter().sum::<usize>() as f64 / working.len() as f64
        },
        compress_calls: count(CallClass::Compress),
        read_calls: count(CallClass::Read),
        compressions: t.compressions(),
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

fn run_one(config: &RunConfig, seed: u64) -> Result<(TrajectoryLog, ExperienceStore, HouseholdEnv), String> {
    let mut policy: Box<dyn Policy> = match config.policy {
        PolicyChoice::OracleFull => Box::new(OracleFullContext),
        PolicyChoice::OracleIndexed => Box::new(OracleIndexed::new(config.reads, config.compress_every)),
        PolicyChoice::Gateway => Box::new(GatewayPolicy::new(config.gateway.clone()).map_err(|e| e.to_string())?),
    };
    let (result, env) = run_household(policy.as_mut(), config.episode(seed), SYSTEM_PROMPT).map_err(|e| e.to_string())?;
    Ok((result.trajectory, result.store, env))
}

fn write_outputs(out: &Path, t: &TrajectoryLog, store: &ExperienceStore, env: &HouseholdEnv) -> Result<(), String> {
    let id = &t.header.traj_id;
    t.write(&out.join("trajectories").join(format!("{id}.jsonl")))
        .map_err(|e| e.to_string())?;
    store
        .persist(&out.join("stores").join(format!("{id}.jsonl")))
        .map_err(|e| e.to_string())?;
    let world = serde_json::to_string_pretty(&env.snapshot()).expect("snapshot serializes");
    fs::write(out.join("worlds").join(format!("{id}.json")), world + "\n").map_err(|e| e.to_string())
}

pub fn cmd_run(config: &RunConfig) -> i32 {
    for sub in ["trajectories", "stores", "worlds"] {
        if let Err(e) = fs::create_dir_all(config.out.join(sub)) {
            return fail(EXIT_USAGE, format!("cannot create {}: {e}", config.out.join(sub).display()));
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.workers).build() {
        Ok(pool) => pool,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let results: Vec<Result<EpisodeSummary, String>> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let (t, store, env) = run_one(config, seed)?;
                write_outputs(&config.out, &t, &store, &env)?;
                Ok(summarize(seed, &t))
            })
            .collect()
    });
    let mut per_episode = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => per_episode.push(s),
            Err(e) => return fail(EXIT_USAGE, e),
        }
    }
    let n = per_episode.len();
    let summary = RunSummary {
        policy: config.policy.to_string(),
        episodes: n,
        success_rate: mean(per_episode.iter().map(|e| e.success as u8 as f64), n),
        mean_working_tokens: mean(per_episode.iter().map(|e| e.mean_working_tokens), n),
        peak_working_tokens: per_episode.iter().map(|e| e.peak_working_tokens).max().unwrap_or(0),
        mean_compress_calls: mean(per_episode.iter().map(|e| e.compress_calls as f64), n),
        mean_read_calls: mean(per_episode.iter().map(|e| e.read_calls as f64), n),
        policy_errors: per_episode.iter().filter(|e| e.outcome == "policy_error").count(),
        per_episode,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    if let Err(e) = fs::write(config.out.join("summary.json"), &text) {
        return fail(EXIT_USAGE, format!("cannot write summary: {e}"));
    }
    eprintln!("{:<12} {:>8} {:>6} {:>8} {:>6} {:>9} {:>5}", "episode", "outcome", "steps", "reward", "peak", "compress", "read");
    for e in &summary.per_episode {
        let outcome = if e.success { "success" } else { e.outcome.as_str() };
        eprintln!(
            "{:<12} {:>8} {:>6} {:>8.3} {:>6} {:>9} {:>5}",
            e.traj_id, outcome, e.steps, e.reward, e.peak_working_tokens, e.compress_calls, e.read_calls
        );
    }
    eprintln!(
        "success {:.3} | mean working {:.1} | peak working {} | compress/ep {:.2} | read/ep {:.2}",
        summary.success_rate,
        summary.mean_working_tokens,
        summary.peak_working_tokens,
        summary.mean_compress_calls,
        summary.mean_read_calls
    );
    print!("{text}");
    if summary.policy_errors > 0 {
        return fail(EXIT_FAILURE, format!("{} episodes ended with a policy error", summary.policy_errors));
    }
    EXIT_OK
}

fn load(path: &Path) -> Result<TrajectoryLog, i32> {
    TrajectoryLog::read(path).map_err(|e| fail(EXIT_USAGE, e))
}

pub fn cmd_score(path: &Path, tau: Option<usize>) -> i32 {
    let t = match load(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let tau = tau.unwrap_or(t.header.config.tau);
    if tau == 0 {
        return fail(EXIT_USAGE, "tau must be positive");
    }
    print_json(&episode_return(&t, t.terminal.goal_satisfied, tau));
    EXIT_OK
}

pub fn cmd_segment(path: &Path, out: Option<&Path>) -> i32 {
    let t = match load(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let segments = match segment(&t) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    match out {
        Some(out) => {
            if let Err(e) = export_segments(&segments, out) {
                return fail(EXIT_USAGE, e);
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for s in &segments {
                let _ = writeln!(stdout, "{}", serde_json::to_string(s).expect("segment serializes"));
            }
        }
    }
    eprintln!("{}: {} segments", t.header.traj_id, segments.len());
    EXIT_OK
}

pub fn cmd_replay(path: &Path) -> i32 {
    let t = match load(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let mut env = HouseholdEnv::new(t.header.config.seed);
    match replay(&t, &HouseholdEnv::registry(), &mut env) {
        Ok(r) => {
            print_json(&json!({
                "status": "ok",
                "traj_id": t.header.traj_id,
                "steps": r.trajectory.steps.len(),
                "goal_satisfied": r.trajectory.terminal.goal_satisfied,
            }));
            EXIT_OK
        }
        Err(KernelError::DivergenceDetected { step, detail }) => {
            print_json(&json!({"status": "diverged", "traj_id": t.header.traj_id, "step": step, "detail": detail}));
            fail(EXIT_FAILURE, format!("replay diverged at step {step}"))
        }
        Err(e) => fail(EXIT_USAGE, e),
    }
}

pub fn cmd_store_dump(path: &Path) -> i32 {
    let store = match ExperienceStore::load(path) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let entries: Vec<Value> = store
        .entries()
        .map(|(index, content)| json!({"index": index, "bytes": content.len(), "content": content}))
        .collect();
    let log: Vec<Value> = store
        .write_log()
        .iter()
        .map(|w| json!({"step": w.step, "index": w.index, "byte_length": w.byte_length}))
        .collect();
    print_json(&json!({
        "indices": store.indices().collect::<Vec<_>>(),
        "entries": entries,
        "write_log": log,
    }));
    EXIT_OK
}
