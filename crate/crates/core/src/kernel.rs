//! The agent loop.
//!
//! Each step: inject a context status line, query the policy with the window
//! snapshot, append the raw output, then dispatch the first well-formed call:
//! `CompressExperience` rewrites the window, `ReadExperience` appends an
//! archived block, `finish` ends the episode, and anything else goes to the
//! tool registry.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::memory::{self, compress_failed_observation, parse_compress_arguments, DEFAULT_SUMMARY_TOKENS};
use crate::message::{count_tokens, make_context_status, ContextWindow, Message, MessageKind};
use crate::reward::RewardAccumulator;
use crate::store::ExperienceStore;
use crate::toolcall::parse_assistant_output;
use crate::trajectory::{
    CallClass, Outcome, StepRecord, StoreEvent, StoreOp, TrajectoryHeader, TrajectoryLog, TrajectoryTerminal,
    TRAJECTORY_SCHEMA,
};

pub const COMPRESS_TOOL: &str = "CompressExperience";
pub const READ_TOOL: &str = "ReadExperience";
pub const FINISH_TOOL: &str = "finish";

pub const NO_CALL_OBSERVATION: &str = "Error: no valid tool call found. You MUST call a tool.";

pub fn is_reserved(name: &str) -> bool {
    matches!(name, COMPRESS_TOOL | READ_TOOL | FINISH_TOOL)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy exceeded its {0:?} timeout")]
    Timeout(Duration),
    #[error("policy failed: {0}")]
    Failed(String),
}

/// Maps a window snapshot to raw assistant output (thinking plus tool call).
pub trait Policy {
    fn act(&mut self, window: &ContextWindow) -> Result<String, PolicyError>;
}

impl<F> Policy for F
where
    F: FnMut(&ContextWindow) -> Result<String, PolicyError>,
{
    fn act(&mut self, window: &ContextWindow) -> Result<String, PolicyError> {
        self(window)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolOutput {
    pub observation: String,
    pub mutating: bool,
}

impl ToolOutput {
    pub fn new(observation: impl Into<String>, mutating: bool) -> Self {
        Self {
            observation: observation.into(),
            mutating,
        }
    }
}

type ToolFn<S> = Box<dyn Fn(&mut S, &Map<String, Value>) -> ToolOutput + Send + Sync>;

/// Tools executed against environment state `S`.
pub struct ToolRegistry<S> {
    tools: BTreeMap<String, ToolFn<S>>,
}

impl<S> Default for ToolRegistry<S> {
    fn default() -> Self {
        Self { tools: BTreeMap::new() }
    }
}

impl<S> ToolRegistry<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: &str, tool: F) -> Result<(), KernelError>
    where
        F: Fn(&mut S, &Map<String, Value>) -> ToolOutput + Send + Sync + 'static,
    {
        if is_reserved(name) {
            return Err(KernelError::ReservedToolName(name.to_string()));
        }
        if name.is_empty() {
            return Err(KernelError::InvalidConfig("tool name must be non-empty".into()));
        }
        self.tools.insert(name.to_string(), Box::new(tool));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    fn execute(&self, state: &mut S, name: &str, args: &Map<String, Value>) -> Option<ToolOutput> {
        self.tools.get(name).map(|tool| tool(state, args))
    }
}

/// Goal predicate evaluated when the episode ends.
pub trait TaskEnvironment {
    fn goal_satisfied(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub t_max: usize,
    /// Context threshold announced in status lines and used by the context penalty.
    pub tau: usize,
    /// Summary budget in tokens.
    pub tau_sigma: usize,
    pub seed: u64,
    pub policy_timeout_ms: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            t_max: 60,
            tau: 8000,
            tau_sigma: DEFAULT_SUMMARY_TOKENS,
            seed: 0,
            policy_timeout_ms: 60_000,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if self.t_max < 1 {
            return Err(KernelError::InvalidConfig("t_max must be at least 1".into()));
        }
        if self.tau == 0 || self.tau_sigma == 0 {
            return Err(KernelError::InvalidConfig("tau and tau_sigma must be positive".into()));
        }
        if self.policy_timeout_ms == 0 {
            return Err(KernelError::InvalidConfig("policy timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn policy_timeout(&self) -> Duration {
        Duration::from_millis(self.policy_timeout_ms)
    }
}

/// Fixed messages and identifiers for one episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSetup {
    pub traj_id: String,
    pub group_id: String,
    pub system_prompt: String,
    pub task: String,
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("tool name '{0}' is reserved for the kernel")]
    ReservedToolName(String),
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(String),
    #[error("replay diverged at step {step}: {detail}")]
    DivergenceDetected { step: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub trajectory: TrajectoryLog,
    pub store: ExperienceStore,
    pub window: ContextWindow,
}

/// Mutable state of one running episode.
pub struct Episode<'a, S> {
    tools: &'a ToolRegistry<S>,
    env: &'a mut S,
    setup: EpisodeSetup,
    config: EpisodeConfig,
    window: ContextWindow,
    store: ExperienceStore,
    steps: Vec<StepRecord>,
    rewards: RewardAccumulator,
    full_history_tokens: usize,
    pending_status: Option<(String, usize)>,
    answer: Option<Value>,
}

impl<'a, S: TaskEnvironment> Episode<'a, S> {
    pub fn new(
        tools: &'a ToolRegistry<S>,
        env: &'a mut S,
        setup: EpisodeSetup,
        config: EpisodeConfig,
    ) -> Result<Self, KernelError> {
        config.validate()?;
        if tools.is_empty() {
            return Err(KernelError::InvalidConfig("tool registry is empty".into()));
        }
        Ok(Self {
            tools,
            env,
            window: ContextWindow::new(setup.system_prompt.clone(), setup.task.clone()),
            rewards: RewardAccumulator::new(config.tau),
            setup,
            config,
            store: ExperienceStore::new(),
            steps: Vec::new(),
            full_history_tokens: 0,
            pending_status: None,
            answer: None,
        })
    }

    pub fn window(&self) -> &ContextWindow {
        &self.window
    }

    pub fn store(&self) -> &ExperienceStore {
        &self.store
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn is_done(&self) -> bool {
        self.answer.is_some() || self.steps.len() >= self.config.t_max
    }

    /// Append the status line for the next step and return the snapshot the policy sees.
    pub fn begin_step(&mut self) -> &ContextWindow {
        let working_before = self.window.working_tokens();
        let status = make_context_status(&self.window, self.config.tau);
        let payload = status.payload().to_string();
        self.window.push(status).expect("status is a working message");
        self.pending_status = Some((payload, working_before));
        &self.window
    }

    /// Execute one assistant output. `begin_step` must have been called.
    pub fn apply(&mut self, output: &str) -> &StepRecord {
        let (status, working_before) = self
            .pending_status
            .take()
            .expect("begin_step must precede apply");
        let t = self.steps.len() + 1;
        let parsed = parse_assistant_output(output);
        let z_c = Message::new(MessageKind::ThinkingAndCall, output);
        self.full_history_tokens += z_c.token_count();
        self.window.push(z_c).expect("assistant output is a working message");

        let mut record = StepRecord {
            t,
            status,
            output: output.to_string(),
            call: parsed.first_call().cloned(),
            class: CallClass::NoCall,
            observation: None,
            observation_kind: None,
            mutating: false,
            attempted: parsed.attempted(),
            malformed: parsed.malformed.iter().map(|m| m.class).collect(),
            working_before,
            working_after: 0,
            total_after: 0,
            messages_after: 0,
            full_history_tokens: 0,
            compressed: false,
            compress_report: None,
            store_events: Vec::new(),
        };

        match parsed.first_call() {
            None => self.observe(&mut record, MessageKind::ToolOutput, NO_CALL_OBSERVATION.to_string()),
            Some(call) if call.name == COMPRESS_TOOL => {
                record.class = CallClass::Compress;
                let result = parse_compress_arguments(&call.arguments).and_then(|(summary, blocks)| {
                    memory::compress(
                        &mut self.window,
                        &mut self.store,
                        t,
                        &summary,
                        &blocks,
                        self.config.tau_sigma,
                    )
                });
                match result {
                    Ok(report) => {
                        record.store_events = report
                            .archived
                            .iter()
                            .map(|b| StoreEvent {
                                op: StoreOp::Write,
                                index: b.index.clone(),
                                byte_length: b.byte_length,
                            })
                            .collect();
                        record.observation = Some(report.observation());
                        record.compressed = true;
                        record.compress_report = Some(report);
                    }
                    Err(err) => self.observe(&mut record, MessageKind::ToolOutput, compress_failed_observation(&err)),
                }
            }
            Some(call) if call.name == READ_TOOL => {
                record.class = CallClass::Read;
                match call.arg_str("db_index") {
                    Some(index) => {
                        let outcome = memory::read(&mut self.window, &self.store, index);
                        let appended = self.window.messages().last().expect("read appends a message");
                        self.full_history_tokens += appended.token_count();
                        record.observation_kind = Some(appended.kind());
                        record.store_events.push(StoreEvent {
                            op: if outcome.content.is_some() { StoreOp::Read } else { StoreOp::Miss },
                            index: index.to_string(),
                            byte_length: outcome.content.as_ref().map_or(0, String::len),
                        });
                        record.observation = Some(outcome.observation);
                    }
                    None => self.observe(
                        &mut record,
                        MessageKind::ToolOutput,
                        "Error: ReadExperience requires a string argument 'db_index'.".to_string(),
                    ),
                }
            }
            Some(call) if call.name == FINISH_TOOL => {
                record.class = CallClass::Finish;
                self.answer = Some(Value::Object(call.arguments.clone()));
            }
            Some(call) => {
                record.class = CallClass::Environment;
                let output = self
                    .tools
                    .execute(self.env, &call.name, &call.arguments)
                    .unwrap_or_else(|| ToolOutput::new(format!("Error: unknown tool '{}'.", call.name), false));
                record.mutating = output.mutating;
                self.observe(&mut record, MessageKind::ToolOutput, output.observation);
            }
        }

        record.working_after = self.window.working_tokens();
        record.total_after = self.window.total_tokens();
        record.messages_after = self.window.len();
        record.full_history_tokens = self.full_history_tokens;
        self.rewards.observe(&record);
        self.steps.push(record);
        self.steps.last().expect("just pushed")
    }

    fn observe(&mut self, record: &mut StepRecord, kind: MessageKind, text: String) {
        self.full_history_tokens += count_tokens(&text);
        self.window
            .push(Message::new(kind, text.clone()))
            .expect("observations are working messages");
        record.observation_kind = Some(kind);
        record.observation = Some(text);
    }

    fn conclude(self, policy_error: Option<PolicyError>) -> EpisodeResult {
        let outcome = match (self.answer, policy_error) {
            (Some(answer), _) => Outcome::Finished { answer },
            (None, Some(err)) => Outcome::PolicyError {
                message: err.to_string(),
            },
            (None, None) => Outcome::MaxStepReached,
        };
        let goal_satisfied = self.env.goal_satisfied();
        let breakdown = self.rewards.breakdown(goal_satisfied);
        let trajectory = TrajectoryLog {
            header: TrajectoryHeader {
                schema: TRAJECTORY_SCHEMA.to_string(),
                traj_id: self.setup.traj_id,
                group_id: self.setup.group_id,
                config: self.config,
                system_prompt: self.setup.system_prompt,
                task: self.setup.task,
            },
            steps: self.steps,
            terminal: TrajectoryTerminal {
                outcome: outcome.clone(),
                goal_satisfied,
                breakdown,
            },
        };
        EpisodeResult {
            outcome,
            trajectory,
            store: self.store,
            window: self.window,
        }
    }
}

/// Run one episode to completion.
pub fn run_episode<S: TaskEnvironment>(
    policy: &mut dyn Policy,
    tools: &ToolRegistry<S>,
    env: &mut S,
    setup: EpisodeSetup,
    config: EpisodeConfig,
) -> Result<EpisodeResult, KernelError> {
    let timeout = config.policy_timeout();
    let mut episode = Episode::new(tools, env, setup, config)?;
    while !episode.is_done() {
        let started = Instant::now();
        let response = policy.act(episode.begin_step());
        let response = match response {
            Ok(_) if started.elapsed() > timeout => Err(PolicyError::Timeout(timeout)),
            other => other,
        };
        match response {
            Ok(output) => {
                episode.apply(&output);
            }
            Err(err) => {
                tracing::warn!(step = episode.steps().len() + 1, error = %err, "policy error");
                return Ok(episode.conclude(Some(err)));
            }
        }
    }
    Ok(episode.conclude(None))
}

/// Re-execute the recorded outputs against fresh state, requiring identical
/// status lines and observations at every step.
pub fn replay<S: TaskEnvironment>(
    trajectory: &TrajectoryLog,
    tools: &ToolRegistry<S>,
    env: &mut S,
) -> Result<EpisodeResult, KernelError> {
    let header = &trajectory.header;
    let setup = EpisodeSetup {
        traj_id: header.traj_id.clone(),
        group_id: header.group_id.clone(),
        system_prompt: header.system_prompt.clone(),
        task: header.task.clone(),
    };
    let mut episode = Episode::new(tools, env, setup, header.config.clone())?;
    for recorded in &trajectory.steps {
        if episode.is_done() {
            return Err(KernelError::DivergenceDetected {
                step: recorded.t,
                detail: "episode ended before the recorded trajectory".into(),
            });
        }
        let status = episode.begin_step().messages().last().expect("status appended").payload().to_string();
        if status != recorded.status {
            return Err(KernelError::DivergenceDetected {
                step: recorded.t,
                detail: format!("status line differs: expected {:?}, got {:?}", recorded.status, status),
            });
        }
        let live = episode.apply(&recorded.output);
        if live.observation != recorded.observation {
            return Err(KernelError::DivergenceDetected {
                step: recorded.t,
                detail: format!(
                    "observation differs: expected {:?}, got {:?}",
                    recorded.observation, live.observation
                ),
            });
        }
    }
    let policy_error = match &trajectory.terminal.outcome {
        Outcome::PolicyError { message } => Some(PolicyError::Failed(message.clone())),
        _ => None,
    };
    let mut result = episode.conclude(policy_error);
    if let (Outcome::PolicyError { .. }, Outcome::PolicyError { message }) =
        (&result.outcome, &trajectory.terminal.outcome)
    {
        // Keep the recorded message verbatim.
        result.outcome = Outcome::PolicyError {
            message: message.clone(),
        };
        result.trajectory.terminal.outcome = result.outcome.clone();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolcall::{emit_call, ToolCall};
    use serde_json::json;

    #[derive(Default)]
    struct Counter {
        value: i64,
    }

    impl TaskEnvironment for Counter {
        fn goal_satisfied(&self) -> bool {
            self.value >= 2
        }
    }

    fn registry() -> ToolRegistry<Counter> {
        let mut r = ToolRegistry::new();
        r.register("inc", |c: &mut Counter, _args: &Map<String, Value>| {
            c.value += 1;
            ToolOutput::new(format!("value={}", c.value), true)
        })
        .unwrap();
        r.register("peek", |c: &mut Counter, _args: &Map<String, Value>| {
            ToolOutput::new(format!("value={}", c.value), false)
        })
        .unwrap();
        r
    }

    fn setup() -> EpisodeSetup {
        EpisodeSetup {
            traj_id: "t".into(),
            group_id: "g".into(),
            system_prompt: "system".into(),
            task: "count to two".into(),
        }
    }

    fn scripted(outputs: Vec<String>) -> impl FnMut(&ContextWindow) -> Result<String, PolicyError> {
        let mut it = outputs.into_iter();
        move |_w: &ContextWindow| it.next().ok_or_else(|| PolicyError::Failed("script exhausted".into()))
    }

    fn call(name: &str, args: Value) -> String {
        emit_call(&ToolCall::from_json(name, args))
    }

    #[test]
    fn reserved_names_rejected() {
        let mut r: ToolRegistry<Counter> = ToolRegistry::new();
        for name in [COMPRESS_TOOL, READ_TOOL, FINISH_TOOL] {
            assert!(matches!(
                r.register(name, |_: &mut Counter, _: &Map<String, Value>| ToolOutput::new("", false)),
                Err(KernelError::ReservedToolName(_))
            ));
        }
    }

    #[test]
    fn finish_at_first_step() {
        let mut env = Counter::default();
        let mut policy = scripted(vec![call("finish", json!({"success": true}))]);
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Finished { answer: json!({"success": true}) });
        assert_eq!(r.trajectory.steps.len(), 1);
        assert_eq!(r.trajectory.terminal.breakdown.r_task, 0.0);
    }

    #[test]
    fn max_steps_reached() {
        let mut env = Counter::default();
        let mut policy = |_: &ContextWindow| Ok(call("peek", json!({})));
        let config = EpisodeConfig {
            t_max: 5,
            ..Default::default()
        };
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), config).unwrap();
        assert_eq!(r.outcome, Outcome::MaxStepReached);
        assert_eq!(r.trajectory.steps.len(), 5);
        // four repeats of an unchanged peek
        assert_eq!(r.trajectory.terminal.breakdown.n_redundant, 4);
    }

    #[test]
    fn policy_sees_status_line_last() {
        let mut env = Counter::default();
        let mut seen = Vec::new();
        let mut policy = |w: &ContextWindow| {
            let last = w.messages().last().unwrap();
            seen.push((last.kind(), last.payload().to_string()));
            Ok(call("finish", json!({})))
        };
        run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        assert_eq!(seen[0].0, MessageKind::ContextStatus);
        assert!(seen[0].1.starts_with("[Context Status: working context tokens=0,"));
    }

    #[test]
    fn malformed_only_step_injects_recovery() {
        let mut env = Counter::default();
        let mut policy = scripted(vec![
            "thinking but no call".into(),
            "<tool_call>{\"name\": \"inc\"".into(),
            call("finish", json!({})),
        ]);
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        let steps = &r.trajectory.steps;
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[0].observation.as_deref(), Some(NO_CALL_OBSERVATION));
        assert_eq!(steps[0].class, CallClass::NoCall);
        assert!(!steps[0].attempted);
        assert!(steps[1].attempted);
        assert_eq!(steps[1].malformed.len(), 1);
        let b = &r.trajectory.terminal.breakdown;
        assert_eq!(b.n_tool_attempt_steps, 2);
        assert_eq!(b.p_format, 0.5);
    }

    #[test]
    fn only_first_call_executes() {
        let mut env = Counter::default();
        let two = format!("{}{}", call("inc", json!({})), call("inc", json!({})));
        let mut policy = scripted(vec![two, call("finish", json!({}))]);
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        assert_eq!(env.value, 1);
        assert_eq!(r.trajectory.steps[0].observation.as_deref(), Some("value=1"));
    }

    #[test]
    fn compress_and_read_cycle() {
        let mut env = Counter::default();
        let compress = call(
            COMPRESS_TOOL,
            json!({
                "summary": "Index map:\n- ctx_count - counter log\nStatus: counting",
                "db_blocks": [{"db_index": "ctx_count", "start_anchor": "value=1", "mid_anchor": "inc", "end_anchor": "value=2"}]
            }),
        );
        let mut policy = scripted(vec![
            call("inc", json!({})),
            call("inc", json!({})),
            compress,
            call(READ_TOOL, json!({"db_index": "ctx_count"})),
            call(READ_TOOL, json!({"db_index": "missing"})),
            call("finish", json!({"success": true})),
        ]);
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        let steps = &r.trajectory.steps;
        let c = &steps[2];
        assert!(c.compressed);
        assert_eq!(c.messages_after, 3);
        assert_eq!(c.observation.as_deref(), Some("Compression complete. Archived 1 blocks: [ctx_count]."));
        assert_eq!(c.observation_kind, None);
        assert!(c.working_after <= 300);
        assert!(steps[3].status.contains(&format!("working context tokens={}", c.working_after)));
        assert_eq!(r.store.get("ctx_count").unwrap().split('\n').next(), Some("value=1"));
        assert_eq!(steps[3].observation_kind, Some(MessageKind::RetrievedBlock));
        assert_eq!(steps[3].observation.as_deref(), Some(r.store.get("ctx_count").unwrap()));
        assert_eq!(steps[4].store_events[0].op, StoreOp::Miss);
        assert_eq!(r.trajectory.terminal.breakdown.r_task, 1.0);
        assert_eq!(r.window.system_prompt().payload(), "system");
        assert!(steps.iter().all(|s| s.full_history_tokens >= s.working_after));
    }

    #[test]
    fn policy_error_keeps_partial_trajectory() {
        let mut env = Counter::default();
        let mut policy = scripted(vec![call("inc", json!({}))]);
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        assert!(matches!(r.outcome, Outcome::PolicyError { .. }));
        assert_eq!(r.trajectory.steps.len(), 1);
    }

    #[test]
    fn slow_policy_times_out() {
        let mut env = Counter::default();
        let mut policy = |_: &ContextWindow| {
            std::thread::sleep(Duration::from_millis(30));
            Ok(call("inc", json!({})))
        };
        let config = EpisodeConfig {
            policy_timeout_ms: 5,
            ..Default::default()
        };
        let r = run_episode(&mut policy, &registry(), &mut env, setup(), config).unwrap();
        assert!(matches!(r.outcome, Outcome::PolicyError { ref message } if message.contains("timeout")));
        assert!(r.trajectory.steps.is_empty());
    }

    #[test]
    fn replay_detects_divergence() {
        let mut env = Counter::default();
        let mut policy = scripted(vec![
            call("inc", json!({})),
            call("peek", json!({})),
            call("inc", json!({})),
            call("finish", json!({"success": true})),
        ]);
        let live = run_episode(&mut policy, &registry(), &mut env, setup(), EpisodeConfig::default()).unwrap();
        let replayed = replay(&live.trajectory, &registry(), &mut Counter::default()).unwrap();
        assert_eq!(replayed.trajectory, live.trajectory);

        let mut tampered = live.trajectory.clone();
        tampered.steps[1].observation = Some("value=9".into());
        match replay(&tampered, &registry(), &mut Counter::default()) {
            Err(KernelError::DivergenceDetected { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut env = Counter::default();
        let mut policy = |_: &ContextWindow| Ok(String::new());
        let bad = EpisodeConfig {
            t_max: 0,
            ..Default::default()
        };
        assert!(run_episode(&mut policy, &registry(), &mut env, setup(), bad).is_err());
        let empty: ToolRegistry<Counter> = ToolRegistry::new();
        assert!(run_episode(&mut policy, &empty, &mut env, setup(), EpisodeConfig::default()).is_err());
    }
}
