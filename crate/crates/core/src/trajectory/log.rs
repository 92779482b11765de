//! Per-step trajectory records and the JSONL trajectory file.
//!
//! File layout, one JSON object per line:
//!
//! ```text
//! {"record":"header","schema":"memex.trajectory.v1",...}
//! {"record":"step","t":1,...}
//! ...
//! {"record":"terminal","outcome":{...},"goal_satisfied":true,"breakdown":{...}}
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::kernel::EpisodeConfig;
use crate::memory::CompressReport;
use crate::message::MessageKind;
use crate::reward::PenaltyBreakdown;
use crate::toolcall::{MalformedClass, ToolCall};

pub const TRAJECTORY_SCHEMA: &str = "memex.trajectory.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallClass {
    Environment,
    Compress,
    Read,
    Finish,
    /// No well-formed call; the recovery observation was injected.
    NoCall,
}

impl CallClass {
    pub fn is_memory(self) -> bool {
        matches!(self, CallClass::Compress | CallClass::Read)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreOp {
    Write,
    Read,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEvent {
    pub op: StoreOp,
    pub index: String,
    pub byte_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Status line injected before the policy was queried.
    pub status: String,
    /// Raw assistant output: thinking plus tool call(s).
    pub output: String,
    /// The executed call, if any.
    pub call: Option<ToolCall>,
    pub class: CallClass,
    /// The step's observation. For a successful compression this is the
    /// report text, which is not appended to the window.
    pub observation: Option<String>,
    /// Kind of the message appended to the window for the observation.
    pub observation_kind: Option<MessageKind>,
    pub mutating: bool,
    pub attempted: bool,
    pub malformed: Vec<MalformedClass>,
    pub working_before: usize,
    /// C_t: working tokens after the observation was appended.
    pub working_after: usize,
    pub total_after: usize,
    pub messages_after: usize,
    /// Tokens of every working message ever appended, compression ignored.
    pub full_history_tokens: usize,
    pub compressed: bool,
    pub compress_report: Option<CompressReport>,
    pub store_events: Vec<StoreEvent>,
}

impl StepRecord {
    /// The summary message installed by this step, if it compressed.
    pub fn summary_message(&self) -> Option<&str> {
        self.compress_report
            .as_ref()
            .filter(|_| self.compressed)
            .map(|r| r.summary_message.as_str())
    }

    pub fn reads(&self) -> usize {
        self.store_events
            .iter()
            .filter(|e| matches!(e.op, StoreOp::Read | StoreOp::Miss))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub schema: String,
    pub traj_id: String,
    pub group_id: String,
    pub config: EpisodeConfig,
    pub system_prompt: String,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Finished { answer: Value },
    MaxStepReached,
    PolicyError { message: String },
}

impl Outcome {
    pub fn is_finished(&self) -> bool {
        matches!(self, Outcome::Finished { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTerminal {
    pub outcome: Outcome,
    pub goal_satisfied: bool,
    pub breakdown: PenaltyBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepRecord>,
    pub terminal: TrajectoryTerminal,
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("storage error at {path}: {message}")]
    Storage { path: PathBuf, message: String },
    #[error("malformed trajectory: {0}")]
    Malformed(String),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogLine {
    Header(TrajectoryHeader),
    Step(StepRecord),
    Terminal(TrajectoryTerminal),
}

impl TrajectoryLog {
    pub fn finished(&self) -> bool {
        self.terminal.outcome.is_finished()
    }

    pub fn compressions(&self) -> usize {
        self.steps.iter().filter(|s| s.compressed).count()
    }

    /// Check step numbering and header schema.
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.header.schema != TRAJECTORY_SCHEMA {
            return Err(TrajectoryError::Malformed(format!(
                "unsupported schema '{}'",
                self.header.schema
            )));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.t != i + 1 {
                return Err(TrajectoryError::Malformed(format!(
                    "step {} found at position {}",
                    step.t,
                    i + 1
                )));
            }
            if step.compressed && step.compress_report.is_none() {
                return Err(TrajectoryError::Malformed(format!("step {} compressed without a report", step.t)));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &LogLine| {
            out.push_str(&serde_json::to_string(line).expect("trajectory serializes"));
            out.push('\n');
        };
        push(&LogLine::Header(self.header.clone()));
        for step in &self.steps {
            push(&LogLine::Step(step.clone()));
        }
        push(&LogLine::Terminal(self.terminal.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TrajectoryError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut terminal = None;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: LogLine = serde_json::from_str(line)
                .map_err(|e| TrajectoryError::Malformed(format!("line {}: {e}", n + 1)))?;
            match parsed {
                LogLine::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                LogLine::Step(s) if header.is_some() && terminal.is_none() => steps.push(s),
                LogLine::Terminal(t) if header.is_some() && terminal.is_none() => terminal = Some(t),
                _ => return Err(TrajectoryError::Malformed(format!("line {}: record out of order", n + 1))),
            }
        }
        let log = TrajectoryLog {
            header: header.ok_or_else(|| TrajectoryError::Malformed("missing header".into()))?,
            steps,
            terminal: terminal.ok_or_else(|| TrajectoryError::Malformed("missing terminal record".into()))?,
        };
        log.validate()?;
        Ok(log)
    }

    pub fn write(&self, path: &Path) -> Result<(), TrajectoryError> {
        let storage = |e: std::io::Error| TrajectoryError::Storage {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut out = BufWriter::new(fs::File::create(path).map_err(storage)?);
        out.write_all(self.to_jsonl().as_bytes()).map_err(storage)?;
        out.flush().map_err(storage)
    }

    pub fn read(path: &Path) -> Result<Self, TrajectoryError> {
        let text = fs::read_to_string(path).map_err(|e| TrajectoryError::Storage {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_jsonl(&text)
    }
}
