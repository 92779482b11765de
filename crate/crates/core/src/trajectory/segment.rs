//! Splitting a trajectory at its compression steps.
//!
//! A trajectory with k successful compressions yields k+1 segments. Segment 0
//! opens with `[system, task]`; segment i opens with `[system, task, summary]`
//! where the summary is the one installed by compression i. A compression
//! step's status line and assistant output close the segment before it, and
//! its report observation belongs to neither.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{TrajectoryError, TrajectoryLog};
use crate::message::{MessageKind, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMessage {
    pub role: Role,
    pub kind: MessageKind,
    pub content: String,
    /// Step that produced the message; `None` for the fixed prefix and summary.
    pub step: Option<usize>,
}

impl SegmentMessage {
    fn new(kind: MessageKind, content: impl Into<String>, step: Option<usize>) -> Self {
        Self {
            role: kind.role(),
            kind,
            content: content.into(),
            step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub traj_id: String,
    pub segment_idx: usize,
    pub group_id: String,
    /// The trajectory return, shared by every segment.
    pub reward: f64,
    pub messages: Vec<SegmentMessage>,
}

impl SegmentRecord {
    /// Steps whose assistant output appears in this segment.
    pub fn steps(&self) -> Vec<usize> {
        self.messages
            .iter()
            .filter(|m| m.kind == MessageKind::ThinkingAndCall)
            .filter_map(|m| m.step)
            .collect()
    }

    /// Assistant outputs, the trainable part of the segment.
    pub fn actions(&self) -> impl Iterator<Item = &SegmentMessage> {
        self.messages.iter().filter(|m| m.kind == MessageKind::ThinkingAndCall)
    }
}

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("step {0} is marked compressed but carries no summary")]
    MissingSummary(usize),
    #[error("segments cover steps {covered:?}, trajectory has {steps}")]
    Coverage { covered: Vec<usize>, steps: usize },
    #[error("storage error: {0}")]
    Storage(String),
    #[error("malformed segment record at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn segment(trajectory: &TrajectoryLog) -> Result<Vec<SegmentRecord>, SegmentationError> {
    trajectory.validate()?;
    let header = &trajectory.header;
    let reward = trajectory.terminal.breakdown.total;
    let prefix = [
        SegmentMessage::new(MessageKind::SystemPrompt, &header.system_prompt, None),
        SegmentMessage::new(MessageKind::Task, &header.task, None),
    ];
    let open = |idx: usize, summary: Option<&str>| SegmentRecord {
        traj_id: header.traj_id.clone(),
        segment_idx: idx,
        group_id: header.group_id.clone(),
        reward,
        messages: prefix
            .iter()
            .cloned()
            .chain(summary.map(|s| SegmentMessage::new(MessageKind::IndexedSummary, s, None)))
            .collect(),
    };

    let mut segments = Vec::new();
    let mut current = open(0, None);
    for step in &trajectory.steps {
        let t = Some(step.t);
        current
            .messages
            .push(SegmentMessage::new(MessageKind::ContextStatus, &step.status, t));
        current
            .messages
            .push(SegmentMessage::new(MessageKind::ThinkingAndCall, &step.output, t));
        if step.compressed {
            let summary = step.summary_message().ok_or(SegmentationError::MissingSummary(step.t))?;
            let next = open(segments.len() + 1, Some(summary));
            segments.push(std::mem::replace(&mut current, next));
            continue;
        }
        if let (Some(kind), Some(text)) = (step.observation_kind, &step.observation) {
            current.messages.push(SegmentMessage::new(kind, text.as_str(), t));
        }
    }
    segments.push(current);

    let covered: Vec<usize> = segments.iter().flat_map(SegmentRecord::steps).collect();
    if covered.len() != trajectory.steps.len() || covered.iter().enumerate().any(|(i, &t)| t != i + 1) {
        return Err(SegmentationError::Coverage {
            covered,
            steps: trajectory.steps.len(),
        });
    }
    Ok(segments)
}

pub fn export_segments(segments: &[SegmentRecord], path: &Path) -> Result<(), SegmentationError> {
    let storage = |e: std::io::Error| SegmentationError::Storage(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(fs::File::create(path).map_err(storage)?);
    for s in segments {
        let line = serde_json::to_string(s).expect("segment serializes");
        writeln!(out, "{line}").map_err(storage)?;
    }
    out.flush().map_err(storage)
}

pub fn import_segments(path: &Path) -> Result<Vec<SegmentRecord>, SegmentationError> {
    let text = fs::read_to_string(path).map_err(|e| SegmentationError::Storage(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SegmentationError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
