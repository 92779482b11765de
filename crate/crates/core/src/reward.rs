//! Episode return: task reward minus context, redundancy and format penalties.
//!
//! Two independent routes produce a [`PenaltyBreakdown`]:
//! [`RewardAccumulator`] folds steps as the kernel executes them, and
//! [`episode_return`] recomputes everything from a serialized trajectory by
//! re-parsing the raw assistant outputs. The two must agree bit for bit.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::kernel::{COMPRESS_TOOL, READ_TOOL};
use crate::toolcall::{canonical_signature, parse_assistant_output};
use crate::trajectory::{StepRecord, TrajectoryLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    pub r_task: f64,
    pub p_context: f64,
    pub p_redundancy: f64,
    pub p_format: f64,
    pub total: f64,
    /// T: number of steps.
    pub steps: usize,
    /// Non-memory well-formed calls (redundancy denominator).
    pub n_tool_call_env: usize,
    /// Steps that opened at least one tool-call tag (format denominator).
    pub n_tool_attempt_steps: usize,
    pub n_redundant: usize,
    pub n_malformed: usize,
    /// Working tokens per step.
    pub c_t: Vec<usize>,
}

impl PenaltyBreakdown {
    /// Field-wise bit equality of the float components.
    pub fn bit_eq(&self, other: &Self) -> bool {
        let floats = |b: &Self| [b.r_task, b.p_context, b.p_redundancy, b.p_format, b.total].map(f64::to_bits);
        floats(self) == floats(other)
            && self.steps == other.steps
            && self.n_tool_call_env == other.n_tool_call_env
            && self.n_tool_attempt_steps == other.n_tool_attempt_steps
            && self.n_redundant == other.n_redundant
            && self.n_malformed == other.n_malformed
            && self.c_t == other.c_t
    }
}

fn combine(r_task: f64, p_context: f64, p_redundancy: f64, p_format: f64) -> f64 {
    r_task - p_context - p_redundancy - p_format
}

fn context_ratio(overflow: u64, tau: usize, steps: usize) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    (overflow as f64 / (tau as f64 * steps as f64)).min(1.0)
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        (num as f64 / den as f64).min(1.0)
    }
}

/// `min(1, Σ max(0, C_t − τ) / (τ·T))`, skipping compression steps.
///
/// `compressed` holds 0-based positions into `c`.
pub fn context_penalty(c: &[usize], compressed: &BTreeSet<usize>, tau: usize) -> f64 {
    assert!(tau > 0, "threshold must be positive");
    let overflow: u64 = c
        .iter()
        .enumerate()
        .filter(|(i, _)| !compressed.contains(i))
        .map(|(_, &ct)| ct.saturating_sub(tau) as u64)
        .sum();
    context_ratio(overflow, tau, c.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSignature {
    pub signature: String,
    pub is_memory: bool,
    pub mutating: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedundancyCounts {
    pub redundant: usize,
    pub env_calls: usize,
}

/// Count redundant calls by direct search: a call is redundant when an
/// identical earlier call exists and no mutating call lies strictly between.
pub fn redundancy_counts(calls: &[CallSignature]) -> RedundancyCounts {
    let env: Vec<&CallSignature> = calls.iter().filter(|c| !c.is_memory).collect();
    let mut redundant = 0;
    for (j, call) in env.iter().enumerate() {
        let earlier = env[..j].iter().rposition(|e| e.signature == call.signature);
        if let Some(i) = earlier {
            if !env[i + 1..j].iter().any(|between| between.mutating) {
                redundant += 1;
            }
        }
    }
    RedundancyCounts {
        redundant,
        env_calls: env.len(),
    }
}

pub fn redundancy_penalty(calls: &[CallSignature]) -> f64 {
    let counts = redundancy_counts(calls);
    ratio_or_zero(counts.redundant, counts.env_calls)
}

/// Malformed regions over attempting steps, clamped to 1.
pub fn format_penalty(steps: &[(bool, usize)]) -> f64 {
    let attempts = steps.iter().filter(|(attempted, _)| *attempted).count();
    let malformed = steps.iter().map(|(_, n)| n).sum();
    ratio_or_zero(malformed, attempts)
}

/// Recompute the return from a serialized trajectory.
///
/// Calls, tag attempts and malformed regions are re-derived from the raw
/// assistant outputs; only environment-dependent facts (mutating flags,
/// measured working tokens, compression success) come from the records.
pub fn episode_return(trajectory: &TrajectoryLog, goal_satisfied: bool, tau: usize) -> PenaltyBreakdown {
    let steps = &trajectory.steps;
    let c: Vec<usize> = steps.iter().map(|s| s.working_after).collect();
    let compressed: BTreeSet<usize> = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.compressed)
        .map(|(i, _)| i)
        .collect();

    let mut format_steps = Vec::with_capacity(steps.len());
    let mut signatures = Vec::new();
    let mut finish_seen = false;
    for step in steps {
        let parsed = parse_assistant_output(&step.output);
        format_steps.push((parsed.attempted(), parsed.malformed.len()));
        if let Some(call) = parsed.first_call() {
            let is_memory = call.name == COMPRESS_TOOL || call.name == READ_TOOL;
            finish_seen |= call.name == crate::kernel::FINISH_TOOL;
            signatures.push(CallSignature {
                signature: canonical_signature(call),
                is_memory,
                mutating: step.mutating,
            });
        }
    }

    let redundancy = redundancy_counts(&signatures);
    let r_task = if finish_seen && goal_satisfied { 1.0 } else { 0.0 };
    let p_context = context_penalty(&c, &compressed, tau);
    let p_redundancy = ratio_or_zero(redundancy.redundant, redundancy.env_calls);
    let p_format = format_penalty(&format_steps);
    PenaltyBreakdown {
        r_task,
        p_context,
        p_redundancy,
        p_format,
        total: combine(r_task, p_context, p_redundancy, p_format),
        steps: steps.len(),
        n_tool_call_env: redundancy.env_calls,
        n_tool_attempt_steps: format_steps.iter().filter(|(a, _)| *a).count(),
        n_redundant: redundancy.redundant,
        n_malformed: format_steps.iter().map(|(_, n)| n).sum(),
        c_t: c,
    }
}

/// Running penalty counters updated once per executed step.
#[derive(Debug, Clone)]
pub struct RewardAccumulator {
    tau: usize,
    c_t: Vec<usize>,
    overflow: u64,
    env_calls: usize,
    redundant: usize,
    attempt_steps: usize,
    malformed: usize,
    finished: bool,
    /// Number of mutating calls seen so far.
    epoch: u64,
    /// Signature -> epoch right after its latest occurrence.
    last_seen: HashMap<String, u64>,
}

impl RewardAccumulator {
    pub fn new(tau: usize) -> Self {
        assert!(tau > 0, "threshold must be positive");
        Self {
            tau,
            c_t: Vec::new(),
            overflow: 0,
            env_calls: 0,
            redundant: 0,
            attempt_steps: 0,
            malformed: 0,
            finished: false,
            epoch: 0,
            last_seen: HashMap::new(),
        }
    }

    pub fn observe(&mut self, step: &StepRecord) {
        self.c_t.push(step.working_after);
        if !step.compressed {
            self.overflow += step.working_after.saturating_sub(self.tau) as u64;
        }
        if step.attempted {
            self.attempt_steps += 1;
        }
        self.malformed += step.malformed.len();
        if let Some(call) = &step.call {
            if !step.class.is_memory() {
                self.env_calls += 1;
                let sig = canonical_signature(call);
                if self.last_seen.get(&sig) == Some(&self.epoch) {
                    self.redundant += 1;
                }
                if step.mutating {
                    self.epoch += 1;
                }
                self.last_seen.insert(sig, self.epoch);
            }
            if step.class == crate::trajectory::CallClass::Finish {
                self.finished = true;
            }
        }
    }

    pub fn breakdown(&self, goal_satisfied: bool) -> PenaltyBreakdown {
        let r_task = if self.finished && goal_satisfied { 1.0 } else { 0.0 };
        let p_context = context_ratio(self.overflow, self.tau, self.c_t.len());
        let p_redundancy = ratio_or_zero(self.redundant, self.env_calls);
        let p_format = ratio_or_zero(self.malformed, self.attempt_steps);
        PenaltyBreakdown {
            r_task,
            p_context,
            p_redundancy,
            p_format,
            total: combine(r_task, p_context, p_redundancy, p_format),
            steps: self.c_t.len(),
            n_tool_call_env: self.env_calls,
            n_tool_attempt_steps: self.attempt_steps,
            n_redundant: self.redundant,
            n_malformed: self.malformed,
            c_t: self.c_t.clone(),
        }
    }
}
