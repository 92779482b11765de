//! Seeded random policy for fuzzing the kernel, codec, memory and reward paths.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::{Knowledge, ACTION_TOOL};
use crate::kernel::{Policy, PolicyError, COMPRESS_TOOL, FINISH_TOOL, READ_TOOL};
use crate::memory::{IndexedSummary, MemoryBlock};
use crate::message::{ContextWindow, MessageKind};
use crate::toolcall::{emit_call, ToolCall, CLOSE_TAG, OPEN_TAG};

const OBJECT_GUESSES: &[&str] = &["apple 1", "mug 1", "knife 2", "book 1", "egg 1", "plate 1"];

/// Emits a mix of environment actions, repeats, memory operations, finish
/// calls and malformed outputs.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    max_compressions: usize,
    compressions: usize,
    history: Vec<String>,
    finish_after: usize,
}

impl RandomPolicy {
    pub fn new(seed: u64, max_compressions: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
        let finish_after = rng.random_range(5..40);
        Self {
            rng,
            max_compressions,
            compressions: 0,
            history: Vec::new(),
            finish_after,
        }
    }

    fn thought(&mut self) -> String {
        const THOUGHTS: &[&str] = &["Let me think.", "Trying something.", "", "Next step.\n\n"];
        THOUGHTS.choose(&mut self.rng).expect("non-empty").to_string()
    }

    fn env_action(&mut self, window: &ContextWindow) -> String {
        if !self.history.is_empty() && self.rng.random_bool(0.3) {
            return self.history.choose(&mut self.rng).expect("non-empty").clone();
        }
        let k = Knowledge::from_window(window);
        let roster = k.roster.clone().unwrap_or_default();
        let rec = roster
            .choose(&mut self.rng)
            .cloned()
            .unwrap_or_else(|| "desk_bar__plus_00_dot_00_bar__plus_00_dot_00_bar__plus_00_dot_00".into());
        let obj = k
            .holding
            .clone()
            .filter(|_| self.rng.random_bool(0.5))
            .unwrap_or_else(|| OBJECT_GUESSES.choose(&mut self.rng).expect("non-empty").to_string());
        let action = match self.rng.random_range(0..10) {
            0 => "look".to_string(),
            1 | 2 => format!("go to {rec}"),
            3 => format!("open {rec}"),
            4 => format!("close {rec}"),
            5 => format!("pick up {obj}"),
            6 => format!("put {obj} in/on {rec}"),
            7 => format!("{} {obj} with {rec}", ["clean", "heat", "cool"].choose(&mut self.rng).expect("non-empty")),
            8 => format!("examine {obj}"),
            _ => "dance wildly".to_string(),
        };
        let mut args = Map::new();
        // Extra argument in varying key order exercises canonical signatures.
        if self.rng.random_bool(0.2) {
            args.insert("note".into(), json!("x"));
        }
        args.insert("action".into(), Value::String(action));
        let text = emit_call(&ToolCall::new(ACTION_TOOL, args));
        self.history.push(text.clone());
        text
    }

    fn malformed(&mut self) -> String {
        let options = [
            format!("{OPEN_TAG}{{\"name\": \"{ACTION_TOOL}\", \"arguments\": {{\"action\": \"look\"}}}}"),
            format!("{OPEN_TAG}{{\"name\": {ACTION_TOOL}}}{CLOSE_TAG}"),
            format!("{OPEN_TAG}{{\"arguments\": {{}}}}{CLOSE_TAG}"),
            format!("{OPEN_TAG}[1, 2]{CLOSE_TAG}"),
            format!("{OPEN_TAG}{{\"name\": \"\", \"arguments\": {{}}}}{CLOSE_TAG}"),
            format!("{OPEN_TAG}{OPEN_TAG}{CLOSE_TAG}"),
        ];
        options.choose(&mut self.rng).expect("non-empty").clone()
    }

    fn compress(&mut self, window: &ContextWindow) -> String {
        let mut blocks = Vec::new();
        let n = self.rng.random_range(0..3);
        let sources: Vec<&str> = window
            .working()
            .iter()
            .filter(|m| m.kind() != MessageKind::ContextStatus && m.payload().len() >= 12)
            .map(|m| m.payload())
            .collect();
        for i in 0..n {
            let index = format!("ctx_{}", self.rng.random_range(0..6));
            let anchored = !sources.is_empty() && self.rng.random_bool(0.5);
            if anchored {
                let text = *sources.choose(&mut self.rng).expect("non-empty");
                let chars: Vec<(usize, char)> = text.char_indices().collect();
                let cut = |a: usize, b: usize| {
                    let start = chars[a].0;
                    let end = chars.get(b).map_or(text.len(), |c| c.0);
                    text[start..end].to_string()
                };
                let len = chars.len();
                let start = cut(0, 4);
                let mid = if self.rng.random_bool(0.8) {
                    cut(len / 2, len / 2 + 3)
                } else {
                    "no such mid anchor".to_string()
                };
                let end = cut(len - 4, len);
                blocks.push(MemoryBlock::anchored(index, start, mid, end));
            } else {
                let content = format!("block {i} of step {}", window.len());
                blocks.push(MemoryBlock::explicit(index, content));
            }
        }
        let mut summary = IndexedSummary::new("Random progress notes.");
        for b in &blocks {
            summary = summary.with_entry(b.index.clone(), "random block");
        }
        if self.rng.random_bool(0.2) {
            summary.status_text.push_str(&" padding".repeat(200));
        }
        let mut args = json!({
            "summary": summary.render(),
            "db_blocks": blocks.iter().map(MemoryBlock::to_json).collect::<Vec<_>>(),
        });
        if self.rng.random_bool(0.05) {
            args.as_object_mut().expect("object").remove("summary");
        }
        self.compressions += 1;
        emit_call(&ToolCall::from_json(COMPRESS_TOOL, args))
    }

    fn read(&mut self, window: &ContextWindow) -> String {
        let known: Vec<String> = window
            .working()
            .iter()
            .filter(|m| m.kind() == MessageKind::IndexedSummary)
            .flat_map(|m| IndexedSummary::parse(m.payload()).indices().map(str::to_string).collect::<Vec<_>>())
            .collect();
        let index = if !known.is_empty() && self.rng.random_bool(0.7) {
            known.choose(&mut self.rng).expect("non-empty").clone()
        } else {
            format!("ctx_{}", self.rng.random_range(0..8))
        };
        emit_call(&ToolCall::from_json(READ_TOOL, json!({ "db_index": index })))
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, window: &ContextWindow) -> Result<String, PolicyError> {
        let step = window.working().iter().filter(|m| m.kind() == MessageKind::ThinkingAndCall).count();
        let thought = self.thought();
        let roll = self.rng.random_range(0..100);
        let body = if step >= self.finish_after && roll < 20 {
            emit_call(&ToolCall::from_json(FINISH_TOOL, json!({"success": self.rng.random_bool(0.5)})))
        } else if roll < 10 {
            let bad = self.malformed();
            if self.rng.random_bool(0.4) {
                let good = self.env_action(window);
                format!("{bad}\n{good}")
            } else {
                bad
            }
        } else if roll < 14 {
            "I am not sure what to do.".to_string()
        } else if roll < 26 && self.compressions < self.max_compressions {
            self.compress(window)
        } else if roll < 34 {
            self.read(window)
        } else {
            self.env_action(window)
        };
        Ok(format!("{thought}{body}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_outputs() {
        let w = ContextWindow::new("s", "Your task is to: put a mug in/on desk.");
        let a: Vec<String> = {
            let mut p = RandomPolicy::new(7, 3);
            (0..20).map(|_| p.act(&w).unwrap()).collect()
        };
        let mut p = RandomPolicy::new(7, 3);
        let b: Vec<String> = (0..20).map(|_| p.act(&w).unwrap()).collect();
        assert_eq!(a, b);
    }
}
