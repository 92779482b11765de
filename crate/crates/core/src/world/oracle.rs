//! Scripted oracle policies.
//!
//! Both oracles are stateless: every decision rebuilds a [`Knowledge`] value
//! from the window alone and hands it to the same decision rule. The indexed
//! oracle differs only in how knowledge reaches the window after compression:
//! through `ReadExperience` of the archived roster and progress blocks.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::{id_kind, parse_action, Action, TaskSpec, ACTION_TOOL, LOOK_AGAIN, LOOK_HEADER};
use crate::kernel::{Policy, PolicyError, COMPRESS_TOOL, FINISH_TOOL, READ_TOOL};
use crate::memory::{IndexedSummary, MemoryBlock};
use crate::message::{ContextWindow, MessageKind};
use crate::toolcall::{emit_call, parse_assistant_output, ToolCall};

pub const LOCATIONS_INDEX: &str = "ctx_locations";
pub const PROGRESS_INDEX: &str = "ctx_progress";
const LOOK_USED_NOTE: &str = "Look already used.";
const PROGRESS_HEADER: &str = "progress";

/// What the agent knows about the receptacle it stands at.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Here {
    #[default]
    Unknown,
    Closed,
    Open(Vec<String>),
}

impl Here {
    fn parse_view(text: &str) -> Here {
        let text = text.trim();
        if text == "It is closed." {
            return Here::Closed;
        }
        let items = ["On it, you see ", "In it, you see "]
            .iter()
            .find_map(|p| text.strip_prefix(p))
            .and_then(|rest| rest.strip_suffix('.'));
        match items {
            Some("nothing") => Here::Open(Vec::new()),
            Some(list) => Here::Open(
                list.split(", ")
                    .map(|item| item.strip_prefix("a ").unwrap_or(item).to_string())
                    .collect(),
            ),
            None => Here::Unknown,
        }
    }
}

/// Everything the decision rule consumes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Knowledge {
    pub task: Option<TaskSpec>,
    pub looked: bool,
    pub roster: Option<Vec<String>>,
    pub location: Option<String>,
    pub here: Here,
    pub visited: BTreeSet<String>,
    pub holding: Option<String>,
    pub treated: bool,
    pub placed: bool,
}

fn env_action(text: &str) -> Option<Action> {
    let call = parse_assistant_output(text).first_call()?.clone();
    if call.name != ACTION_TOOL {
        return None;
    }
    parse_action(call.arg_str("action")?)
}

fn parse_roster(text: &str) -> Option<Vec<String>> {
    let ids: Vec<String> = text.lines().map(str::trim).map(str::to_string).collect();
    (!ids.is_empty() && ids.iter().all(|id| id_kind(id).is_some())).then_some(ids)
}

impl Knowledge {
    pub fn from_window(window: &ContextWindow) -> Self {
        let mut k = Knowledge {
            task: TaskSpec::parse(window.task().payload()),
            ..Default::default()
        };
        let mut pending: Option<Action> = None;
        for message in window.working() {
            let text = message.payload();
            match message.kind() {
                MessageKind::ThinkingAndCall => pending = env_action(text),
                MessageKind::ToolOutput => {
                    if let Some(action) = pending.take() {
                        k.observe(&action, text);
                    }
                }
                MessageKind::RetrievedBlock => {
                    pending = None;
                    if let Some(roster) = parse_roster(text) {
                        k.roster = Some(roster);
                    } else if let Some(progress) = Progress::parse(text) {
                        if let Some(roster) = k.roster.clone() {
                            progress.restore(&mut k, &roster);
                        }
                    }
                }
                MessageKind::IndexedSummary => {
                    if text.contains(LOOK_USED_NOTE) {
                        k.looked = true;
                    }
                }
                _ => {}
            }
        }
        k
    }

    fn observe(&mut self, action: &Action, obs: &str) {
        match action {
            Action::Look => {
                if let Some(rest) = obs.strip_prefix(LOOK_HEADER) {
                    self.looked = true;
                    self.roster = parse_roster(rest.trim_start_matches('\n'));
                } else if obs == LOOK_AGAIN {
                    self.looked = true;
                }
            }
            Action::GoTo(x) => {
                if let Some(rest) = obs.strip_prefix(&format!("You arrive at {x}.")) {
                    self.location = Some(x.clone());
                    self.visited.insert(x.clone());
                    self.here = Here::parse_view(rest);
                }
            }
            Action::Open(x) => {
                if let Some(rest) = obs.strip_prefix(&format!("You open {x}.")) {
                    self.here = Here::parse_view(rest);
                }
            }
            Action::Close(x) => {
                if obs == format!("You close {x}.") {
                    self.here = Here::Closed;
                }
            }
            Action::PickUp(o) => {
                if obs.starts_with(&format!("You pick up the {o} from ")) {
                    self.holding = Some(o.clone());
                    if let Here::Open(items) = &mut self.here {
                        items.retain(|i| i != o);
                    }
                }
            }
            Action::Put(o, _) => {
                if obs.starts_with(&format!("You put the {o} in/on ")) {
                    self.holding = None;
                    self.placed = true;
                    if let Here::Open(items) = &mut self.here {
                        items.push(o.clone());
                    }
                }
            }
            Action::Treat(verb, o, _) => {
                if obs.starts_with(&format!("You {verb} the {o} using ")) {
                    self.treated = true;
                }
            }
            Action::Examine(_) => {}
        }
    }

    fn first_of_kind(&self, kind: &str) -> Option<&String> {
        self.roster.as_ref()?.iter().find(|id| id_kind(id) == Some(kind))
    }
}

/// Progress block archived alongside the roster. Receptacles are written as
/// roster positions, so the block is useless without the roster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Progress {
    pub location: Option<usize>,
    pub here: Here,
    pub visited: Vec<usize>,
    pub holding: Option<String>,
    pub treated: bool,
    pub placed: bool,
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

impl Progress {
    pub fn capture(k: &Knowledge) -> Option<Self> {
        let roster = k.roster.as_ref()?;
        let pos = |id: &String| roster.iter().position(|r| r == id);
        Some(Self {
            location: k.location.as_ref().and_then(pos),
            here: k.here.clone(),
            visited: k.visited.iter().filter_map(pos).collect(),
            holding: k.holding.clone(),
            treated: k.treated,
            placed: k.placed,
        })
    }

    pub fn render(&self) -> String {
        let here = match &self.here {
            Here::Unknown => "unknown".to_string(),
            Here::Closed => "closed".to_string(),
            Here::Open(items) => format!("open: {}", items.join(", ")),
        };
        format!(
            "{PROGRESS_HEADER}\nlocation: {}\nhere: {here}\nvisited: {}\nholding: {}\ntreated: {}\nplaced: {}",
            self.location.map_or("none".to_string(), |p| p.to_string()),
            self.visited.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            self.holding.as_deref().unwrap_or("none"),
            yes_no(self.treated),
            yes_no(self.placed),
        )
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        if lines.next()? != PROGRESS_HEADER {
            return None;
        }
        let mut field = |name: &str| -> Option<String> {
            lines.next()?.strip_prefix(name)?.strip_prefix(": ").map(str::to_string)
        };
        let location = field("location")?;
        let here = field("here")?;
        let visited = field("visited")?;
        let holding = field("holding")?;
        let treated = field("treated")? == "yes";
        let placed = field("placed")? == "yes";
        let here = match here.as_str() {
            "unknown" => Here::Unknown,
            "closed" => Here::Closed,
            other => {
                let items = other.strip_prefix("open:")?.trim();
                Here::Open(if items.is_empty() {
                    Vec::new()
                } else {
                    items.split(", ").map(str::to_string).collect()
                })
            }
        };
        Some(Self {
            location: if location == "none" { None } else { Some(location.parse().ok()?) },
            here,
            visited: visited.split_whitespace().map(str::parse).collect::<Result<_, _>>().ok()?,
            holding: (holding != "none").then_some(holding),
            treated,
            placed,
        })
    }

    fn restore(&self, k: &mut Knowledge, roster: &[String]) {
        k.location = self.location.and_then(|p| roster.get(p).cloned());
        k.here = self.here.clone();
        k.visited = self.visited.iter().filter_map(|&p| roster.get(p).cloned()).collect();
        k.holding = self.holding.clone();
        k.treated = self.treated;
        k.placed = self.placed;
    }
}

/// The next move chosen by the shared decision rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Act(Action),
    Finish(bool),
}

fn object_kind(name: &str) -> &str {
    name.rsplit_once(' ').map_or(name, |(kind, _)| kind)
}

/// Shared decision rule of both oracles.
pub fn decide(k: &Knowledge) -> Decision {
    let Some(task) = &k.task else {
        return Decision::Finish(false);
    };
    if k.roster.is_none() {
        return if k.looked {
            Decision::Finish(false)
        } else {
            Decision::Act(Action::Look)
        };
    }
    if k.placed {
        return Decision::Finish(true);
    }
    let Some(target) = k.first_of_kind(&task.target_receptacle_kind).cloned() else {
        return Decision::Finish(false);
    };
    let at = |id: &str| k.location.as_deref() == Some(id);
    if let Some(object) = &k.holding {
        if let (Some(service), Some(verb)) = (task.template.service_kind(), task.template.verb()) {
            if !k.treated {
                let Some(service_id) = k.first_of_kind(service).cloned() else {
                    return Decision::Finish(false);
                };
                return Decision::Act(if at(&service_id) {
                    Action::Treat(verb.to_string(), object.clone(), service_id)
                } else {
                    Action::GoTo(service_id)
                });
            }
        }
        return Decision::Act(if !at(&target) {
            Action::GoTo(target)
        } else if k.here == Here::Closed {
            Action::Open(target)
        } else {
            Action::Put(object.clone(), target)
        });
    }
    match &k.here {
        Here::Open(items) => {
            if let Some(found) = items.iter().find(|i| object_kind(i) == task.object_kind) {
                return Decision::Act(Action::PickUp(found.clone()));
            }
        }
        Here::Closed => {
            if let Some(loc) = &k.location {
                return Decision::Act(Action::Open(loc.clone()));
            }
        }
        Here::Unknown => {}
    }
    let roster = k.roster.as_ref().expect("checked above");
    match roster.iter().find(|id| !k.visited.contains(*id)) {
        Some(next) => Decision::Act(Action::GoTo(next.clone())),
        None => Decision::Finish(false),
    }
}

fn render_decision(decision: &Decision) -> String {
    let (thought, call) = match decision {
        Decision::Act(action) => {
            let thought = match action {
                Action::Look => "Look once to learn the receptacle IDs.",
                Action::GoTo(_) => "Go to the next receptacle.",
                Action::Open(_) => "Open it.",
                Action::PickUp(_) => "Take the object.",
                Action::Treat(..) => "Treat the object.",
                Action::Put(..) => "Place the object.",
                Action::Close(_) | Action::Examine(_) => "Check.",
            };
            (thought, ToolCall::from_json(ACTION_TOOL, json!({"action": action.to_string()})))
        }
        Decision::Finish(success) => ("Done.", ToolCall::from_json(FINISH_TOOL, json!({"success": success}))),
    };
    format!("{thought}\n{}", emit_call(&call))
}

/// Acts on the full, never-compressed history.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleFullContext;

impl OracleFullContext {
    pub fn decide(window: &ContextWindow) -> Decision {
        decide(&Knowledge::from_window(window))
    }
}

impl Policy for OracleFullContext {
    fn act(&mut self, window: &ContextWindow) -> Result<String, PolicyError> {
        Ok(render_decision(&Self::decide(window)))
    }
}

/// Compresses after every `compress_every` environment actions and, after each
/// compression, issues up to `reads` `ReadExperience` calls before acting.
#[derive(Debug, Clone, Copy)]
pub struct OracleIndexed {
    pub reads: usize,
    pub compress_every: usize,
}

impl OracleIndexed {
    pub fn new(reads: usize, compress_every: usize) -> Self {
        assert!(compress_every > 0, "compress_every must be positive");
        Self { reads, compress_every }
    }

    fn summary(window: &ContextWindow) -> Option<IndexedSummary> {
        window
            .working()
            .first()
            .filter(|m| m.kind() == MessageKind::IndexedSummary)
            .map(|m| IndexedSummary::parse(m.payload()))
    }

    fn compress_call(&self, k: &Knowledge, summary: Option<&IndexedSummary>) -> String {
        let archived_roster = summary.is_some_and(|s| s.indices().any(|i| i == LOCATIONS_INDEX));
        let mut blocks = Vec::new();
        if !archived_roster {
            if let Some(roster) = k.roster.as_ref().filter(|r| r.len() >= 3) {
                blocks.push(MemoryBlock::anchored(
                    LOCATIONS_INDEX,
                    &roster[0],
                    &roster[roster.len() / 2],
                    &roster[roster.len() - 1],
                ));
            }
        }
        let has_roster = archived_roster || !blocks.is_empty();
        if let Some(progress) = Progress::capture(k) {
            blocks.push(MemoryBlock::explicit(PROGRESS_INDEX, progress.render()));
        }
        let mut new_summary = IndexedSummary::new(format!(
            "{LOOK_USED_NOTE} Receptacle IDs live only in the archive; read them back before acting."
        ));
        if has_roster {
            new_summary = new_summary.with_entry(LOCATIONS_INDEX, "all receptacle IDs");
        }
        if blocks.iter().any(|b| b.index == PROGRESS_INDEX) {
            new_summary = new_summary.with_entry(PROGRESS_INDEX, "location, visited, inventory, task flags");
        }
        let call = ToolCall::from_json(
            COMPRESS_TOOL,
            json!({
                "summary": new_summary.render(),
                "db_blocks": blocks.iter().map(MemoryBlock::to_json).collect::<Vec<Value>>(),
            }),
        );
        format!("Archive progress.\n{}", emit_call(&call))
    }
}

impl Policy for OracleIndexed {
    fn act(&mut self, window: &ContextWindow) -> Result<String, PolicyError> {
        let k = Knowledge::from_window(window);
        let summary = Self::summary(window);
        let mut env_actions = 0;
        let mut reads_done = 0;
        for m in window.working().iter().filter(|m| m.kind() == MessageKind::ThinkingAndCall) {
            let parsed = parse_assistant_output(m.payload());
            match parsed.first_call().map(|c| c.name.as_str()) {
                Some(READ_TOOL) => reads_done += 1,
                Some(ACTION_TOOL) => env_actions += 1,
                _ => {}
            }
        }
        if let Some(s) = &summary {
            let indices: Vec<&str> = s.indices().collect();
            if env_actions == 0 && reads_done < self.reads.min(indices.len()) {
                let call = ToolCall::from_json(READ_TOOL, json!({"db_index": indices[reads_done]}));
                return Ok(format!("Recover archived state.\n{}", emit_call(&call)));
            }
        }
        let decision = decide(&k);
        if matches!(decision, Decision::Act(_)) && env_actions >= self.compress_every {
            return Ok(self.compress_call(&k, summary.as_ref()));
        }
        Ok(render_decision(&decision))
    }
}
