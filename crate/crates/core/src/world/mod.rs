//! Seeded household text world.
//!
//! Receptacles carry coordinate-style IDs that the agent can only learn from a
//! single `look`. The initial observation is the task text alone and the
//! admissible commands are never listed.

mod grammar;
mod oracle;
mod random;

pub use grammar::{parse_action, Action};
pub use oracle::{
    decide, Decision, Here, Knowledge, OracleFullContext, OracleIndexed, Progress, LOCATIONS_INDEX, PROGRESS_INDEX,
};
pub use random::RandomPolicy;

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::kernel::{
    run_episode, EpisodeConfig, EpisodeResult, EpisodeSetup, KernelError, Policy, TaskEnvironment, ToolOutput,
    ToolRegistry,
};

pub const ACTION_TOOL: &str = "execute_action";
pub const NOTHING_HAPPENS: &str = "Nothing happens.";
pub const LOOK_AGAIN: &str = "You cannot look again.";
pub const LOOK_HEADER: &str = "You are in the middle of a room. Looking quickly around you, you see:";

const SURFACE_KINDS: &[&str] = &[
    "countertop",
    "diningtable",
    "desk",
    "shelf",
    "sidetable",
    "dresser",
    "garbagecan",
    "stoveburner",
    "sofa",
];
const OPENABLE_KINDS: &[&str] = &["cabinet", "drawer", "fridge", "microwave", "safe"];
const TARGET_KINDS: &[&str] = &["countertop", "diningtable", "desk", "shelf", "sidetable", "dresser", "cabinet", "drawer"];
const OBJECT_KINDS: &[&str] = &[
    "apple",
    "book",
    "bread",
    "butterknife",
    "cd",
    "cellphone",
    "creditcard",
    "cup",
    "egg",
    "fork",
    "keychain",
    "knife",
    "lettuce",
    "mug",
    "pen",
    "plate",
    "potato",
    "spoon",
    "tomato",
];
const CLEANABLE: &[&str] = &["apple", "butterknife", "cup", "fork", "knife", "lettuce", "mug", "plate", "potato", "spoon", "tomato"];
const HEATABLE: &[&str] = &["apple", "bread", "cup", "egg", "mug", "plate", "potato", "tomato"];
const COOLABLE: &[&str] = &["apple", "bread", "cup", "egg", "lettuce", "mug", "plate", "potato", "tomato"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receptacle {
    pub id: String,
    pub kind: String,
    pub openable: bool,
    pub open: bool,
}

impl Receptacle {
    /// Contents are visible on surfaces and inside opened containers.
    pub fn visible(&self) -> bool {
        !self.openable || self.open
    }

    fn preposition(&self) -> &'static str {
        if self.openable {
            "In"
        } else {
            "On"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", content = "id", rename_all = "snake_case")]
pub enum ObjectLocation {
    Receptacle(String),
    Inventory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldObject {
    /// Display name, e.g. `apple 1`.
    pub id: String,
    pub kind: String,
    pub location: ObjectLocation,
    pub clean: bool,
    pub heated: bool,
    pub cooled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub receptacles: Vec<Receptacle>,
    pub objects: Vec<WorldObject>,
    /// `None` while standing in the middle of the room.
    pub agent_location: Option<String>,
    pub inventory: Option<String>,
    pub look_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTemplate {
    PickAndPlace,
    PickCleanThenPlace,
    PickHeatThenPlace,
    PickCoolThenPlace,
}

impl TaskTemplate {
    pub const ALL: [TaskTemplate; 4] = [
        TaskTemplate::PickAndPlace,
        TaskTemplate::PickCleanThenPlace,
        TaskTemplate::PickHeatThenPlace,
        TaskTemplate::PickCoolThenPlace,
    ];

    /// Receptacle kind that performs the treatment, if any.
    pub fn service_kind(self) -> Option<&'static str> {
        match self {
            TaskTemplate::PickAndPlace => None,
            TaskTemplate::PickCleanThenPlace => Some("sinkbasin"),
            TaskTemplate::PickHeatThenPlace => Some("microwave"),
            TaskTemplate::PickCoolThenPlace => Some("fridge"),
        }
    }

    /// Verb of the treatment action.
    pub fn verb(self) -> Option<&'static str> {
        match self {
            TaskTemplate::PickAndPlace => None,
            TaskTemplate::PickCleanThenPlace => Some("clean"),
            TaskTemplate::PickHeatThenPlace => Some("heat"),
            TaskTemplate::PickCoolThenPlace => Some("cool"),
        }
    }

    fn adjective(self) -> Option<&'static str> {
        match self {
            TaskTemplate::PickAndPlace => None,
            TaskTemplate::PickCleanThenPlace => Some("clean"),
            TaskTemplate::PickHeatThenPlace => Some("hot"),
            TaskTemplate::PickCoolThenPlace => Some("cool"),
        }
    }

    fn object_pool(self) -> &'static [&'static str] {
        match self {
            TaskTemplate::PickAndPlace => OBJECT_KINDS,
            TaskTemplate::PickCleanThenPlace => CLEANABLE,
            TaskTemplate::PickHeatThenPlace => HEATABLE,
            TaskTemplate::PickCoolThenPlace => COOLABLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub template: TaskTemplate,
    pub object_kind: String,
    pub target_receptacle_kind: String,
    pub instruction: String,
}

impl TaskSpec {
    fn new(template: TaskTemplate, object_kind: &str, target: &str) -> Self {
        let described = match template.adjective() {
            Some(adj) => format!("{adj} {object_kind}"),
            None => object_kind.to_string(),
        };
        Self {
            template,
            object_kind: object_kind.to_string(),
            target_receptacle_kind: target.to_string(),
            instruction: format!("Your task is to: put a {described} in/on {target}."),
        }
    }

    /// Recover the task from its instruction text.
    pub fn parse(instruction: &str) -> Option<Self> {
        let body = instruction.trim().strip_prefix("Your task is to: put a ")?.strip_suffix('.')?;
        let (object, target) = body.split_once(" in/on ")?;
        let (template, kind) = match object.split_once(' ') {
            Some(("clean", k)) => (TaskTemplate::PickCleanThenPlace, k),
            Some(("hot", k)) => (TaskTemplate::PickHeatThenPlace, k),
            Some(("cool", k)) => (TaskTemplate::PickCoolThenPlace, k),
            None => (TaskTemplate::PickAndPlace, object),
            Some(_) => return None,
        };
        Some(Self::new(template, kind, target))
    }
}

/// World-size parameters for generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldParams {
    pub receptacles: (usize, usize),
    pub objects: (usize, usize),
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            receptacles: (6, 12),
            objects: (4, 10),
        }
    }
}

fn coordinate(rng: &mut ChaCha8Rng) -> String {
    let sign = if rng.random_bool(0.5) { "plus" } else { "minus" };
    format!("{sign}_{:02}_dot_{:02}", rng.random_range(0..4u32), rng.random_range(0..100u32))
}

fn receptacle_id(rng: &mut ChaCha8Rng, kind: &str) -> String {
    let coords: Vec<String> = (0..3).map(|_| coordinate(rng)).collect();
    format!("{kind}_bar__{}", coords.join("_bar__"))
}

/// The kind prefix of a receptacle ID, if it is well-formed.
pub fn id_kind(id: &str) -> Option<&str> {
    let (kind, rest) = id.split_once("_bar__")?;
    let coords: Vec<&str> = rest.split("_bar__").collect();
    let well_formed = !kind.is_empty()
        && kind.bytes().all(|b| b.is_ascii_lowercase())
        && coords.len() == 3
        && coords.iter().all(|c| {
            let Some((sign, num)) = c.split_once('_') else { return false };
            let Some((int, frac)) = num.split_once("_dot_") else { return false };
            matches!(sign, "plus" | "minus")
                && int.len() == 2
                && frac.len() == 2
                && int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
        });
    well_formed.then_some(kind)
}

pub fn generate_world(seed: u64) -> (WorldState, TaskSpec) {
    generate_world_with(seed, WorldParams::default())
}

pub fn generate_world_with(seed: u64, params: WorldParams) -> (WorldState, TaskSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = *TaskTemplate::ALL.choose(&mut rng).expect("non-empty");
    let object_kind = *template.object_pool().choose(&mut rng).expect("non-empty");
    let target_kind = *TARGET_KINDS.choose(&mut rng).expect("non-empty");

    let n_receptacles = rng.random_range(params.receptacles.0..=params.receptacles.1).max(3);
    let mut kinds: Vec<&str> = vec![target_kind];
    if let Some(service) = template.service_kind() {
        kinds.push(service);
    }
    // At least one receptacle the task object can start in.
    let start_pool: Vec<&str> = SURFACE_KINDS
        .iter()
        .chain(OPENABLE_KINDS)
        .copied()
        .filter(|k| *k != target_kind)
        .collect();
    kinds.push(start_pool.choose(&mut rng).expect("non-empty"));
    let all_kinds: Vec<&str> = SURFACE_KINDS.iter().chain(OPENABLE_KINDS).chain(["sinkbasin"].iter()).copied().collect();
    while kinds.len() < n_receptacles {
        kinds.push(all_kinds.choose(&mut rng).expect("non-empty"));
    }
    kinds.shuffle(&mut rng);

    let mut receptacles: Vec<Receptacle> = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let id = loop {
            let id = receptacle_id(&mut rng, kind);
            if receptacles.iter().all(|r| r.id != id) {
                break id;
            }
        };
        let openable = OPENABLE_KINDS.contains(&kind);
        receptacles.push(Receptacle {
            id,
            kind: kind.to_string(),
            openable,
            open: false,
        });
    }

    let n_objects = rng.random_range(params.objects.0..=params.objects.1).max(1);
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    let mut objects = Vec::with_capacity(n_objects);
    let start_choices: Vec<&Receptacle> = receptacles.iter().filter(|r| r.kind != target_kind).collect();
    let start = start_choices.choose(&mut rng).expect("a non-target receptacle exists");
    counters.insert(object_kind, 1);
    objects.push(WorldObject {
        id: format!("{object_kind} 1"),
        kind: object_kind.to_string(),
        location: ObjectLocation::Receptacle(start.id.clone()),
        clean: false,
        heated: false,
        cooled: false,
    });
    let distractors: Vec<&str> = OBJECT_KINDS.iter().copied().filter(|k| *k != object_kind).collect();
    while objects.len() < n_objects {
        let kind = *distractors.choose(&mut rng).expect("non-empty");
        let n = counters.entry(kind).or_insert(0);
        *n += 1;
        let at = receptacles.choose(&mut rng).expect("non-empty");
        objects.push(WorldObject {
            id: format!("{kind} {n}"),
            kind: kind.to_string(),
            location: ObjectLocation::Receptacle(at.id.clone()),
            clean: false,
            heated: false,
            cooled: false,
        });
    }
    objects.shuffle(&mut rng);

    let state = WorldState {
        receptacles,
        objects,
        agent_location: None,
        inventory: None,
        look_used: false,
    };
    (state, TaskSpec::new(template, object_kind, target_kind))
}

fn list_items(names: &[&str]) -> String {
    if names.is_empty() {
        "nothing".to_string()
    } else {
        names.iter().map(|n| format!("a {n}")).collect::<Vec<_>>().join(", ")
    }
}

impl WorldState {
    pub fn receptacle(&self, id: &str) -> Option<&Receptacle> {
        self.receptacles.iter().find(|r| r.id == id)
    }

    fn receptacle_mut(&mut self, id: &str) -> Option<&mut Receptacle> {
        self.receptacles.iter_mut().find(|r| r.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: &str) -> Option<&mut WorldObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn contents(&self, receptacle: &str) -> Vec<&str> {
        self.objects
            .iter()
            .filter(|o| matches!(&o.location, ObjectLocation::Receptacle(r) if r == receptacle))
            .map(|o| o.id.as_str())
            .collect()
    }

    /// Description of a receptacle as seen from in front of it.
    fn view(&self, r: &Receptacle) -> String {
        if r.visible() {
            format!("{} it, you see {}.", r.preposition(), list_items(&self.contents(&r.id)))
        } else {
            "It is closed.".to_string()
        }
    }

    fn at(&self, id: &str) -> bool {
        self.agent_location.as_deref() == Some(id)
    }

    /// Check the structural invariants.
    pub fn validate(&self) -> Result<(), String> {
        let mut held = 0;
        for o in &self.objects {
            match &o.location {
                ObjectLocation::Receptacle(r) if self.receptacle(r).is_none() => {
                    return Err(format!("{} is in unknown receptacle {r}", o.id));
                }
                ObjectLocation::Inventory => {
                    held += 1;
                    if self.inventory.as_deref() != Some(o.id.as_str()) {
                        return Err(format!("{} is held but not in inventory", o.id));
                    }
                }
                _ => {}
            }
        }
        if held > 1 || (held == 0) != self.inventory.is_none() {
            return Err("inventory holds more than one object or disagrees with object locations".into());
        }
        if let Some(loc) = &self.agent_location {
            if self.receptacle(loc).is_none() {
                return Err(format!("agent at unknown location {loc}"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("world state serializes")
    }
}

fn nothing() -> (String, bool) {
    (NOTHING_HAPPENS.to_string(), false)
}

/// Apply one action. Returns the observation and whether the state changed.
pub fn execute_action(state: &mut WorldState, action_text: &str) -> (String, bool) {
    let Some(action) = parse_action(action_text) else {
        return nothing();
    };
    match action {
        Action::Look => {
            if state.look_used {
                return (LOOK_AGAIN.to_string(), false);
            }
            state.look_used = true;
            let mut out = LOOK_HEADER.to_string();
            for r in &state.receptacles {
                out.push('\n');
                out.push_str(&r.id);
            }
            (out, false)
        }
        Action::GoTo(target) => {
            if state.at(&target) {
                return nothing();
            }
            let Some(r) = state.receptacle(&target) else {
                return nothing();
            };
            let obs = format!("You arrive at {}. {}", r.id, state.view(r));
            state.agent_location = Some(target);
            (obs, true)
        }
        Action::Open(target) => {
            if !state.at(&target) {
                return nothing();
            }
            match state.receptacle_mut(&target) {
                Some(r) if r.openable && !r.open => r.open = true,
                _ => return nothing(),
            }
            let r = state.receptacle(&target).expect("just opened");
            (format!("You open {}. {}", r.id, state.view(r)), true)
        }
        Action::Close(target) => {
            if !state.at(&target) {
                return nothing();
            }
            match state.receptacle_mut(&target) {
                Some(r) if r.openable && r.open => r.open = false,
                _ => return nothing(),
            }
            (format!("You close {target}."), true)
        }
        Action::PickUp(object) => {
            let Some(here) = state.agent_location.clone() else {
                return nothing();
            };
            let visible = state.receptacle(&here).is_some_and(Receptacle::visible);
            let present = state
                .object(&object)
                .is_some_and(|o| o.location == ObjectLocation::Receptacle(here.clone()));
            if state.inventory.is_some() || !visible || !present {
                return nothing();
            }
            state.object_mut(&object).expect("present").location = ObjectLocation::Inventory;
            state.inventory = Some(object.clone());
            (format!("You pick up the {object} from {here}."), true)
        }
        Action::Put(object, target) => {
            let open_here = state.at(&target) && state.receptacle(&target).is_some_and(Receptacle::visible);
            if state.inventory.as_deref() != Some(object.as_str()) || !open_here {
                return nothing();
            }
            state.object_mut(&object).expect("held object exists").location = ObjectLocation::Receptacle(target.clone());
            state.inventory = None;
            (format!("You put the {object} in/on {target}."), true)
        }
        Action::Treat(verb, object, tool) => {
            let service = match verb.as_str() {
                "clean" => "sinkbasin",
                "heat" => "microwave",
                "cool" => "fridge",
                _ => return nothing(),
            };
            let tool_ok = state.at(&tool) && state.receptacle(&tool).is_some_and(|r| r.kind == service);
            if state.inventory.as_deref() != Some(object.as_str()) || !tool_ok {
                return nothing();
            }
            let o = state.object_mut(&object).expect("held object exists");
            let flag = match verb.as_str() {
                "clean" => &mut o.clean,
                "heat" => &mut o.heated,
                _ => &mut o.cooled,
            };
            let changed = !*flag;
            *flag = true;
            (format!("You {verb} the {object} using the {tool}."), changed)
        }
        Action::Examine(target) => {
            if let Some(r) = state.receptacle(&target) {
                if state.at(&target) {
                    return (state.view(r), false);
                }
                return nothing();
            }
            let Some(o) = state.object(&target) else {
                return nothing();
            };
            let reachable = match &o.location {
                ObjectLocation::Inventory => true,
                ObjectLocation::Receptacle(r) => {
                    state.at(r) && state.receptacle(r).is_some_and(Receptacle::visible)
                }
            };
            if !reachable {
                return nothing();
            }
            let mut obs = format!("There's nothing special about {}.", o.id);
            for (set, word) in [(o.clean, "clean"), (o.heated, "hot"), (o.cooled, "cool")] {
                if set {
                    obs.push_str(&format!(" It is {word}."));
                }
            }
            (obs, false)
        }
    }
}

pub fn check_goal(state: &WorldState, task: &TaskSpec) -> bool {
    state.objects.iter().any(|o| {
        let placed = match &o.location {
            ObjectLocation::Receptacle(r) => state
                .receptacle(r)
                .is_some_and(|r| r.kind == task.target_receptacle_kind),
            ObjectLocation::Inventory => false,
        };
        let treated = match task.template {
            TaskTemplate::PickAndPlace => true,
            TaskTemplate::PickCleanThenPlace => o.clean,
            TaskTemplate::PickHeatThenPlace => o.heated,
            TaskTemplate::PickCoolThenPlace => o.cooled,
        };
        o.kind == task.object_kind && placed && treated
    })
}

/// A world plus its task, driven through the `execute_action` tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdEnv {
    pub seed: u64,
    pub state: WorldState,
    pub task: TaskSpec,
}

impl HouseholdEnv {
    pub fn new(seed: u64) -> Self {
        let (state, task) = generate_world(seed);
        Self { seed, state, task }
    }

    pub fn setup(&self, system_prompt: &str) -> EpisodeSetup {
        EpisodeSetup {
            traj_id: format!("seed-{}", self.seed),
            group_id: format!("task-{}", self.seed),
            system_prompt: system_prompt.to_string(),
            task: self.task.instruction.clone(),
        }
    }

    pub fn snapshot(&self) -> Value {
        serde_json::to_value(self).expect("environment serializes")
    }

    pub fn registry() -> ToolRegistry<HouseholdEnv> {
        let mut registry = ToolRegistry::new();
        registry
            .register(ACTION_TOOL, |env: &mut HouseholdEnv, args: &Map<String, Value>| {
                match args.get("action").and_then(Value::as_str) {
                    Some(action) => {
                        let (observation, mutating) = execute_action(&mut env.state, action);
                        ToolOutput::new(observation, mutating)
                    }
                    None => ToolOutput::new(
                        format!("Error: {ACTION_TOOL} requires a string argument 'action'."),
                        false,
                    ),
                }
            })
            .expect("environment tool name is not reserved");
        registry
    }
}

/// Run one episode on the world generated from `config.seed`.
pub fn run_household(
    policy: &mut dyn Policy,
    config: EpisodeConfig,
    system_prompt: &str,
) -> Result<(EpisodeResult, HouseholdEnv), KernelError> {
    let mut env = HouseholdEnv::new(config.seed);
    let setup = env.setup(system_prompt);
    let result = run_episode(policy, &HouseholdEnv::registry(), &mut env, setup, config)?;
    Ok((result, env))
}

impl TaskEnvironment for HouseholdEnv {
    fn goal_satisfied(&self) -> bool {
        check_goal(&self.state, &self.task)
    }
}
