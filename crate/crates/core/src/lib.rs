//! Indexed experience memory for long-horizon tool-using agents.
//!
//! The crate provides the context window model, the experience store, the
//! compress/read memory operations, the tool-call codec, the agent loop, a
//! deterministic household environment with oracle policies, reward shaping,
//! trajectory segmentation, and an OpenAI-compatible policy client.

pub mod gateway;
pub mod kernel;
pub mod memory;
pub mod message;
pub mod prompt;
pub mod reward;
pub mod store;
pub mod toolcall;
pub mod trajectory;
pub mod world;

pub use kernel::{
    replay, run_episode, EpisodeConfig, EpisodeResult, EpisodeSetup, KernelError, Policy, PolicyError,
    TaskEnvironment, ToolOutput, ToolRegistry,
};
pub use message::{ContextWindow, Message, MessageKind, Role};
pub use store::ExperienceStore;
pub use trajectory::{Outcome, TrajectoryLog};
