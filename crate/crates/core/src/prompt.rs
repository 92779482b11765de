//! Default system prompt for the household tasks.

pub const SYSTEM_PROMPT: &str = include_str!("../assets/alfworld_system_prompt.txt");
