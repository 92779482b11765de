//! Messages, the context window, token accounting and the context status line.
//!
//! The window always starts with the system prompt and the task instruction.
//! Everything after those two messages is the *working context*; status lines
//! are injected by the kernel every step but never counted as working tokens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bytes per token for the deterministic counting rule.
pub const BYTES_PER_TOKEN: usize = 4;

/// Deterministic token estimate: `ceil(bytes / BYTES_PER_TOKEN)`.
pub fn count_tokens(text: &str) -> usize {
    text.len().div_ceil(BYTES_PER_TOKEN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
    Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    SystemPrompt,
    Task,
    ThinkingAndCall,
    ToolOutput,
    RetrievedBlock,
    IndexedSummary,
    ContextStatus,
}

impl MessageKind {
    /// The role a message of this kind is attributed to.
    pub fn role(self) -> Role {
        match self {
            MessageKind::SystemPrompt => Role::System,
            MessageKind::Task | MessageKind::IndexedSummary => Role::User,
            MessageKind::ThinkingAndCall => Role::Assistant,
            MessageKind::ToolOutput | MessageKind::RetrievedBlock => Role::Tool,
            MessageKind::ContextStatus => Role::Status,
        }
    }
}

/// One entry of the context window. The token count is computed once from
/// the payload and cannot drift from it because the payload is immutable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "MessageRepr", into = "MessageRepr")]
pub struct Message {
    role: Role,
    kind: MessageKind,
    payload: String,
    token_count: usize,
}

impl Message {
    pub fn new(kind: MessageKind, payload: impl Into<String>) -> Self {
        let payload = payload.into();
        Self {
            role: kind.role(),
            kind,
            token_count: count_tokens(&payload),
            payload,
        }
    }

    pub fn system_prompt(text: impl Into<String>) -> Self {
        Self::new(MessageKind::SystemPrompt, text)
    }

    pub fn task(text: impl Into<String>) -> Self {
        Self::new(MessageKind::Task, text)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    pub fn payload(&self) -> &str {
        &self.payload
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }
}

#[derive(Serialize, Deserialize)]
struct MessageRepr {
    kind: MessageKind,
    payload: String,
}

impl From<MessageRepr> for Message {
    fn from(repr: MessageRepr) -> Self {
        Message::new(repr.kind, repr.payload)
    }
}

impl From<Message> for MessageRepr {
    fn from(msg: Message) -> Self {
        MessageRepr {
            kind: msg.kind,
            payload: msg.payload,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("a {0:?} message may only appear at its fixed position")]
    MisplacedFixedMessage(MessageKind),
    #[error("window must start with a system prompt and a task")]
    MissingPrefix,
}

/// The context window `[system, task, working...]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    messages: Vec<Message>,
}

impl ContextWindow {
    pub fn new(system_prompt: impl Into<String>, task: impl Into<String>) -> Self {
        Self {
            messages: vec![Message::system_prompt(system_prompt), Message::task(task)],
        }
    }

    /// Rebuild a window from raw messages, checking the fixed prefix.
    pub fn from_messages(messages: Vec<Message>) -> Result<Self, WindowError> {
        if messages.len() < 2
            || messages[0].kind() != MessageKind::SystemPrompt
            || messages[1].kind() != MessageKind::Task
        {
            return Err(WindowError::MissingPrefix);
        }
        if let Some(bad) = messages[2..].iter().find(|m| is_fixed(m.kind())) {
            return Err(WindowError::MisplacedFixedMessage(bad.kind()));
        }
        Ok(Self { messages })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn system_prompt(&self) -> &Message {
        &self.messages[0]
    }

    pub fn task(&self) -> &Message {
        &self.messages[1]
    }

    /// Messages after the fixed prefix.
    pub fn working(&self) -> &[Message] {
        &self.messages[2..]
    }

    pub fn push(&mut self, message: Message) -> Result<(), WindowError> {
        if is_fixed(message.kind()) {
            return Err(WindowError::MisplacedFixedMessage(message.kind()));
        }
        self.messages.push(message);
        Ok(())
    }

    /// Remove the last working message. The fixed prefix is never removed.
    pub fn pop(&mut self) -> Option<Message> {
        if self.messages.len() > 2 {
            self.messages.pop()
        } else {
            None
        }
    }

    /// Rewrite the window to `[system, task, summary]`.
    pub fn rewrite_with_summary(&mut self, summary: Message) {
        self.messages.truncate(2);
        self.messages.push(summary);
    }

    pub fn working_tokens(&self) -> usize {
        working_tokens(self)
    }

    pub fn total_tokens(&self) -> usize {
        self.messages.iter().map(Message::token_count).sum()
    }

    /// The conversation as one document: every payload in order joined by `\n`.
    pub fn serialize_conversation(&self) -> String {
        let mut doc = String::with_capacity(self.messages.iter().map(|m| m.payload.len() + 1).sum());
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                doc.push('\n');
            }
            doc.push_str(m.payload());
        }
        doc
    }
}

fn is_fixed(kind: MessageKind) -> bool {
    matches!(kind, MessageKind::SystemPrompt | MessageKind::Task)
}

/// Sum of token counts past the fixed prefix, excluding status lines.
pub fn working_tokens(window: &ContextWindow) -> usize {
    window
        .working()
        .iter()
        .filter(|m| m.kind() != MessageKind::ContextStatus)
        .map(Message::token_count)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStatusReport {
    pub working: usize,
    pub total: usize,
    pub threshold: usize,
    pub warning: bool,
}

impl ContextStatusReport {
    pub fn measure(window: &ContextWindow, threshold: usize) -> Self {
        let working = window.working_tokens();
        Self {
            working,
            total: window.total_tokens(),
            threshold,
            warning: working > threshold,
        }
    }

    pub fn render(&self) -> String {
        let mut line = format!(
            "[Context Status: working context tokens={}, total tokens={}, threshold={}]",
            self.working, self.total, self.threshold
        );
        if self.warning {
            line.push_str(" WARNING: working > threshold");
        }
        line
    }

    /// Parse a rendered status line back into a report.
    pub fn parse(line: &str) -> Option<Self> {
        let (body, warning) = match line.strip_suffix(" WARNING: working > threshold") {
            Some(body) => (body, true),
            None => (line, false),
        };
        let body = body
            .strip_prefix("[Context Status: working context tokens=")?
            .strip_suffix(']')?;
        let (working, rest) = body.split_once(", total tokens=")?;
        let (total, threshold) = rest.split_once(", threshold=")?;
        Some(Self {
            working: working.parse().ok()?,
            total: total.parse().ok()?,
            threshold: threshold.parse().ok()?,
            warning,
        })
    }
}

/// Build the status message injected before every policy query.
pub fn make_context_status(window: &ContextWindow, threshold: usize) -> Message {
    debug_assert!(threshold > 0);
    let report = ContextStatusReport::measure(window, threshold);
    Message::new(MessageKind::ContextStatus, report.render())
}
