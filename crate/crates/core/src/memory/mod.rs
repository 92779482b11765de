//! CompressExperience and ReadExperience over a `(window, store)` pair.

mod anchor;

pub use anchor::{extract_span, AnchorError, AnchorKind, AnchorWarning, Extraction};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::message::{count_tokens, ContextWindow, Message, MessageKind, BYTES_PER_TOKEN};
use crate::store::ExperienceStore;

/// Default summary budget in tokens.
pub const DEFAULT_SUMMARY_TOKENS: usize = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub index: String,
    pub description: String,
}

/// Progress state plus an index map of archived blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedSummary {
    pub status_text: String,
    pub index_map: Vec<IndexEntry>,
}

const INDEX_MAP_HEADER: &str = "Index map:";

impl IndexedSummary {
    pub fn new(status_text: impl Into<String>) -> Self {
        Self {
            status_text: status_text.into(),
            index_map: Vec::new(),
        }
    }

    pub fn with_entry(mut self, index: impl Into<String>, description: impl Into<String>) -> Self {
        self.index_map.push(IndexEntry {
            index: index.into(),
            description: description.into(),
        });
        self
    }

    /// Split free-form summary text into status lines and `- index - description` entries.
    pub fn parse(text: &str) -> Self {
        let mut status = Vec::new();
        let mut index_map = Vec::new();
        for line in text.lines() {
            if line.trim() == INDEX_MAP_HEADER {
                continue;
            }
            match parse_entry(line) {
                Some(entry) => index_map.push(entry),
                None => status.push(line),
            }
        }
        Self {
            status_text: status.join("\n").trim().to_string(),
            index_map,
        }
    }

    /// Status text, then the `Index map:` block.
    pub fn render(&self) -> String {
        let mut out = self.status_text.clone();
        if !self.index_map.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(INDEX_MAP_HEADER);
            for entry in &self.index_map {
                out.push_str("\n- ");
                out.push_str(&entry.index);
                if !entry.description.is_empty() {
                    out.push_str(" - ");
                    out.push_str(&entry.description);
                }
            }
        }
        out
    }

    pub fn indices(&self) -> impl Iterator<Item = &str> {
        self.index_map.iter().map(|e| e.index.as_str())
    }
}

fn parse_entry(line: &str) -> Option<IndexEntry> {
    let rest = line.trim_start().strip_prefix("- ")?;
    let (index, description) = match rest.split_once(" - ") {
        Some((index, description)) => (index.trim(), description.trim()),
        None => (rest.trim(), ""),
    };
    if index.is_empty() || index.contains(char::is_whitespace) {
        return None;
    }
    Some(IndexEntry {
        index: index.to_string(),
        description: description.to_string(),
    })
}

/// Cut `text` to at most `max_tokens` tokens by dropping trailing bytes.
pub fn truncate_to_tokens(text: &str, max_tokens: usize) -> &str {
    let max_bytes = max_tokens.saturating_mul(BYTES_PER_TOKEN);
    if text.len() <= max_bytes {
        return text;
    }
    let mut cut = max_bytes;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    &text[..cut]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockSource {
    Explicit {
        #[serde(rename = "db_content")]
        content: String,
    },
    Anchored {
        start_anchor: String,
        mid_anchor: String,
        end_anchor: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBlock {
    #[serde(rename = "db_index")]
    pub index: String,
    #[serde(flatten)]
    pub source: BlockSource,
}

impl MemoryBlock {
    pub fn explicit(index: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            index: index.into(),
            source: BlockSource::Explicit { content: content.into() },
        }
    }

    pub fn anchored(
        index: impl Into<String>,
        start: impl Into<String>,
        mid: impl Into<String>,
        end: impl Into<String>,
    ) -> Self {
        Self {
            index: index.into(),
            source: BlockSource::Anchored {
                start_anchor: start.into(),
                mid_anchor: mid.into(),
                end_anchor: end.into(),
            },
        }
    }

    pub fn mode(&self) -> BlockMode {
        match self.source {
            BlockSource::Explicit { .. } => BlockMode::Explicit,
            BlockSource::Anchored { .. } => BlockMode::Anchored,
        }
    }

    /// JSON object in the `db_blocks` wire shape.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("memory block serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    Explicit,
    Anchored,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("missing required argument '{0}'")]
    MissingArgument(&'static str),
    #[error("db_blocks[{position}]: {reason}")]
    InvalidBlock { position: usize, reason: String },
    #[error("block '{index}': {source}")]
    Anchor {
        index: String,
        #[source]
        source: AnchorError,
    },
}

/// Decode `CompressExperience` arguments: `summary` (string) and `db_blocks` (array).
pub fn parse_compress_arguments(args: &Map<String, Value>) -> Result<(IndexedSummary, Vec<MemoryBlock>), MemoryError> {
    let summary = args
        .get("summary")
        .and_then(Value::as_str)
        .ok_or(MemoryError::MissingArgument("summary"))?;
    let blocks = match args.get("db_blocks") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(position, item)| parse_block(position, item))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) | None => return Err(MemoryError::MissingArgument("db_blocks")),
    };
    Ok((IndexedSummary::parse(summary), blocks))
}

fn parse_block(position: usize, item: &Value) -> Result<MemoryBlock, MemoryError> {
    let invalid = |reason: &str| MemoryError::InvalidBlock {
        position,
        reason: reason.to_string(),
    };
    let obj = item.as_object().ok_or_else(|| invalid("block must be an object"))?;
    let field = |key: &str| obj.get(key).and_then(Value::as_str);
    let index = field("db_index").ok_or_else(|| invalid("missing db_index"))?;
    if index.is_empty() {
        return Err(invalid("db_index must be non-empty"));
    }
    if let Some(content) = field("db_content") {
        return Ok(MemoryBlock::explicit(index, content));
    }
    match (field("start_anchor"), field("mid_anchor"), field("end_anchor")) {
        (Some(s), Some(m), Some(e)) if !s.is_empty() && !m.is_empty() && !e.is_empty() => {
            Ok(MemoryBlock::anchored(index, s, m, e))
        }
        (None, None, None) => Err(invalid("block needs db_content or all three anchors")),
        _ => Err(invalid("anchored block requires start_anchor, mid_anchor and end_anchor")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivedBlock {
    pub index: String,
    pub mode: BlockMode,
    pub byte_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressReport {
    pub archived: Vec<ArchivedBlock>,
    pub warnings: Vec<String>,
    /// Rendered, truncated summary installed as the third message.
    pub summary_message: String,
    pub summary_tokens: usize,
    pub truncated: bool,
}

impl CompressReport {
    pub fn observation(&self) -> String {
        let indices: Vec<&str> = self.archived.iter().map(|b| b.index.as_str()).collect();
        format!(
            "Compression complete. Archived {} blocks: [{}].",
            self.archived.len(),
            indices.join(", ")
        )
    }
}

/// Observation text for a failed compression.
pub fn compress_failed_observation(err: &MemoryError) -> String {
    format!("Error: compression failed: {err}")
}

/// Archive `blocks`, then rewrite the window to `[system, task, summary]`.
///
/// Atomic: if any block fails, neither the window nor the store is touched.
pub fn compress(
    window: &mut ContextWindow,
    store: &mut ExperienceStore,
    step: usize,
    summary: &IndexedSummary,
    blocks: &[MemoryBlock],
    summary_budget: usize,
) -> Result<CompressReport, MemoryError> {
    let mut document: Option<String> = None;
    let mut resolved = Vec::with_capacity(blocks.len());
    let mut warnings = Vec::new();
    for (position, block) in blocks.iter().enumerate() {
        if block.index.is_empty() {
            return Err(MemoryError::InvalidBlock {
                position,
                reason: "db_index must be non-empty".into(),
            });
        }
        let content = match &block.source {
            BlockSource::Explicit { content } => content.clone(),
            BlockSource::Anchored {
                start_anchor,
                mid_anchor,
                end_anchor,
            } => {
                let doc = document.get_or_insert_with(|| window.serialize_conversation());
                let extraction =
                    extract_span(doc, start_anchor, mid_anchor, end_anchor).map_err(|source| MemoryError::Anchor {
                        index: block.index.clone(),
                        source,
                    })?;
                if let Some(AnchorWarning::AmbiguousStart { occurrences }) = extraction.warning {
                    warnings.push(format!(
                        "block '{}': start anchor occurs {occurrences} times before the end anchor; first match used",
                        block.index
                    ));
                }
                extraction.text(doc).to_string()
            }
        };
        resolved.push((block, content));
    }

    let mut archived = Vec::with_capacity(resolved.len());
    for (block, content) in resolved {
        store
            .put(step, &block.index, &content)
            .expect("index validated before writing");
        archived.push(ArchivedBlock {
            index: block.index.clone(),
            mode: block.mode(),
            byte_length: content.len(),
        });
    }

    let rendered = summary.render();
    let installed = truncate_to_tokens(&rendered, summary_budget).to_string();
    let truncated = installed.len() < rendered.len();
    let summary_tokens = count_tokens(&installed);
    window.rewrite_with_summary(Message::new(MessageKind::IndexedSummary, installed.clone()));
    Ok(CompressReport {
        archived,
        warnings,
        summary_message: installed,
        summary_tokens,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadOutcome {
    /// Archived content on a hit.
    pub content: Option<String>,
    /// The text appended to the window.
    pub observation: String,
}

/// Dereference `index`, appending the block (or the miss message) to the window.
pub fn read(window: &mut ContextWindow, store: &ExperienceStore, index: &str) -> ReadOutcome {
    match store.get(index) {
        Ok(content) => {
            window
                .push(Message::new(MessageKind::RetrievedBlock, content))
                .expect("retrieved blocks are working messages");
            ReadOutcome {
                content: Some(content.to_string()),
                observation: content.to_string(),
            }
        }
        Err(err) => {
            let observation = format!("Error: {err}");
            window
                .push(Message::new(MessageKind::ToolOutput, observation.clone()))
                .expect("tool outputs are working messages");
            ReadOutcome {
                content: None,
                observation,
            }
        }
    }
}
