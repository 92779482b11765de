//! `<tool_call>` wire format: parsing, canonical signatures and emission.
//!
//! A region starts at `<tool_call>` and ends at the next `</tool_call>`.
//! Bad regions are classified once, in precedence order: tag mismatch,
//! then invalid JSON, then missing `name`/`arguments`.

use std::fmt::Write as _;
use std::io;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const OPEN_TAG: &str = "<tool_call>";
pub const CLOSE_TAG: &str = "</tool_call>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Map<String, Value>,
    /// Byte range of the whole region (tags included) in the assistant output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_span: Option<Range<usize>>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Map<String, Value>) -> Self {
        Self {
            name: name.into(),
            arguments,
            raw_span: None,
        }
    }

    /// Build a call from a `json!({...})` object literal.
    pub fn from_json(name: impl Into<String>, arguments: Value) -> Self {
        let arguments = match arguments {
            Value::Object(map) => map,
            Value::Null => Map::new(),
            other => panic!("tool arguments must be an object, got {other}"),
        };
        Self::new(name, arguments)
    }

    pub fn arg_str(&self, key: &str) -> Option<&str> {
        self.arguments.get(key).and_then(Value::as_str)
    }

    /// Same name and arguments; the source span is ignored.
    pub fn same_call(&self, other: &ToolCall) -> bool {
        self.name == other.name && self.arguments == other.arguments
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedClass {
    TagMismatch,
    InvalidJson,
    MissingField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Malformed {
    pub class: MalformedClass,
    pub detail: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutcome {
    /// Everything outside tool-call regions, concatenated.
    pub thinking: String,
    pub calls: Vec<ToolCall>,
    pub malformed: Vec<Malformed>,
    /// Every region in source order, well-formed or not.
    pub regions: Vec<Range<usize>>,
}

impl ParseOutcome {
    /// True when at least one opening tag was present.
    pub fn attempted(&self) -> bool {
        !self.regions.is_empty()
    }

    pub fn first_call(&self) -> Option<&ToolCall> {
        self.calls.first()
    }
}

pub fn parse_assistant_output(text: &str) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut cursor = 0;
    while let Some(rel) = text[cursor..].find(OPEN_TAG) {
        let start = cursor + rel;
        out.thinking.push_str(&text[cursor..start]);
        let body_start = start + OPEN_TAG.len();
        let next_open = text[body_start..].find(OPEN_TAG).map(|i| body_start + i);
        let close = text[body_start..].find(CLOSE_TAG).map(|i| body_start + i);
        match close {
            Some(close) if next_open.is_none_or(|o| close < o) => {
                let end = close + CLOSE_TAG.len();
                let span = start..end;
                match classify_body(&text[body_start..close]) {
                    Ok((name, arguments)) => out.calls.push(ToolCall {
                        name,
                        arguments,
                        raw_span: Some(span.clone()),
                    }),
                    Err((class, detail)) => out.malformed.push(Malformed {
                        class,
                        detail,
                        span: span.clone(),
                    }),
                }
                out.regions.push(span);
                cursor = end;
            }
            _ => {
                // Unterminated: the region runs up to the next opening tag or the end.
                let end = next_open.unwrap_or(text.len());
                let span = start..end;
                out.malformed.push(Malformed {
                    class: MalformedClass::TagMismatch,
                    detail: format!("{OPEN_TAG} without matching {CLOSE_TAG}"),
                    span: span.clone(),
                });
                out.regions.push(span);
                cursor = end;
            }
        }
    }
    out.thinking.push_str(&text[cursor..]);
    out
}

fn classify_body(body: &str) -> Result<(String, Map<String, Value>), (MalformedClass, String)> {
    let value: Value = serde_json::from_str(body.trim())
        .map_err(|e| (MalformedClass::InvalidJson, e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err((MalformedClass::MissingField, "tool call body is not a JSON object".into()));
    };
    let name = match obj.remove("name") {
        Some(Value::String(name)) if !name.is_empty() => name,
        Some(_) => return Err((MalformedClass::MissingField, "\"name\" must be a non-empty string".into())),
        None => return Err((MalformedClass::MissingField, "missing required field \"name\"".into())),
    };
    let arguments = match obj.remove("arguments") {
        Some(Value::Object(args)) => args,
        Some(_) => return Err((MalformedClass::MissingField, "\"arguments\" must be an object".into())),
        None => return Err((MalformedClass::MissingField, "missing required field \"arguments\"".into())),
    };
    Ok((name, arguments))
}

/// `name(args)` with object keys sorted at every depth and no whitespace.
pub fn canonical_signature(call: &ToolCall) -> String {
    let mut sig = String::with_capacity(call.name.len() + 32);
    sig.push_str(&call.name);
    sig.push('(');
    write_canonical(&mut sig, &Value::Object(call.arguments.clone()));
    sig.push(')');
    sig
}

fn write_canonical(out: &mut String, value: &Value) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(out, &map[key]);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(out, item);
            }
            out.push(']');
        }
        scalar => {
            let _ = write!(out, "{scalar}");
        }
    }
}

/// Emit a call as `<tool_call>{"name": ..., "arguments": ...}</tool_call>`.
pub fn emit_call(call: &ToolCall) -> String {
    // "name" before "arguments" regardless of map ordering.
    let mut json = String::from("{\"name\": ");
    json.push_str(&to_spaced_json(&Value::String(call.name.clone())));
    json.push_str(", \"arguments\": ");
    json.push_str(&to_spaced_json(&Value::Object(call.arguments.clone())));
    json.push('}');
    format!("{OPEN_TAG}{json}{CLOSE_TAG}")
}

/// JSON with `": "` and `", "` separators on one line.
pub fn to_spaced_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SpacedFormatter);
    value.serialize(&mut ser).expect("serializing a Value cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

struct SpacedFormatter;

impl serde_json::ser::Formatter for SpacedFormatter {
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }
}
