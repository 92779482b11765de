//! Anchor-based span extraction.
//!
//! A span starts at the first occurrence of the start anchor and ends after the
//! first occurrence of the end anchor that follows it. The mid anchor must sit
//! strictly inside, between the two, or the span is rejected.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    Start,
    Mid,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnchorError {
    #[error("{0:?} anchor is empty")]
    EmptyAnchor(AnchorKind),
    #[error("{0:?} anchor not found")]
    AnchorNotFound(AnchorKind),
    #[error("mid anchor does not occur between the start and end anchors")]
    MidAnchorVerificationFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorWarning {
    /// The start anchor occurs `occurrences` times before the chosen end; the first was used.
    AmbiguousStart { occurrences: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub range: Range<usize>,
    pub warning: Option<AnchorWarning>,
}

impl Extraction {
    pub fn text<'a>(&self, document: &'a str) -> &'a str {
        &document[self.range.clone()]
    }
}

pub fn extract_span(document: &str, start: &str, mid: &str, end: &str) -> Result<Extraction, AnchorError> {
    for (anchor, kind) in [(start, AnchorKind::Start), (mid, AnchorKind::Mid), (end, AnchorKind::End)] {
        if anchor.is_empty() {
            return Err(AnchorError::EmptyAnchor(kind));
        }
    }
    let s = document.find(start).ok_or(AnchorError::AnchorNotFound(AnchorKind::Start))?;
    let after_start = s + start.len();
    let e = document[after_start..]
        .find(end)
        .map(|i| after_start + i)
        .ok_or(AnchorError::AnchorNotFound(AnchorKind::End))?;
    if !document[after_start..e].contains(mid) {
        return Err(AnchorError::MidAnchorVerificationFailed);
    }
    let occurrences = document[..e + end.len()]
        .match_indices(start)
        .filter(|(i, _)| *i < e)
        .count();
    let warning = (occurrences > 1).then_some(AnchorWarning::AmbiguousStart { occurrences });
    Ok(Extraction {
        range: s..e + end.len(),
        warning,
    })
}
