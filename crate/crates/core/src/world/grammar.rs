//! Action grammar.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Look,
    GoTo(String),
    Open(String),
    Close(String),
    PickUp(String),
    /// `put <object> in/on <receptacle>`
    Put(String, String),
    /// `<clean|heat|cool> <object> with <receptacle>`
    Treat(String, String, String),
    Examine(String),
}

fn nonempty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

pub fn parse_action(text: &str) -> Option<Action> {
    let text = text.trim();
    if text == "look" {
        return Some(Action::Look);
    }
    if let Some(rest) = text.strip_prefix("go to ") {
        return nonempty(rest).map(Action::GoTo);
    }
    if let Some(rest) = text.strip_prefix("open ") {
        return nonempty(rest).map(Action::Open);
    }
    if let Some(rest) = text.strip_prefix("close ") {
        return nonempty(rest).map(Action::Close);
    }
    if let Some(rest) = text.strip_prefix("pick up ") {
        return nonempty(rest).map(Action::PickUp);
    }
    if let Some(rest) = text.strip_prefix("examine ") {
        return nonempty(rest).map(Action::Examine);
    }
    if let Some(rest) = text.strip_prefix("put ") {
        let (object, target) = [" in/on ", " in ", " on "].iter().find_map(|sep| rest.split_once(sep))?;
        return Some(Action::Put(nonempty(object)?, nonempty(target)?));
    }
    for verb in ["clean", "heat", "cool"] {
        if let Some(rest) = text.strip_prefix(verb).and_then(|r| r.strip_prefix(' ')) {
            let (object, tool) = rest.split_once(" with ")?;
            return Some(Action::Treat(verb.to_string(), nonempty(object)?, nonempty(tool)?));
        }
    }
    None
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Look => f.write_str("look"),
            Action::GoTo(x) => write!(f, "go to {x}"),
            Action::Open(x) => write!(f, "open {x}"),
            Action::Close(x) => write!(f, "close {x}"),
            Action::PickUp(x) => write!(f, "pick up {x}"),
            Action::Put(o, r) => write!(f, "put {o} in/on {r}"),
            Action::Treat(v, o, r) => write!(f, "{v} {o} with {r}"),
            Action::Examine(x) => write!(f, "examine {x}"),
        }
    }
}
