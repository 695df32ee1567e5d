//! Numbered strategy lists: parsing LLM replies and canonical rendering.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyItem {
    pub title: String,
    pub body: String,
}

impl StrategyItem {
    pub fn new(title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            body: body.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    DynamicEpoch(usize),
    #[default]
    Manual,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Initial => f.write_str("initial"),
            Provenance::DynamicEpoch(i) => write!(f, "epoch {i}"),
            Provenance::Manual => f.write_str("manual"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StrategyList {
    pub items: Vec<StrategyItem>,
    pub version: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no numbered strategy items found in reply")]
pub struct ParseError {
    pub raw: String,
}

impl StrategyList {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(items: Vec<StrategyItem>) -> Self {
        Self {
            items,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Replaces the items with `next`, bumping the version.
    pub fn replace_with(&mut self, next: &StrategyList, provenance: Provenance) {
        self.items = next.items.clone();
        self.version += 1;
        self.provenance = provenance;
    }
}

/// Splits `"12. rest"` / `"12) rest"` into the rest of the line.
fn numbered(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &t[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

fn strip_emphasis(s: &str) -> String {
    s.replace("**", "").replace("__", "")
}

fn strip_bullet(s: &str) -> &str {
    let s = s.trim();
    for marker in ["- ", "* ", "• "] {
        if let Some(rest) = s.strip_prefix(marker) {
            return rest.trim_start();
        }
    }
    if s == "-" || s == "*" {
        return "";
    }
    s
}

fn push_body(body: &mut String, text: &str) {
    let text = strip_bullet(text);
    if text.is_empty() {
        return;
    }
    if !body.is_empty() {
        body.push(' ');
    }
    body.push_str(text);
}

/// Parses a numbered list. Each item's first line up to the first colon is
/// its title; whatever follows, and the indented or bulleted lines below it,
/// is its body. Emphasis markers and bullets are dropped.
pub fn parse_strategy_list(text: &str) -> Result<StrategyList, ParseError> {
    let mut items: Vec<StrategyItem> = Vec::new();
    let mut open = false;
    for line in text.lines() {
        if let Some(rest) = numbered(line) {
            open = true;
            let rest = strip_emphasis(rest);
            let (title, tail) = match rest.split_once(':') {
                Some((t, tail)) => (t.trim().to_string(), tail.to_string()),
                None => (rest.trim().to_string(), String::new()),
            };
            let mut item = StrategyItem::new(title, "");
            push_body(&mut item.body, &tail);
            items.push(item);
        } else if line.trim().is_empty() {
        } else if open && is_body_line(line) {
            if let Some(item) = items.last_mut() {
                push_body(&mut item.body, &strip_emphasis(line));
            }
        } else {
            // unindented prose after a list is commentary, not body text
            open = false;
        }
    }
    items.retain(|i| !i.title.is_empty());
    if items.is_empty() {
        return Err(ParseError {
            raw: text.to_string(),
        });
    }
    Ok(StrategyList::new(items))
}

fn is_body_line(line: &str) -> bool {
    line.starts_with([' ', '\t'])
        || matches!(line.trim_start().chars().next(), Some('-' | '*' | '•'))
}

/// Canonical numbered rendering; `""` for an empty list.
pub fn format_for_prompt(list: &StrategyList) -> String {
    let mut out = String::new();
    for (i, item) in list.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if item.body.is_empty() {
            out.push_str(&format!("{}. {}", i + 1, item.title));
        } else {
            out.push_str(&format!("{}. {}:\n  - {}", i + 1, item.title, item.body));
        }
    }
    out
}
