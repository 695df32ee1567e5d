use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::gridworld::Action;
use crate::rng::fnv1a;

/// Lower-cased alphanumeric runs; every other non-space character is its
/// own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
            continue;
        }
        if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

const BASE_WORDS: &[&str] = &[
    "you",
    "see",
    "carry",
    "a",
    "an",
    "the",
    "wall",
    "step",
    "steps",
    "forward",
    "left",
    "right",
    "and",
    "door",
    "open",
    "closed",
    "locked",
    "goal",
    "green",
    "red",
    "blue",
    "purple",
    "yellow",
    "grey",
    "key",
    "ball",
    "box",
    "nothing",
    "square",
    "get",
    "to",
    "pick",
    "up",
    "put",
    "next",
    "observation",
    "action",
    "of",
    "agent",
    "strategies",
    "follow",
    "should",
    "is",
    "are",
    "in",
    "on",
    "with",
    "your",
    "possible",
    "actions",
    "turn",
    "move",
    "pickup",
    "drop",
    "toggle",
    "obstacle",
    "obstacles",
    "room",
    "0",
    "1",
    "2",
    "3",
    "4",
    "5",
    "6",
    "7",
    "8",
    "9",
    ":",
    ",",
    ".",
    "-",
    "'",
    "(",
    ")",
];

/// Fixed word list plus hash buckets for everything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    unk_buckets: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Base words, action-name tokens, then new tokens of `corpus` in order
    /// of first appearance.
    pub fn build(corpus: &[&str], unk_buckets: usize) -> Self {
        let mut words: Vec<String> = Vec::new();
        let push = |w: String, words: &mut Vec<String>| {
            if !words.contains(&w) {
                words.push(w);
            }
        };
        for w in BASE_WORDS {
            push(w.to_string(), &mut words);
        }
        for a in Action::ALL {
            for t in tokenize(a.name()) {
                push(t, &mut words);
            }
        }
        for text in corpus {
            for t in tokenize(text) {
                push(t, &mut words);
            }
        }
        Self::from_words(words, unk_buckets)
    }

    pub fn from_words(words: Vec<String>, unk_buckets: usize) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self {
            words,
            unk_buckets: unk_buckets.max(1),
            index,
        }
    }

    /// Restores the lookup table after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn unk_buckets(&self) -> usize {
        self.unk_buckets
    }

    /// Total id space: known words plus unknown buckets.
    pub fn size(&self) -> usize {
        self.words.len() + self.unk_buckets
    }

    /// Id of a known word.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.lookup(token).unwrap_or_else(|| {
            self.words.len() + (fnv1a(token.as_bytes()) % self.unk_buckets as u64) as usize
        })
    }
}
