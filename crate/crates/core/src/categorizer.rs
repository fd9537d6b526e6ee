//! Deterministic routing of mention pairs to one of six pair categories.
//!
//! Pronouns are single tokens found in [`PRONOUN_GROUPS`]; two pronouns are
//! compatible when they share a group. Non-pronoun pairs are compared on
//! their content words: lowercased token texts minus [`STOP_WORDS`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, MentionPair, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    PronPronC,
    PronPronNC,
    EntPron,
    Match,
    Contains,
    Other,
}

impl Category {
    /// Fixed category order; the index of a category is its position here.
    pub const ALL: [Category; 6] = [
        Category::PronPronC,
        Category::PronPronNC,
        Category::EntPron,
        Category::Match,
        Category::Contains,
        Category::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Category> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::PronPronC => "PronPronC",
            Category::PronPronNC => "PronPronNC",
            Category::EntPron => "EntPron",
            Category::Match => "Match",
            Category::Contains => "Contains",
            Category::Other => "Other",
        }
    }

    /// snake_case name used for parameter names.
    pub fn slug(self) -> &'static str {
        match self {
            Category::PronPronC => "pron_pron_c",
            Category::PronPronNC => "pron_pron_nc",
            Category::EntPron => "ent_pron",
            Category::Match => "match",
            Category::Contains => "contains",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s) || c.slug() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// Groups of mutually compatible pronouns, by group id.
pub const PRONOUN_GROUPS: [(u8, &[&str]); 8] = [
    (1, &["i", "me", "my", "mine", "myself"]),
    (2, &["you", "your", "yours", "yourself", "yourselves"]),
    (3, &["he", "him", "his", "himself"]),
    (4, &["she", "her", "hers", "herself"]),
    (5, &["it", "its", "itself"]),
    (6, &["we", "us", "our", "ours", "ourselves"]),
    (7, &["they", "them", "their", "themselves"]),
    (8, &["that", "this"]),
];

pub const STOP_WORDS: [&str; 18] = [
    "'s", "a", "all", "an", "and", "at", "for", "from", "in", "into", "more", "of", "on", "or",
    "some", "the", "these", "those",
];

/// Group id of a lowercase pronoun.
pub fn pronoun_group(word: &str) -> Option<u8> {
    PRONOUN_GROUPS
        .iter()
        .find(|(_, words)| words.contains(&word))
        .map(|(id, _)| *id)
}

pub fn is_stop_word(word: &str) -> bool {
    STOP_WORDS.contains(&word)
}

/// Panics if either argument is not a known pronoun.
pub fn pronouns_compatible(a: &str, b: &str) -> bool {
    let group = |w: &str| {
        pronoun_group(&w.to_lowercase()).unwrap_or_else(|| panic!("`{w}` is not a known pronoun"))
    };
    group(a) == group(b)
}

pub fn is_pronoun(span: Span, doc: &Document) -> bool {
    span.start == span.end && pronoun_group(&doc.tokens()[span.start].text.to_lowercase()).is_some()
}

pub fn content_words(span: Span, doc: &Document) -> BTreeSet<String> {
    doc.tokens()[span.start..=span.end]
        .iter()
        .map(|t| t.text.to_lowercase())
        .filter(|w| !is_stop_word(w))
        .collect()
}

/// Everything routing needs to know about one span, computed once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanProfile {
    pronoun_group: Option<u8>,
    content_words: BTreeSet<String>,
    last_char_code: u8,
}

impl SpanProfile {
    pub fn new(span: Span, doc: &Document) -> Self {
        let pronoun_group = if span.start == span.end {
            pronoun_group(&doc.tokens()[span.start].text.to_lowercase())
        } else {
            None
        };
        let last = doc.tokens()[span.end].text.chars().last().unwrap_or('\0');
        SpanProfile {
            pronoun_group,
            content_words: content_words(span, doc),
            last_char_code: (last as u32 & 0xff) as u8,
        }
    }

    pub fn is_pronoun(&self) -> bool {
        self.pronoun_group.is_some()
    }
}

/// Linguistic category of a `(candidate, query)` pair from precomputed profiles.
pub fn categorize_profiles(candidate: &SpanProfile, query: &SpanProfile) -> Category {
    match (candidate.pronoun_group, query.pronoun_group) {
        (Some(a), Some(b)) if a == b => Category::PronPronC,
        (Some(_), Some(_)) => Category::PronPronNC,
        (Some(_), None) | (None, Some(_)) => Category::EntPron,
        (None, None) => {
            let (c, q) = (&candidate.content_words, &query.content_words);
            if c.is_empty() || q.is_empty() {
                Category::Other
            } else if c == q {
                Category::Match
            } else if c.is_subset(q) || q.is_subset(c) {
                Category::Contains
            } else {
                Category::Other
            }
        }
    }
}

/// Pseudo-random category from the last characters of both spans.
pub fn categorize_random_profiles(candidate: &SpanProfile, query: &SpanProfile) -> Category {
    let sum = candidate.last_char_code as usize + query.last_char_code as usize;
    Category::ALL[sum % Category::ALL.len()]
}

pub fn categorize(pair: MentionPair, doc: &Document) -> Category {
    categorize_profiles(
        &SpanProfile::new(pair.candidate(), doc),
        &SpanProfile::new(pair.query(), doc),
    )
}

/// Category from `(code(last char of c) + code(last char of q)) mod 6`, where
/// the code is the lowest byte of the character's codepoint.
pub fn categorize_random(pair: MentionPair, doc: &Document) -> Category {
    categorize_random_profiles(
        &SpanProfile::new(pair.candidate(), doc),
        &SpanProfile::new(pair.query(), doc),
    )
}
