//! Shared domain types: entity types, mentions at the character and token
//! level, tokens and sentences.
//!
//! All offsets in this crate count Unicode scalar values of the owning
//! sentence's raw text, never bytes. Character mentions use half-open spans
//! `[start, end)`; token mentions use inclusive 1-based word indices.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// The seven base named-entity types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NeType {
    Person,
    Location,
    Organization,
    Company,
    Product,
    Poi,
    FictionChar,
}

impl NeType {
    /// All seven values, in canonical order.
    pub const ALL: [NeType; 7] = [
        NeType::Person,
        NeType::Location,
        NeType::Organization,
        NeType::Company,
        NeType::Product,
        NeType::Poi,
        NeType::FictionChar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NeType::Person => "Person",
            NeType::Location => "Location",
            NeType::Organization => "Organization",
            NeType::Company => "Company",
            NeType::Product => "Product",
            NeType::Poi => "POI",
            NeType::FictionChar => "FictionChar",
        }
    }
}

impl fmt::Display for NeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error raised when a string does not name one of the seven entity types.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown entity type {0:?}")]
pub struct UnknownNeType(pub String);

impl FromStr for NeType {
    type Err = UnknownNeType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Person" => Ok(NeType::Person),
            "Location" => Ok(NeType::Location),
            "Organization" => Ok(NeType::Organization),
            "Company" => Ok(NeType::Company),
            "Product" => Ok(NeType::Product),
            "POI" => Ok(NeType::Poi),
            "FictionChar" => Ok(NeType::FictionChar),
            other => Err(UnknownNeType(other.to_owned())),
        }
    }
}

/// A typed entity span over the raw sentence text, `[start, end)` in
/// Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub ne_type: NeType,
    pub sub_type: Option<String>,
    /// Entity database identifier; `"null"` in source data maps to `None`.
    pub eid: Option<String>,
    /// Normalized entity name.
    pub name: Option<String>,
}

/// A typed entity span over word tokens, inclusive 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMention {
    pub first_token: usize,
    pub last_token: usize,
    pub ne_type: NeType,
    pub sub_type: Option<String>,
    pub eid: Option<String>,
    pub name: Option<String>,
}

/// A single token of a tokenized sentence.
///
/// Multiword range lines of CoNLL-U (`4-5  du ...`) are carried as tokens
/// with `is_multiword_range` set and `range_span` holding the covered word
/// indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based word index; for range tokens, the index of the first covered word.
    pub index: usize,
    pub form: String,
    pub upos: Option<String>,
    pub is_multiword_range: bool,
    pub range_span: Option<(usize, usize)>,
}

impl Token {
    pub fn word(index: usize, form: impl Into<String>, upos: Option<&str>) -> Self {
        Token {
            index,
            form: form.into(),
            upos: upos.map(str::to_owned),
            is_multiword_range: false,
            range_span: None,
        }
    }
}

/// One sentence with raw text, tokens and either annotation layer.
///
/// Sentences coming out of the inline-XML ingest carry `raw_text` and
/// `char_mentions`; sentences coming out of the aligner or the extended
/// CoNLL-U reader carry `tokens` and `token_mentions`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: String,
    pub raw_text: String,
    pub tokens: Vec<Token>,
    pub char_mentions: Vec<Mention>,
    pub token_mentions: Vec<TokenMention>,
}

/// A structural problem found in a sentence's mention set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MentionViolation {
    /// `start >= end`.
    InvalidSpan { start: usize, end: usize },
    /// Span boundaries fall outside the raw text.
    OutOfBounds {
        start: usize,
        end: usize,
        text_len: usize,
    },
    /// One mention strictly contains another.
    Nesting {
        outer: (usize, usize),
        inner: (usize, usize),
    },
    /// Two mentions intersect without containment.
    Overlap {
        a: (usize, usize),
        b: (usize, usize),
    },
}

impl fmt::Display for MentionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MentionViolation::InvalidSpan { start, end } => {
                write!(f, "invalid span [{start},{end})")
            }
            MentionViolation::OutOfBounds {
                start,
                end,
                text_len,
            } => {
                write!(f, "span [{start},{end}) outside text of length {text_len}")
            }
            MentionViolation::Nesting { outer, inner } => write!(
                f,
                "nesting: [{},{}) contains [{},{})",
                outer.0, outer.1, inner.0, inner.1
            ),
            MentionViolation::Overlap { a, b } => {
                write!(f, "overlap: [{},{}) and [{},{})", a.0, a.1, b.0, b.1)
            }
        }
    }
}

/// Checks a sentence's character mentions for invalid spans, out-of-bounds
/// boundaries, nesting and overlap. Violations are data, not failures: the
/// full list is always returned.
pub fn validate_mentions(sentence: &Sentence) -> Result<(), Vec<MentionViolation>> {
    let text_len = sentence.raw_text.chars().count();
    let mut violations = Vec::new();

    for m in &sentence.char_mentions {
        if m.start >= m.end {
            violations.push(MentionViolation::InvalidSpan {
                start: m.start,
                end: m.end,
            });
        } else if m.end > text_len {
            violations.push(MentionViolation::OutOfBounds {
                start: m.start,
                end: m.end,
                text_len,
            });
        }
    }

    let mut spans: Vec<(usize, usize)> = sentence
        .char_mentions
        .iter()
        .filter(|m| m.start < m.end)
        .map(|m| (m.start, m.end))
        .collect();
    spans.sort_unstable();
    for pair in spans.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.0 < a.1 {
            // b starts inside a: containment is nesting, anything else overlap
            if b.1 <= a.1 {
                violations.push(MentionViolation::Nesting { outer: a, inner: b });
            } else {
                violations.push(MentionViolation::Overlap { a, b });
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Slice of a string by Unicode scalar value offsets `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars()
        .skip(start)
        .take(end.saturating_sub(start))
        .collect()
}
