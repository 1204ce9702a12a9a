//! BIO2 tag codec: token-span mentions to per-token tag sequences and back.
//!
//! Surface syntax is `O`, `B-Type` or `I-Type.Subtype`; every mention opens
//! with `B-`. Entity identifiers and normalized names belong to the mention,
//! not to the tags, and are transported unchanged around the codec.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{NeType, TokenMention};

/// Entity label carried by `B-` and `I-` tags: base type plus optional subtype.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label {
    pub ne_type: NeType,
    pub sub_type: Option<String>,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sub_type {
            Some(sub) => write!(f, "{}.{}", self.ne_type, sub),
            None => write!(f, "{}", self.ne_type),
        }
    }
}

impl FromStr for Label {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (type_part, sub_type) = match s.split_once('.') {
            Some((t, sub)) if !sub.is_empty() => (t, Some(sub.to_owned())),
            Some(_) => return Err(TagError::Malformed(s.to_owned())),
            None => (s, None),
        };
        let ne_type = type_part
            .parse::<NeType>()
            .map_err(|e| TagError::UnknownType(e.0))?;
        Ok(Label { ne_type, sub_type })
    }
}

/// One BIO tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(Label),
    Inside(Label),
}

impl BioTag {
    pub fn label(&self) -> Option<&Label> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(l) | BioTag::Inside(l) => Some(l),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(l) => write!(f, "B-{l}"),
            BioTag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("malformed tag {0:?}")]
    Malformed(String),
    #[error("unknown entity type {0:?} in tag")]
    UnknownType(String),
}

impl FromStr for BioTag {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        match s.split_once('-') {
            Some(("B", label)) if !label.is_empty() => Ok(BioTag::Begin(label.parse()?)),
            Some(("I", label)) if !label.is_empty() => Ok(BioTag::Inside(label.parse()?)),
            _ => Err(TagError::Malformed(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("mention span {first}..={last} outside 1..={n_tokens} or inverted")]
    SpanOutOfRange {
        first: usize,
        last: usize,
        n_tokens: usize,
    },
    #[error("mentions {a:?} and {b:?} overlap")]
    Overlap {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("invalid transition at position {position}: {previous} followed by {current}")]
    InvalidTransition {
        position: usize,
        previous: String,
        current: String,
    },
}

/// Decoding discipline for [`decode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Reject `I-` after `O`, `I-` with a different label, or leading `I-`.
    Strict,
    /// Promote orphan `I-` to `B-` and split on label changes.
    Repair,
}

/// Encodes token mentions as a BIO tag sequence of length `n_tokens`.
///
/// Mentions must be non-overlapping and lie within `1..=n_tokens`; eid and
/// name are not represented in the tags.
pub fn encode(mentions: &[TokenMention], n_tokens: usize) -> Result<Vec<BioTag>, CodecError> {
    let mut sorted: Vec<&TokenMention> = mentions.iter().collect();
    sorted.sort_by_key(|m| (m.first_token, m.last_token));
    let mut tags = vec![BioTag::Outside; n_tokens];
    let mut previous: Option<(usize, usize)> = None;
    for m in sorted {
        if m.first_token == 0 || m.first_token > m.last_token || m.last_token > n_tokens {
            return Err(CodecError::SpanOutOfRange {
                first: m.first_token,
                last: m.last_token,
                n_tokens,
            });
        }
        if let Some(prev) = previous {
            if m.first_token <= prev.1 {
                return Err(CodecError::Overlap {
                    a: prev,
                    b: (m.first_token, m.last_token),
                });
            }
        }
        previous = Some((m.first_token, m.last_token));
        let label = Label {
            ne_type: m.ne_type,
            sub_type: m.sub_type.clone(),
        };
        tags[m.first_token - 1] = BioTag::Begin(label.clone());
        for slot in &mut tags[m.first_token..m.last_token] {
            *slot = BioTag::Inside(label.clone());
        }
    }
    Ok(tags)
}

/// Decodes a BIO tag sequence into token mentions (eid and name unset).
///
/// Positions are reported 1-based in errors, matching token indices.
pub fn decode(tags: &[BioTag], mode: DecodeMode) -> Result<Vec<TokenMention>, CodecError> {
    let mut mentions = Vec::new();
    let mut open: Option<(usize, Label)> = None;

    for (i, tag) in tags.iter().enumerate() {
        let position = i + 1;
        match tag {
            BioTag::Outside => {
                if let Some((first, label)) = open.take() {
                    mentions.push(close(first, position - 1, label));
                }
            }
            BioTag::Begin(label) => {
                if let Some((first, open_label)) = open.take() {
                    mentions.push(close(first, position - 1, open_label));
                }
                open = Some((position, label.clone()));
            }
            BioTag::Inside(label) => match &open {
                Some((_, open_label)) if open_label == label => {}
                Some((first, open_label)) => {
                    // label change mid-run
                    match mode {
                        DecodeMode::Strict => {
                            return Err(CodecError::InvalidTransition {
                                position,
                                previous: BioTag::Inside(open_label.clone()).to_string(),
                                current: tag.to_string(),
                            });
                        }
                        DecodeMode::Repair => {
                            let (first, open_label) = (*first, open_label.clone());
                            mentions.push(close(first, position - 1, open_label));
                            open = Some((position, label.clone()));
                        }
                    }
                }
                None => match mode {
                    DecodeMode::Strict => {
                        return Err(CodecError::InvalidTransition {
                            position,
                            previous: "O".to_owned(),
                            current: tag.to_string(),
                        });
                    }
                    DecodeMode::Repair => {
                        open = Some((position, label.clone()));
                    }
                },
            },
        }
    }
    if let Some((first, label)) = open {
        mentions.push(close(first, tags.len(), label));
    }
    Ok(mentions)
}

fn close(first: usize, last: usize, label: Label) -> TokenMention {
    TokenMention {
        first_token: first,
        last_token: last,
        ne_type: label.ne_type,
        sub_type: label.sub_type,
        eid: None,
        name: None,
    }
}
