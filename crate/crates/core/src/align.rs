//! Character-to-token alignment: builds the per-sentence mapping from
//! character offsets of the raw annotated text to token offsets of an
//! independent tokenization, then projects character mentions to token
//! spans.
//!
//! Matching is a greedy left-to-right scan with case-insensitive character
//! comparison; whitespace (the Unicode property, NBSP included) is skipped
//! on both sides. Diacritics are never folded: a genuinely altered text
//! must surface as an error, not be papered over.

use std::fmt;

use crate::conllu::{ConlluSentence, SurfaceUnit};
use crate::enamex::EnamexDocument;
use crate::model::Mention;
use crate::model::TokenMention;
use crate::par;

use thiserror::Error;

/// One matched surface form: characters `[char_start, char_end)` of the raw
/// text against words `first_word..=last_word` (a multiword range covers
/// several words; its covered word lines inherit the range's span).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapEntry {
    pub char_start: usize,
    pub char_end: usize,
    pub first_word: usize,
    pub last_word: usize,
}

/// Per-sentence alignment: entries are non-overlapping and strictly
/// increasing in character space.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentMap {
    pub entries: Vec<MapEntry>,
}

impl AlignmentMap {
    /// Character span of a 1-based word index, if aligned.
    pub fn word_span(&self, word: usize) -> Option<(usize, usize)> {
        self.entries
            .iter()
            .find(|e| (e.first_word..=e.last_word).contains(&word))
            .map(|e| (e.char_start, e.char_end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlignmentErrorKind {
    /// Leftover tokens or leftover raw text after the scan.
    UnalignedToken,
    /// A mention whose boundaries do not coincide with token boundaries.
    UnalignedMention,
    /// Raw text and token form disagree on a character.
    TextMismatch,
}

impl AlignmentErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignmentErrorKind::UnalignedToken => "unaligned_token",
            AlignmentErrorKind::UnalignedMention => "unaligned_mention",
            AlignmentErrorKind::TextMismatch => "text_mismatch",
        }
    }

    /// Which input the error indicts: mention problems live on the raw
    /// (annotation) side, token problems on the tokenized side, character
    /// mismatches implicate both.
    pub fn side(self) -> Side {
        match self {
            AlignmentErrorKind::UnalignedMention => Side::RawText,
            AlignmentErrorKind::UnalignedToken => Side::Tokens,
            AlignmentErrorKind::TextMismatch => Side::Both,
        }
    }
}

impl fmt::Display for AlignmentErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    RawText,
    Tokens,
    Both,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::RawText => "raw-text",
            Side::Tokens => "tokens",
            Side::Both => "both",
        }
    }
}

/// A single alignment failure, not yet attached to a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind}: {detail}")]
pub struct AlignmentFault {
    pub kind: AlignmentErrorKind,
    pub detail: String,
}

/// An alignment failure located in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sentence {sentence_id} (#{sentence_index}): {fault}")]
pub struct AlignmentError {
    /// 1-based position in the corpus.
    pub sentence_index: usize,
    pub sentence_id: String,
    pub fault: AlignmentFault,
}

/// Fatal condition detected before any alignment is attempted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignFatal {
    #[error("sentence count mismatch: {enamex} annotated vs {conllu} tokenized")]
    SentenceCountMismatch { enamex: usize, conllu: usize },
}

fn fold_eq(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

fn fragment(chars: &[char], at: usize) -> String {
    chars[at..chars.len().min(at + 12)].iter().collect()
}

/// Builds the character-to-token map for one sentence by greedy
/// left-to-right matching of surface forms against the raw text.
pub fn build_map(
    raw_text: &str,
    units: &[SurfaceUnit<'_>],
) -> Result<AlignmentMap, AlignmentFault> {
    let raw: Vec<char> = raw_text.chars().collect();
    let mut entries = Vec::with_capacity(units.len());
    let mut i = 0usize;

    for unit in units {
        while i < raw.len() && raw[i].is_whitespace() {
            i += 1;
        }
        let start = i;
        let mut matched = false;
        for form_char in unit.form.chars().filter(|c| !c.is_whitespace()) {
            while i < raw.len() && raw[i].is_whitespace() {
                i += 1;
            }
            let Some(&raw_char) = raw.get(i) else {
                return Err(AlignmentFault {
                    kind: AlignmentErrorKind::UnalignedToken,
                    detail: format!(
                        "raw text exhausted at char {i} while matching token {:?} (words {}..{})",
                        unit.form, unit.first_word, unit.last_word
                    ),
                });
            };
            if !fold_eq(raw_char, form_char) {
                return Err(AlignmentFault {
                    kind: AlignmentErrorKind::TextMismatch,
                    detail: format!(
                        "raw text {:?} at char {i} vs token {:?} (words {}..{}): {:?} != {:?}",
                        fragment(&raw, i),
                        unit.form,
                        unit.first_word,
                        unit.last_word,
                        raw_char,
                        form_char
                    ),
                });
            }
            i += 1;
            matched = true;
        }
        if !matched {
            return Err(AlignmentFault {
                kind: AlignmentErrorKind::UnalignedToken,
                detail: format!(
                    "token {:?} (words {}..{}) has no matchable characters",
                    unit.form, unit.first_word, unit.last_word
                ),
            });
        }
        entries.push(MapEntry {
            char_start: start,
            char_end: i,
            first_word: unit.first_word,
            last_word: unit.last_word,
        });
    }

    while i < raw.len() && raw[i].is_whitespace() {
        i += 1;
    }
    if i < raw.len() {
        return Err(AlignmentFault {
            kind: AlignmentErrorKind::UnalignedToken,
            detail: format!("leftover raw text {:?} at char {i}", fragment(&raw, i)),
        });
    }
    Ok(AlignmentMap { entries })
}

/// Projects character mentions onto token spans. A mention projects iff its
/// start coincides with some entry's `char_start` and its end with some
/// entry's `char_end`; anything else is collected as an unaligned-mention
/// fault and the mention is dropped.
pub fn project_mentions(
    mentions: &[Mention],
    map: &AlignmentMap,
) -> (Vec<TokenMention>, Vec<AlignmentFault>) {
    let mut projected = Vec::with_capacity(mentions.len());
    let mut faults = Vec::new();
    for m in mentions {
        let first = map.entries.iter().find(|e| e.char_start == m.start);
        let last = map.entries.iter().find(|e| e.char_end == m.end);
        match (first, last) {
            (Some(a), Some(b)) => {
                debug_assert!(a.first_word <= b.last_word);
                projected.push(TokenMention {
                    first_token: a.first_word,
                    last_token: b.last_word,
                    ne_type: m.ne_type,
                    sub_type: m.sub_type.clone(),
                    eid: m.eid.clone(),
                    name: m.name.clone(),
                });
            }
            (first, _) => {
                let end_side = if first.is_none() { "start" } else { "end" };
                faults.push(AlignmentFault {
                    kind: AlignmentErrorKind::UnalignedMention,
                    detail: format!(
                        "mention [{},{}) {} does not {} on a token boundary",
                        m.start, m.end, m.ne_type, end_side
                    ),
                });
            }
        }
    }
    (projected, faults)
}

/// Outcome of aligning a whole corpus: every tokenized sentence, with the
/// mention layer filled where alignment succeeded, plus all errors in
/// sentence order.
#[derive(Debug, Clone)]
pub struct AlignReport {
    pub sentences: Vec<ConlluSentence>,
    pub errors: Vec<AlignmentError>,
}

impl AlignReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    /// errors per kind, in a fixed kind order
    pub fn counts_by_kind(&self) -> Vec<(AlignmentErrorKind, usize)> {
        use AlignmentErrorKind::*;
        [UnalignedToken, UnalignedMention, TextMismatch]
            .into_iter()
            .map(|k| (k, self.errors.iter().filter(|e| e.fault.kind == k).count()))
            .collect()
    }

    pub fn counts_by_side(&self) -> Vec<(Side, usize)> {
        [Side::RawText, Side::Tokens, Side::Both]
            .into_iter()
            .map(|s| {
                (
                    s,
                    self.errors
                        .iter()
                        .filter(|e| e.fault.kind.side() == s)
                        .count(),
                )
            })
            .collect()
    }

    /// One record per error: `sentence_id TAB kind TAB detail`.
    pub fn machine_records(&self) -> String {
        let mut out = String::new();
        for e in &self.errors {
            let detail = e.fault.detail.replace(['\t', '\n', '\r'], " ");
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.sentence_id, e.fault.kind, detail
            ));
        }
        out
    }

    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} sentences aligned, {} error(s)\n",
            self.sentences.len(),
            self.errors.len()
        ));
        for (kind, count) in self.counts_by_kind() {
            if count > 0 {
                out.push_str(&format!("  {kind}: {count}\n"));
            }
        }
        for (side, count) in self.counts_by_side() {
            if count > 0 {
                out.push_str(&format!("  on {} side: {count}\n", side.as_str()));
            }
        }
        out
    }
}

fn align_sentence(
    index: usize,
    annotated: &crate::model::Sentence,
    tokenized: &ConlluSentence,
) -> (ConlluSentence, Vec<AlignmentError>) {
    let mut out = tokenized.clone();
    out.token_mentions.clear();
    let located = |fault: AlignmentFault| AlignmentError {
        sentence_index: index + 1,
        sentence_id: tokenized.sent_id.clone(),
        fault,
    };
    match build_map(&annotated.raw_text, &tokenized.surface_units()) {
        Ok(map) => {
            let (mentions, faults) = project_mentions(&annotated.char_mentions, &map);
            out.token_mentions = mentions;
            (out, faults.into_iter().map(located).collect())
        }
        // a failed map yields exactly one error; the sentence keeps an
        // empty mention layer
        Err(fault) => (out, vec![located(fault)]),
    }
}

/// Aligns an annotated document against its tokenized counterpart,
/// sentence by sentence (in parallel when enabled). Errors never leak
/// across sentences; the report is ordered by sentence index.
pub fn align_corpus(
    doc: &EnamexDocument,
    conllu: &[ConlluSentence],
) -> Result<AlignReport, AlignFatal> {
    align_corpus_impl(doc, conllu, false)
}

/// Sequential twin of [`align_corpus`], the benchmark baseline.
pub fn align_corpus_serial(
    doc: &EnamexDocument,
    conllu: &[ConlluSentence],
) -> Result<AlignReport, AlignFatal> {
    align_corpus_impl(doc, conllu, true)
}

fn align_corpus_impl(
    doc: &EnamexDocument,
    conllu: &[ConlluSentence],
    sequential: bool,
) -> Result<AlignReport, AlignFatal> {
    if doc.sentences.len() != conllu.len() {
        return Err(AlignFatal::SentenceCountMismatch {
            enamex: doc.sentences.len(),
            conllu: conllu.len(),
        });
    }
    let pairs: Vec<(usize, (&crate::model::Sentence, &ConlluSentence))> = doc
        .sentences
        .iter()
        .zip(conllu.iter())
        .enumerate()
        .collect();
    let work =
        |(i, (annotated, tokenized)): &(usize, (&crate::model::Sentence, &ConlluSentence))| {
            align_sentence(*i, annotated, tokenized)
        };
    let results = if sequential {
        par::map_ordered_seq(&pairs, work)
    } else {
        par::map_ordered(&pairs, work)
    };

    let mut sentences = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (sentence, mut errs) in results {
        sentences.push(sentence);
        errors.append(&mut errs);
    }
    Ok(AlignReport { sentences, errors })
}
