//! CoNLL-U reading and writing, including the extended 13-column variant
//! that carries the NE layer (BIO tag, entity id, normalized name) as three
//! appended columns.
//!
//! The ten standard columns are kept verbatim so that stripping the NE
//! columns from emitted output reproduces the input file byte-exactly.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::bio::{self, BioTag, DecodeMode};
use crate::model::{Token, TokenMention};

/// One token line, standard columns verbatim plus the parsed bits we need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluRow {
    pub columns: Vec<String>,
    pub id: RowId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowId {
    Word(usize),
    /// Multiword token range line `first-last`.
    Range(usize, usize),
}

impl ConlluRow {
    pub fn form(&self) -> &str {
        &self.columns[1]
    }

    pub fn upos(&self) -> Option<&str> {
        match self.columns[3].as_str() {
            "_" => None,
            u => Some(u),
        }
    }
}

/// A sentence as read from a CoNLL-U file: comments and token lines in file
/// order, plus the token-level mention layer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConlluSentence {
    pub sent_id: String,
    pub comments: Vec<String>,
    pub rows: Vec<ConlluRow>,
    pub token_mentions: Vec<TokenMention>,
}

/// A contiguous surface form of the sentence: either a standalone word or a
/// multiword range covering words `first_word..=last_word`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceUnit<'a> {
    pub form: &'a str,
    pub first_word: usize,
    pub last_word: usize,
}

impl ConlluSentence {
    /// Number of word lines (range lines excluded).
    pub fn n_words(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.id, RowId::Word(_)))
            .count()
    }

    /// Word forms in order, 1-based index `i` at position `i - 1`.
    pub fn word_forms(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| matches!(r.id, RowId::Word(_)))
            .map(|r| r.form())
            .collect()
    }

    pub fn word_upos(&self) -> Vec<Option<&str>> {
        self.rows
            .iter()
            .filter(|r| matches!(r.id, RowId::Word(_)))
            .map(|r| r.upos())
            .collect()
    }

    /// The sentence as domain tokens (words and range lines).
    pub fn tokens(&self) -> Vec<Token> {
        self.rows
            .iter()
            .map(|r| match r.id {
                RowId::Word(i) => Token {
                    index: i,
                    form: r.form().to_owned(),
                    upos: r.upos().map(str::to_owned),
                    is_multiword_range: false,
                    range_span: None,
                },
                RowId::Range(first, last) => Token {
                    index: first,
                    form: r.form().to_owned(),
                    upos: None,
                    is_multiword_range: true,
                    range_span: Some((first, last)),
                },
            })
            .collect()
    }

    /// Surface forms in text order; words covered by a range are folded into
    /// the range's unit.
    pub fn surface_units(&self) -> Vec<SurfaceUnit<'_>> {
        let mut units = Vec::new();
        let mut covered_until = 0usize;
        for row in &self.rows {
            match row.id {
                RowId::Range(first, last) => {
                    units.push(SurfaceUnit {
                        form: row.form(),
                        first_word: first,
                        last_word: last,
                    });
                    covered_until = last;
                }
                RowId::Word(i) => {
                    if i > covered_until {
                        units.push(SurfaceUnit {
                            form: row.form(),
                            first_word: i,
                            last_word: i,
                        });
                    }
                }
            }
        }
        units
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid token id {id:?}")]
    InvalidId { line: usize, id: String },
    #[error("line {line}: token id {found} out of order (expected {expected})")]
    NonContiguousId {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("line {line}: range {first}-{last} does not cover the following word lines")]
    BadRange {
        line: usize,
        first: usize,
        last: usize,
    },
    #[error("line {line}: empty FORM column")]
    EmptyForm { line: usize },
    #[error("line {line}: comment lines must precede token lines")]
    MisplacedComment { line: usize },
    #[error("line {line}: NE columns of a range line must be '_'")]
    RangeWithNeAnnotation { line: usize },
    #[error("line {line}: {source}")]
    Tag {
        line: usize,
        #[source]
        source: bio::TagError,
    },
    #[error("line {line}: {source}")]
    Bio {
        line: usize,
        #[source]
        source: bio::CodecError,
    },
    #[error("sentence starting at line {line} has no token lines")]
    EmptySentence { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("sentence {sent_id}: {source}")]
    Encode {
        sent_id: String,
        #[source]
        source: bio::CodecError,
    },
    #[error("sentence {sent_id}: NE field contains a tab or line break")]
    BadNeField { sent_id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads standard 10-column CoNLL-U.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<ConlluSentence>, ParseError> {
    parse(reader, false, DecodeMode::Strict)
}

/// Reads the extended 13-column variant produced by [`emit_extended`].
pub fn parse_extended<R: BufRead>(
    reader: R,
    mode: DecodeMode,
) -> Result<Vec<ConlluSentence>, ParseError> {
    parse(reader, true, mode)
}

struct PendingSentence {
    first_line: usize,
    comments: Vec<String>,
    rows: Vec<ConlluRow>,
    // per word, in order: (line number, tag, eid, name)
    ne_cells: Vec<(usize, String, Option<String>, Option<String>)>,
}

fn parse<R: BufRead>(
    reader: R,
    extended: bool,
    mode: DecodeMode,
) -> Result<Vec<ConlluSentence>, ParseError> {
    let n_columns = if extended { 13 } else { 10 };
    let mut sentences: Vec<ConlluSentence> = Vec::new();
    let mut pending: Option<PendingSentence> = None;
    // (range line number, first, last) of an open multiword range
    let mut open_range: Option<(usize, usize, usize)> = None;
    let mut next_word = 1usize;

    let finish = |pending: &mut Option<PendingSentence>,
                  open_range: &mut Option<(usize, usize, usize)>,
                  next_word: &mut usize,
                  sentences: &mut Vec<ConlluSentence>|
     -> Result<(), ParseError> {
        let Some(p) = pending.take() else {
            return Ok(());
        };
        if p.rows.is_empty() {
            return Err(ParseError::EmptySentence { line: p.first_line });
        }
        if let Some((line, first, last)) = open_range.take() {
            return Err(ParseError::BadRange { line, first, last });
        }
        *next_word = 1;
        let sent_id =
            extract_sent_id(&p.comments).unwrap_or_else(|| (sentences.len() + 1).to_string());
        let token_mentions = if extended {
            decode_ne_cells(&p.ne_cells, mode)?
        } else {
            Vec::new()
        };
        sentences.push(ConlluSentence {
            sent_id,
            comments: p.comments,
            rows: p.rows,
            token_mentions,
        });
        Ok(())
    };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            finish(
                &mut pending,
                &mut open_range,
                &mut next_word,
                &mut sentences,
            )?;
            continue;
        }
        if line.starts_with('#') {
            match &mut pending {
                Some(p) if !p.rows.is_empty() => {
                    return Err(ParseError::MisplacedComment { line: line_no })
                }
                Some(p) => p.comments.push(line),
                None => {
                    pending = Some(PendingSentence {
                        first_line: line_no,
                        comments: vec![line],
                        rows: Vec::new(),
                        ne_cells: Vec::new(),
                    })
                }
            }
            continue;
        }

        let columns: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if columns.len() != n_columns {
            return Err(ParseError::ColumnCount {
                line: line_no,
                expected: n_columns,
                found: columns.len(),
            });
        }
        let id = parse_row_id(&columns[0], line_no)?;
        if columns[1].is_empty() {
            return Err(ParseError::EmptyForm { line: line_no });
        }

        match id {
            RowId::Word(i) => {
                if i != next_word {
                    return Err(ParseError::NonContiguousId {
                        line: line_no,
                        found: i,
                        expected: next_word,
                    });
                }
                next_word += 1;
                if let Some((_, _, last)) = open_range {
                    if i == last {
                        open_range = None;
                    }
                }
            }
            RowId::Range(first, last) => {
                if open_range.is_some() || first != next_word || last < first {
                    return Err(ParseError::BadRange {
                        line: line_no,
                        first,
                        last,
                    });
                }
                open_range = Some((line_no, first, last));
            }
        }

        let (standard, ne_cell) = if extended {
            let tag_col = &columns[10];
            let eid_col = &columns[11];
            let name_col = &columns[12];
            match id {
                RowId::Range(..) => {
                    if tag_col != "_" || eid_col != "_" || name_col != "_" {
                        return Err(ParseError::RangeWithNeAnnotation { line: line_no });
                    }
                    (columns[..10].to_vec(), None)
                }
                RowId::Word(_) => {
                    let cell = (
                        line_no,
                        tag_col.clone(),
                        opt_field(eid_col),
                        opt_field(name_col),
                    );
                    (columns[..10].to_vec(), Some(cell))
                }
            }
        } else {
            (columns, None)
        };

        let p = pending.get_or_insert_with(|| PendingSentence {
            first_line: line_no,
            comments: Vec::new(),
            rows: Vec::new(),
            ne_cells: Vec::new(),
        });
        p.rows.push(ConlluRow {
            columns: standard,
            id,
        });
        if let Some(cell) = ne_cell {
            p.ne_cells.push(cell);
        }
    }
    // lenient EOF: a missing final blank line still emits the last sentence
    finish(
        &mut pending,
        &mut open_range,
        &mut next_word,
        &mut sentences,
    )?;
    Ok(sentences)
}

fn opt_field(s: &str) -> Option<String> {
    if s == "_" {
        None
    } else {
        Some(s.to_owned())
    }
}

fn parse_row_id(id: &str, line: usize) -> Result<RowId, ParseError> {
    let invalid = || ParseError::InvalidId {
        line,
        id: id.to_owned(),
    };
    if let Some((a, b)) = id.split_once('-') {
        let first = a.parse::<usize>().map_err(|_| invalid())?;
        let last = b.parse::<usize>().map_err(|_| invalid())?;
        if first == 0 || last == 0 {
            return Err(invalid());
        }
        Ok(RowId::Range(first, last))
    } else {
        let i = id.parse::<usize>().map_err(|_| invalid())?;
        if i == 0 {
            return Err(invalid());
        }
        Ok(RowId::Word(i))
    }
}

fn extract_sent_id(comments: &[String]) -> Option<String> {
    comments.iter().find_map(|c| {
        c.strip_prefix("# sent_id")
            .and_then(|rest| rest.trim_start().strip_prefix('='))
            .map(|v| v.trim().to_owned())
    })
}

fn decode_ne_cells(
    cells: &[(usize, String, Option<String>, Option<String>)],
    mode: DecodeMode,
) -> Result<Vec<TokenMention>, ParseError> {
    let mut tags = Vec::with_capacity(cells.len());
    for (line, tag, _, _) in cells {
        let tag: BioTag = tag.parse().map_err(|source| ParseError::Tag {
            line: *line,
            source,
        })?;
        tags.push(tag);
    }
    let mut mentions = bio::decode(&tags, mode).map_err(|source| {
        let line = match &source {
            bio::CodecError::InvalidTransition { position, .. } => cells[position - 1].0,
            _ => cells.first().map(|c| c.0).unwrap_or(0),
        };
        ParseError::Bio { line, source }
    })?;
    for m in &mut mentions {
        let (_, _, eid, name) = &cells[m.first_token - 1];
        m.eid = eid.clone();
        m.name = name.clone();
    }
    Ok(mentions)
}

/// Writes sentences in the extended 13-column format: the ten original
/// columns byte-for-byte, then NE tag, entity id and name columns. Range
/// lines carry `_` in all three NE columns; eid and name are repeated on
/// every token of their mention.
pub fn emit_extended<W: Write>(
    sentences: &[ConlluSentence],
    writer: &mut W,
) -> Result<(), EmitError> {
    for sentence in sentences {
        let n_words = sentence.n_words();
        let tags =
            bio::encode(&sentence.token_mentions, n_words).map_err(|source| EmitError::Encode {
                sent_id: sentence.sent_id.clone(),
                source,
            })?;
        let mut eids: Vec<Option<&str>> = vec![None; n_words];
        let mut names: Vec<Option<&str>> = vec![None; n_words];
        for m in &sentence.token_mentions {
            for slot in m.first_token..=m.last_token {
                eids[slot - 1] = m.eid.as_deref();
                names[slot - 1] = m.name.as_deref();
            }
        }
        for field in sentence
            .token_mentions
            .iter()
            .flat_map(|m| [m.eid.as_deref(), m.name.as_deref(), m.sub_type.as_deref()])
            .flatten()
        {
            if field.contains(['\t', '\n', '\r']) {
                return Err(EmitError::BadNeField {
                    sent_id: sentence.sent_id.clone(),
                });
            }
        }

        for comment in &sentence.comments {
            writeln!(writer, "{comment}")?;
        }
        for row in &sentence.rows {
            let base = row.columns.join("\t");
            match row.id {
                RowId::Range(..) => writeln!(writer, "{base}\t_\t_\t_")?,
                RowId::Word(i) => {
                    let tag = tags[i - 1].to_string();
                    let eid = eids[i - 1].unwrap_or("_");
                    let name = names[i - 1].unwrap_or("_");
                    writeln!(writer, "{base}\t{tag}\t{eid}\t{name}")?;
                }
            }
        }
        writeln!(writer)?;
    }
    Ok(())
}
