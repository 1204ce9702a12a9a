//! Inline ENAMEX ingest: parses sentence-per-line text with inline
//! `<ENAMEX ...>` elements into raw text plus stand-off mentions, and
//! serializes back.
//!
//! Decoding is strict: only `&amp;` `&lt;` `&gt;` `&quot;` and numeric
//! character references are understood, a bare `&` or stray `<` is a parse
//! error, and nested elements are rejected outright.

use std::fmt;

use thiserror::Error;

use crate::model::{validate_mentions, Mention, MentionViolation, NeType, Sentence};

/// A parsed ENAMEX-annotated document: sentences in input order, carrying
/// raw text and character-offset mentions (tokens are left empty).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnamexDocument {
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// `<` that does not open `<ENAMEX ...>` or `</ENAMEX>`.
    StrayMarkup,
    /// `</ENAMEX>` with no open element.
    StrayClose,
    /// Element still open at end of line.
    UnclosedElement,
    /// `<ENAMEX` inside another element's content.
    NestedElement,
    /// `&` that does not start a recognized entity.
    UnknownEntity(String),
    /// Numeric character reference naming an invalid scalar value.
    InvalidCharRef(String),
    /// `type` attribute naming none of the seven entity types.
    UnknownType(String),
    /// Attribute other than type/sub_type/eid/name.
    UnknownAttribute(String),
    DuplicateAttribute(String),
    MissingTypeAttribute,
    MalformedAttribute,
    /// Element with no text content.
    EmptyMention,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::StrayMarkup => f.write_str("stray '<' outside ENAMEX markup"),
            ParseErrorKind::StrayClose => f.write_str("</ENAMEX> with no open element"),
            ParseErrorKind::UnclosedElement => f.write_str("ENAMEX element not closed"),
            ParseErrorKind::NestedElement => f.write_str("nested ENAMEX element"),
            ParseErrorKind::UnknownEntity(e) => write!(f, "unhandled entity {e:?}"),
            ParseErrorKind::InvalidCharRef(r) => write!(f, "invalid character reference {r:?}"),
            ParseErrorKind::UnknownType(t) => write!(f, "unknown type attribute {t:?}"),
            ParseErrorKind::UnknownAttribute(a) => write!(f, "unknown attribute {a:?}"),
            ParseErrorKind::DuplicateAttribute(a) => write!(f, "duplicate attribute {a:?}"),
            ParseErrorKind::MissingTypeAttribute => f.write_str("missing type attribute"),
            ParseErrorKind::MalformedAttribute => f.write_str("malformed attribute"),
            ParseErrorKind::EmptyMention => f.write_str("ENAMEX element with empty content"),
        }
    }
}

/// Parse failure located by 1-based sentence (line) and column (scalar values).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sentence {sentence}, column {column}: {kind}")]
pub struct ParseError {
    pub sentence: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

/// Serialization refusal: the document violates the mention invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("sentence {sentence}: invalid mentions: {}", format_violations(.violations))]
    InvalidMentions {
        sentence: usize,
        violations: Vec<MentionViolation>,
    },
    #[error("sentence {sentence}: raw text contains a line break")]
    TextContainsLineBreak { sentence: usize },
}

fn format_violations(violations: &[MentionViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses one-sentence-per-line text with inline ENAMEX elements.
pub fn parse_enamex(xml_text: &str) -> Result<EnamexDocument, ParseError> {
    let mut sentences = Vec::new();
    for (i, line) in xml_text.lines().enumerate() {
        sentences.push(parse_sentence(line, i + 1)?);
    }
    Ok(EnamexDocument { sentences })
}

struct Attributes {
    ne_type: NeType,
    sub_type: Option<String>,
    eid: Option<String>,
    name: Option<String>,
}

fn parse_sentence(line: &str, sentence: usize) -> Result<Sentence, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let err = |column: usize, kind: ParseErrorKind| ParseError {
        sentence,
        column: column + 1,
        kind,
    };

    let mut raw = String::new();
    let mut raw_len = 0usize;
    let mut mentions = Vec::new();
    let mut open: Option<(usize, usize, Attributes)> = None; // (raw start, column, attrs)
    let mut i = 0usize;

    while i < chars.len() {
        match chars[i] {
            '<' => {
                if lookahead(&chars, i, "</ENAMEX>") {
                    let (start, _, attrs) = open
                        .take()
                        .ok_or_else(|| err(i, ParseErrorKind::StrayClose))?;
                    if start == raw_len {
                        return Err(err(i, ParseErrorKind::EmptyMention));
                    }
                    mentions.push(Mention {
                        start,
                        end: raw_len,
                        ne_type: attrs.ne_type,
                        sub_type: attrs.sub_type,
                        eid: attrs.eid,
                        name: attrs.name,
                    });
                    i += "</ENAMEX>".chars().count();
                } else if lookahead(&chars, i, "<ENAMEX")
                    && chars.get(i + 7).is_some_and(|c| c.is_whitespace())
                {
                    if open.is_some() {
                        return Err(err(i, ParseErrorKind::NestedElement));
                    }
                    let (attrs, next) = parse_attributes(&chars, i + 7, sentence)?;
                    open = Some((raw_len, i, attrs));
                    i = next;
                } else {
                    return Err(err(i, ParseErrorKind::StrayMarkup));
                }
            }
            '&' => {
                let (c, next) = decode_entity(&chars, i, sentence)?;
                raw.push(c);
                raw_len += 1;
                i = next;
            }
            c => {
                raw.push(c);
                raw_len += 1;
                i += 1;
            }
        }
    }
    if let Some((_, column, _)) = open {
        return Err(err(column, ParseErrorKind::UnclosedElement));
    }

    Ok(Sentence {
        sent_id: sentence.to_string(),
        raw_text: raw,
        char_mentions: mentions,
        ..Sentence::default()
    })
}

fn lookahead(chars: &[char], at: usize, needle: &str) -> bool {
    needle
        .chars()
        .enumerate()
        .all(|(k, c)| chars.get(at + k) == Some(&c))
}

/// Decodes the entity starting at `chars[at] == '&'`; returns the decoded
/// scalar value and the index just past the `;`.
fn decode_entity(chars: &[char], at: usize, sentence: usize) -> Result<(char, usize), ParseError> {
    let err = |kind: ParseErrorKind| ParseError {
        sentence,
        column: at + 1,
        kind,
    };
    let semi = chars[at + 1..]
        .iter()
        .take(12)
        .position(|&c| c == ';')
        .map(|p| at + 1 + p)
        .ok_or_else(|| err(ParseErrorKind::UnknownEntity("&".to_owned())))?;
    let body: String = chars[at + 1..semi].iter().collect();
    let decoded = match body.as_str() {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        _ => {
            let reference = format!("&{body};");
            let code =
                if let Some(hex) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = body.strip_prefix('#') {
                    dec.parse::<u32>().ok()
                } else {
                    return Err(err(ParseErrorKind::UnknownEntity(reference)));
                };
            code.and_then(char::from_u32)
                .ok_or_else(|| err(ParseErrorKind::InvalidCharRef(reference)))?
        }
    };
    Ok((decoded, semi + 1))
}

fn parse_attributes(
    chars: &[char],
    mut i: usize,
    sentence: usize,
) -> Result<(Attributes, usize), ParseError> {
    let mut ne_type: Option<NeType> = None;
    let mut sub_type: Option<String> = None;
    let mut eid: Option<String> = None;
    let mut name: Option<String> = None;

    loop {
        while chars.get(i).is_some_and(|c| c.is_whitespace()) {
            i += 1;
        }
        match chars.get(i) {
            Some('>') => {
                i += 1;
                break;
            }
            Some(c) if c.is_alphabetic() || *c == '_' => {}
            _ => {
                return Err(ParseError {
                    sentence,
                    column: i + 1,
                    kind: ParseErrorKind::MalformedAttribute,
                })
            }
        }
        let name_start = i;
        while chars
            .get(i)
            .is_some_and(|c| c.is_alphanumeric() || *c == '_')
        {
            i += 1;
        }
        let attr_name: String = chars[name_start..i].iter().collect();
        let attr_err = |column: usize, kind: ParseErrorKind| ParseError {
            sentence,
            column: column + 1,
            kind,
        };
        if chars.get(i) != Some(&'=') || chars.get(i + 1) != Some(&'"') {
            return Err(attr_err(i, ParseErrorKind::MalformedAttribute));
        }
        i += 2;
        let mut value = String::new();
        loop {
            match chars.get(i) {
                Some('"') => {
                    i += 1;
                    break;
                }
                Some('&') => {
                    let (c, next) = decode_entity(chars, i, sentence)?;
                    value.push(c);
                    i = next;
                }
                Some('<') => return Err(attr_err(i, ParseErrorKind::MalformedAttribute)),
                Some(c) => {
                    value.push(*c);
                    i += 1;
                }
                None => return Err(attr_err(name_start, ParseErrorKind::MalformedAttribute)),
            }
        }
        match attr_name.as_str() {
            "type" => {
                if ne_type.is_some() {
                    return Err(attr_err(
                        name_start,
                        ParseErrorKind::DuplicateAttribute(attr_name),
                    ));
                }
                ne_type = Some(
                    value
                        .parse::<NeType>()
                        .map_err(|e| attr_err(name_start, ParseErrorKind::UnknownType(e.0)))?,
                );
            }
            "sub_type" => {
                if sub_type.is_some() {
                    return Err(attr_err(
                        name_start,
                        ParseErrorKind::DuplicateAttribute(attr_name),
                    ));
                }
                sub_type = Some(value);
            }
            "eid" => {
                if eid.is_some() {
                    return Err(attr_err(
                        name_start,
                        ParseErrorKind::DuplicateAttribute(attr_name),
                    ));
                }
                // "null" marks an entity absent from the reference database
                eid = if value == "null" { None } else { Some(value) };
            }
            "name" => {
                if name.is_some() {
                    return Err(attr_err(
                        name_start,
                        ParseErrorKind::DuplicateAttribute(attr_name),
                    ));
                }
                name = Some(value);
            }
            _ => {
                return Err(attr_err(
                    name_start,
                    ParseErrorKind::UnknownAttribute(attr_name),
                ))
            }
        }
    }

    let ne_type = ne_type.ok_or(ParseError {
        sentence,
        column: i,
        kind: ParseErrorKind::MissingTypeAttribute,
    })?;
    Ok((
        Attributes {
            ne_type,
            sub_type,
            eid,
            name,
        },
        i,
    ))
}

/// Serializes a document back to one-sentence-per-line ENAMEX text.
///
/// Attributes are emitted in the canonical order type, sub_type, eid, name;
/// XML-special characters are re-escaped. Documents with overlapping or
/// nested mentions are refused.
pub fn serialize_enamex(doc: &EnamexDocument) -> Result<String, SerializeError> {
    let mut out = String::new();
    for (idx, sentence) in doc.sentences.iter().enumerate() {
        let sentence_no = idx + 1;
        if sentence.raw_text.contains(['\n', '\r']) {
            return Err(SerializeError::TextContainsLineBreak {
                sentence: sentence_no,
            });
        }
        if let Err(violations) = validate_mentions(sentence) {
            return Err(SerializeError::InvalidMentions {
                sentence: sentence_no,
                violations,
            });
        }
        let mut mentions: Vec<&Mention> = sentence.char_mentions.iter().collect();
        mentions.sort_by_key(|m| m.start);

        let chars: Vec<char> = sentence.raw_text.chars().collect();
        let mut pos = 0usize;
        for m in mentions {
            push_text(&mut out, &chars[pos..m.start]);
            out.push_str(&open_tag(m));
            push_text(&mut out, &chars[m.start..m.end]);
            out.push_str("</ENAMEX>");
            pos = m.end;
        }
        push_text(&mut out, &chars[pos..]);
        out.push('\n');
    }
    Ok(out)
}

fn open_tag(m: &Mention) -> String {
    let mut tag = format!("<ENAMEX type=\"{}\"", m.ne_type);
    if let Some(sub) = &m.sub_type {
        tag.push_str(&format!(" sub_type=\"{}\"", escape_attr(sub)));
    }
    if let Some(eid) = &m.eid {
        tag.push_str(&format!(" eid=\"{}\"", escape_attr(eid)));
    }
    if let Some(name) = &m.name {
        tag.push_str(&format!(" name=\"{}\"", escape_attr(name)));
    }
    tag.push('>');
    tag
}

fn push_text(out: &mut String, chars: &[char]) {
    for &c in chars {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
}

fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::char_slice;

    const JAPON: &str = "Le <ENAMEX type=\"Location\" sub_type=\"Country\" eid=\"2000000001861060\" name=\"Japan\">Japon</ENAMEX> signe.";

    #[test]
    fn parses_location_with_all_attributes() {
        let doc = parse_enamex(JAPON).unwrap();
        assert_eq!(doc.sentences.len(), 1);
        let s = &doc.sentences[0];
        assert_eq!(s.raw_text, "Le Japon signe.");
        assert_eq!(s.char_mentions.len(), 1);
        let m = &s.char_mentions[0];
        assert_eq!((m.start, m.end), (3, 8));
        assert_eq!(m.ne_type, NeType::Location);
        assert_eq!(m.sub_type.as_deref(), Some("Country"));
        assert_eq!(m.eid.as_deref(), Some("2000000001861060"));
        assert_eq!(m.name.as_deref(), Some("Japan"));
        assert_eq!(char_slice(&s.raw_text, m.start, m.end), "Japon");
    }

    #[test]
    fn parses_organization_without_subtype() {
        let line = "La <ENAMEX type=\"Organization\" eid=\"1000000000016778\" name=\"Confédération française démocratique du travail\">CFDT</ENAMEX> proteste.";
        let doc = parse_enamex(line).unwrap();
        let m = &doc.sentences[0].char_mentions[0];
        assert_eq!(
            char_slice(&doc.sentences[0].raw_text, m.start, m.end),
            "CFDT"
        );
        assert_eq!(m.ne_type, NeType::Organization);
        assert_eq!(m.sub_type, None);
        assert_eq!(
            m.name.as_deref(),
            Some("Confédération française démocratique du travail")
        );
    }

    #[test]
    fn plain_sentence_is_identity() {
        let doc = parse_enamex("Rien à signaler ici.").unwrap();
        assert_eq!(doc.sentences[0].raw_text, "Rien à signaler ici.");
        assert!(doc.sentences[0].char_mentions.is_empty());
    }

    #[test]
    fn entities_are_decoded() {
        let doc = parse_enamex("A &amp; B &lt;= C &gt; D &quot;E&quot; &#233;t&#xE9;").unwrap();
        assert_eq!(doc.sentences[0].raw_text, "A & B <= C > D \"E\" été");
    }

    #[test]
    fn bare_ampersand_is_an_error() {
        let err = parse_enamex("A & B").unwrap_err();
        assert_eq!(err.sentence, 1);
        assert_eq!(err.column, 3);
        assert!(matches!(err.kind, ParseErrorKind::UnknownEntity(_)));
    }

    #[test]
    fn unknown_named_entity_is_an_error() {
        let err = parse_enamex("A &apos; B").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownEntity("&apos;".into()));
    }

    #[test]
    fn nested_elements_are_an_error() {
        let line = "<ENAMEX type=\"Location\">a <ENAMEX type=\"Person\">b</ENAMEX></ENAMEX>";
        let err = parse_enamex(line).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NestedElement);
    }

    #[test]
    fn unclosed_element_is_an_error() {
        let err = parse_enamex("Le <ENAMEX type=\"Location\">Japon signe.").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnclosedElement);
        assert_eq!(err.column, 4);
    }

    #[test]
    fn unknown_type_names_the_offending_value() {
        let err = parse_enamex("<ENAMEX type=\"Town\">x</ENAMEX>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownType("Town".into()));
    }

    #[test]
    fn null_eid_means_absent() {
        let doc =
            parse_enamex("<ENAMEX type=\"Person\" eid=\"null\">Zola</ENAMEX> écrit.").unwrap();
        assert_eq!(doc.sentences[0].char_mentions[0].eid, None);
    }

    #[test]
    fn empty_mention_is_an_error() {
        let err = parse_enamex("x <ENAMEX type=\"Person\"></ENAMEX> y").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::EmptyMention);
    }

    #[test]
    fn error_column_points_at_the_stray_markup() {
        let err = parse_enamex("ok\nhére < là").unwrap_err();
        assert_eq!(err.sentence, 2);
        assert_eq!(err.column, 6);
        assert_eq!(err.kind, ParseErrorKind::StrayMarkup);
    }

    #[test]
    fn serialize_reproduces_the_original_element() {
        let doc = parse_enamex(JAPON).unwrap();
        let out = serialize_enamex(&doc).unwrap();
        assert_eq!(out, format!("{JAPON}\n"));
    }

    #[test]
    fn serialize_empty_document_yields_empty_string() {
        assert_eq!(serialize_enamex(&EnamexDocument::default()).unwrap(), "");
    }

    #[test]
    fn serialize_escapes_special_characters() {
        let doc = parse_enamex("A &amp; B").unwrap();
        assert_eq!(serialize_enamex(&doc).unwrap(), "A &amp; B\n");
    }

    #[test]
    fn serialize_refuses_overlapping_mentions() {
        let mut doc = parse_enamex("abcdefghij").unwrap();
        for (start, end) in [(0, 5), (3, 8)] {
            doc.sentences[0].char_mentions.push(Mention {
                start,
                end,
                ne_type: NeType::Person,
                sub_type: None,
                eid: None,
                name: None,
            });
        }
        assert!(matches!(
            serialize_enamex(&doc),
            Err(SerializeError::InvalidMentions { sentence: 1, .. })
        ));
    }

    #[test]
    fn length_law_holds_per_sentence() {
        let decoded_len = JAPON.replace("&amp;", "&").chars().count();
        let doc = parse_enamex(JAPON).unwrap();
        let markup_len = "<ENAMEX type=\"Location\" sub_type=\"Country\" eid=\"2000000001861060\" name=\"Japan\">"
            .chars()
            .count()
            + "</ENAMEX>".chars().count();
        assert_eq!(
            doc.sentences[0].raw_text.chars().count(),
            decoded_len - markup_len
        );
    }

    #[test]
    fn multiline_documents_keep_sentence_order() {
        let doc = parse_enamex("un\ndeux\ntrois").unwrap();
        let texts: Vec<_> = doc.sentences.iter().map(|s| s.raw_text.as_str()).collect();
        assert_eq!(texts, vec!["un", "deux", "trois"]);
        assert_eq!(doc.sentences[1].sent_id, "2");
    }
}
