//! Mention broadcasting: mentions found at least once act as a lexicon and
//! tag identical unlabeled token sequences elsewhere in the corpus.
//!
//! Forms observed with more than one base type are skipped; a match that
//! would overlap an existing mention is skipped; subtype, eid and name are
//! carried over from the first occurrence in corpus order. Applying the
//! pass twice changes nothing.

use std::collections::HashMap;

use crate::conllu::ConlluSentence;
use crate::model::{NeType, TokenMention};

struct LexiconEntry {
    ne_type: NeType,
    sub_type: Option<String>,
    eid: Option<String>,
    name: Option<String>,
    ambiguous: bool,
}

pub fn broadcast_mentions(sentences: &mut [ConlluSentence]) {
    let mut lexicon: HashMap<Vec<String>, LexiconEntry> = HashMap::new();
    let mut max_len = 0usize;
    for sentence in sentences.iter() {
        let forms = sentence.word_forms();
        for m in &sentence.token_mentions {
            let key: Vec<String> = forms[m.first_token - 1..m.last_token]
                .iter()
                .map(|s| (*s).to_owned())
                .collect();
            max_len = max_len.max(key.len());
            match lexicon.get_mut(&key) {
                None => {
                    lexicon.insert(
                        key,
                        LexiconEntry {
                            ne_type: m.ne_type,
                            sub_type: m.sub_type.clone(),
                            eid: m.eid.clone(),
                            name: m.name.clone(),
                            ambiguous: false,
                        },
                    );
                }
                Some(entry) => {
                    if entry.ne_type != m.ne_type {
                        entry.ambiguous = true;
                    }
                }
            }
        }
    }
    if lexicon.is_empty() {
        return;
    }

    for sentence in sentences.iter_mut() {
        let n = sentence.n_words();
        let mut covered = vec![false; n];
        for m in &sentence.token_mentions {
            for slot in &mut covered[m.first_token - 1..m.last_token] {
                *slot = true;
            }
        }
        let forms: Vec<String> = sentence
            .word_forms()
            .into_iter()
            .map(str::to_owned)
            .collect();

        let mut added: Vec<TokenMention> = Vec::new();
        let mut i = 0usize;
        while i < n {
            if covered[i] {
                i += 1;
                continue;
            }
            let mut advanced = false;
            for len in (1..=max_len.min(n - i)).rev() {
                if covered[i..i + len].iter().any(|&c| c) {
                    continue;
                }
                let Some(entry) = lexicon.get(&forms[i..i + len]) else {
                    continue;
                };
                if entry.ambiguous {
                    continue;
                }
                added.push(TokenMention {
                    first_token: i + 1,
                    last_token: i + len,
                    ne_type: entry.ne_type,
                    sub_type: entry.sub_type.clone(),
                    eid: entry.eid.clone(),
                    name: entry.name.clone(),
                });
                for slot in &mut covered[i..i + len] {
                    *slot = true;
                }
                i += len;
                advanced = true;
                break;
            }
            if !advanced {
                i += 1;
            }
        }
        if !added.is_empty() {
            sentence.token_mentions.append(&mut added);
            sentence.token_mentions.sort_by_key(|m| m.first_token);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{ConlluRow, RowId};

    fn sentence(forms: &[&str], mentions: Vec<(usize, usize, NeType)>) -> ConlluSentence {
        ConlluSentence {
            sent_id: "s".into(),
            comments: vec![],
            rows: forms
                .iter()
                .enumerate()
                .map(|(i, form)| ConlluRow {
                    columns: vec![
                        (i + 1).to_string(),
                        (*form).to_owned(),
                        "_".into(),
                        "_".into(),
                        "_".into(),
                        "_".into(),
                        "0".into(),
                        "_".into(),
                        "_".into(),
                        "_".into(),
                    ],
                    id: RowId::Word(i + 1),
                })
                .collect(),
            token_mentions: mentions
                .into_iter()
                .map(|(first, last, ne_type)| TokenMention {
                    first_token: first,
                    last_token: last,
                    ne_type,
                    sub_type: None,
                    eid: None,
                    name: None,
                })
                .collect(),
        }
    }

    #[test]
    fn known_mention_tags_unlabeled_occurrence() {
        let mut corpus = vec![
            sentence(&["Orange", "recrute"], vec![(1, 1, NeType::Company)]),
            sentence(&["chez", "Orange", "aussi"], vec![]),
        ];
        broadcast_mentions(&mut corpus);
        assert_eq!(corpus[1].token_mentions.len(), 1);
        let m = &corpus[1].token_mentions[0];
        assert_eq!(
            (m.first_token, m.last_token, m.ne_type),
            (2, 2, NeType::Company)
        );
    }

    #[test]
    fn ambiguous_forms_are_never_broadcast() {
        let mut corpus = vec![
            sentence(&["Orange", "recrute"], vec![(1, 1, NeType::Company)]),
            sentence(&["vers", "Orange"], vec![(2, 2, NeType::Location)]),
            sentence(&["encore", "Orange"], vec![]),
        ];
        broadcast_mentions(&mut corpus);
        assert!(corpus[2].token_mentions.is_empty());
    }

    #[test]
    fn overlapping_matches_are_skipped() {
        let mut corpus = vec![
            sentence(
                &["Banque", "de", "France"],
                vec![(1, 3, NeType::Organization)],
            ),
            // "France" alone is known, but here it sits inside an existing mention
            sentence(&["la", "France"], vec![(1, 2, NeType::Location)]),
        ];
        broadcast_mentions(&mut corpus);
        assert_eq!(corpus[1].token_mentions.len(), 1);
        assert_eq!(corpus[1].token_mentions[0].first_token, 1);
    }

    #[test]
    fn longest_known_sequence_wins() {
        let mut corpus = vec![
            sentence(&["New", "York"], vec![(1, 2, NeType::Location)]),
            sentence(&["York", "city"], vec![(1, 1, NeType::Poi)]),
            sentence(&["in", "New", "York", "today"], vec![]),
        ];
        broadcast_mentions(&mut corpus);
        let m = &corpus[2].token_mentions[0];
        assert_eq!(
            (m.first_token, m.last_token, m.ne_type),
            (2, 3, NeType::Location)
        );
    }

    #[test]
    fn metadata_comes_from_the_first_occurrence() {
        let mut first = sentence(&["Zola", "écrit"], vec![(1, 1, NeType::Person)]);
        first.token_mentions[0].eid = Some("42".into());
        first.token_mentions[0].name = Some("Émile Zola".into());
        let mut corpus = vec![first, sentence(&["cite", "Zola"], vec![])];
        broadcast_mentions(&mut corpus);
        let m = &corpus[1].token_mentions[0];
        assert_eq!(m.eid.as_deref(), Some("42"));
        assert_eq!(m.name.as_deref(), Some("Émile Zola"));
    }

    #[test]
    fn broadcasting_is_idempotent() {
        let mut corpus = vec![
            sentence(&["Orange", "et", "Paris"], vec![(1, 1, NeType::Company)]),
            sentence(
                &["Paris", "près", "de", "Orange"],
                vec![(1, 1, NeType::Location)],
            ),
            sentence(&["Orange", "Paris", "Orange"], vec![]),
        ];
        broadcast_mentions(&mut corpus);
        let once = corpus.clone();
        broadcast_mentions(&mut corpus);
        assert_eq!(corpus, once);
    }
}
