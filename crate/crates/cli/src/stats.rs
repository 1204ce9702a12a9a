//! Corpus-level counting for the `stats` subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use necorpus::conllu::ConlluSentence;
use necorpus::model::NeType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub n_sentences: usize,
    /// Word lines; multiword range lines are not counted.
    pub n_tokens: usize,
    pub n_sentences_with_mentions: usize,
    pub n_mentions: usize,
    pub mentions_by_type: BTreeMap<NeType, usize>,
}

impl CorpusStats {
    pub fn of(sentences: &[ConlluSentence]) -> Self {
        let mut mentions_by_type: BTreeMap<NeType, usize> =
            NeType::ALL.iter().map(|&t| (t, 0)).collect();
        let mut n_tokens = 0;
        let mut n_mentions = 0;
        let mut n_sentences_with_mentions = 0;
        for sentence in sentences {
            n_tokens += sentence.n_words();
            if !sentence.token_mentions.is_empty() {
                n_sentences_with_mentions += 1;
            }
            for mention in &sentence.token_mentions {
                n_mentions += 1;
                *mentions_by_type.entry(mention.ne_type).or_default() += 1;
            }
        }
        CorpusStats {
            n_sentences: sentences.len(),
            n_tokens,
            n_sentences_with_mentions,
            n_mentions,
            mentions_by_type,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>8}", "sentences", self.n_sentences);
        let _ = writeln!(out, "{:<24} {:>8}", "tokens", self.n_tokens);
        let _ = writeln!(
            out,
            "{:<24} {:>8}",
            "sentences with mentions", self.n_sentences_with_mentions
        );
        let _ = writeln!(out, "{:<24} {:>8}", "mentions", self.n_mentions);
        for (ne_type, count) in &self.mentions_by_type {
            let _ = writeln!(out, "  {:<22} {:>8}", ne_type.as_str(), count);
        }
        out
    }
}
