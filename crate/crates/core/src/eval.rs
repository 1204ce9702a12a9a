//! Entity-level precision/recall/F1 and token accuracy between a gold and a
//! predicted annotation layer.
//!
//! A predicted mention counts as a true positive iff some gold mention has
//! the identical token span and the identical base type; subtype, entity id
//! and name play no part in matching. Overall scores are micro-averaged
//! from summed counts, never averaged from per-type scores.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::bio::{self, BioTag};
use crate::conllu::ConlluSentence;
use crate::model::NeType;
use crate::par;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    /// 100 * tp / (tp + fp), 0 when the denominator is 0.
    pub fn precision(&self) -> f64 {
        ratio(
            self.true_positives,
            self.true_positives + self.false_positives,
        )
    }

    /// 100 * tp / (tp + fn), 0 when the denominator is 0.
    pub fn recall(&self) -> f64 {
        ratio(
            self.true_positives,
            self.true_positives + self.false_negatives,
        )
    }

    /// 2PR / (P + R), 0 when P + R = 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Rounds to two decimals, half up, and renders with two decimals.
pub fn fmt2(x: f64) -> String {
    format!("{:.2}", (x * 100.0 + 0.5).floor() / 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_type: BTreeMap<NeType, Counts>,
    pub overall: Counts,
    /// Percentage of positions whose surface tags agree.
    pub token_accuracy: f64,
}

impl EvalReport {
    /// Aligned text table: per-type rows, overall, token accuracy.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10}",
            "type", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        for (ne_type, counts) in &self.per_type {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10}",
                ne_type.as_str(),
                counts.true_positives,
                counts.false_positives,
                counts.false_negatives,
                fmt2(counts.precision()),
                fmt2(counts.recall()),
                fmt2(counts.f1()),
            );
        }
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10}",
            "overall",
            self.overall.true_positives,
            self.overall.false_positives,
            self.overall.false_negatives,
            fmt2(self.overall.precision()),
            fmt2(self.overall.recall()),
            fmt2(self.overall.f1()),
        );
        let _ = writeln!(out, "token accuracy {}", fmt2(self.token_accuracy));
        out
    }

    /// One record per row: `type TAB tp TAB fp TAB fn TAB P TAB R TAB F1`.
    pub fn machine_records(&self) -> String {
        let mut out = String::new();
        let mut row = |name: &str, c: &Counts| {
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.true_positives,
                c.false_positives,
                c.false_negatives,
                fmt2(c.precision()),
                fmt2(c.recall()),
                fmt2(c.f1()),
            );
        };
        for (ne_type, counts) in &self.per_type {
            row(ne_type.as_str(), counts);
        }
        row("overall", &self.overall);
        out
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("corpus mismatch: {gold} gold sentences vs {predicted} predicted")]
    SentenceCountMismatch { gold: usize, predicted: usize },
    #[error("sentence {index}: token count mismatch ({gold} gold vs {predicted} predicted)")]
    TokenCountMismatch {
        index: usize,
        gold: usize,
        predicted: usize,
    },
    #[error("token accuracy is undefined on an empty corpus")]
    EmptyCorpus,
    #[error("tag sequences have different lengths ({gold} vs {predicted})")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("sentence {index}: cannot encode mention layer: {source}")]
    Encode {
        index: usize,
        #[source]
        source: bio::CodecError,
    },
}

/// Fraction of positions with identical surface tags, as a percentage.
pub fn token_accuracy(gold: &[BioTag], predicted: &[BioTag]) -> Result<f64, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let agree = gold.iter().zip(predicted).filter(|(g, p)| g == p).count();
    Ok(100.0 * agree as f64 / gold.len() as f64)
}

/// Compares the mention layers of two parallel corpora.
pub fn evaluate(
    gold: &[ConlluSentence],
    predicted: &[ConlluSentence],
) -> Result<EvalReport, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::SentenceCountMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let pairs: Vec<(usize, (&ConlluSentence, &ConlluSentence))> =
        gold.iter().zip(predicted.iter()).enumerate().collect();

    // per-sentence counting is independent; integer sums are
    // order-insensitive, so the parallel aggregation is deterministic
    let partials = par::map_ordered(&pairs, |(index, (g, p))| sentence_counts(*index, g, p));

    let mut per_type: BTreeMap<NeType, Counts> = BTreeMap::new();
    let mut agree = 0u64;
    let mut total = 0u64;
    for partial in partials {
        let partial = partial?;
        for (ne_type, counts) in partial.per_type {
            per_type.entry(ne_type).or_default().add(counts);
        }
        agree += partial.tags_agreeing;
        total += partial.tags_total;
    }
    if total == 0 {
        return Err(EvalError::EmptyCorpus);
    }
    let mut overall = Counts::default();
    for counts in per_type.values() {
        overall.add(*counts);
    }
    Ok(EvalReport {
        per_type,
        overall,
        token_accuracy: 100.0 * agree as f64 / total as f64,
    })
}

struct SentencePartial {
    per_type: BTreeMap<NeType, Counts>,
    tags_agreeing: u64,
    tags_total: u64,
}

fn sentence_counts(
    index: usize,
    gold: &ConlluSentence,
    predicted: &ConlluSentence,
) -> Result<SentencePartial, EvalError> {
    let n = gold.n_words();
    if n != predicted.n_words() {
        return Err(EvalError::TokenCountMismatch {
            index: index + 1,
            gold: n,
            predicted: predicted.n_words(),
        });
    }
    let encode = |s: &ConlluSentence| {
        bio::encode(&s.token_mentions, n).map_err(|source| EvalError::Encode {
            index: index + 1,
            source,
        })
    };
    let gold_tags = encode(gold)?;
    let pred_tags = encode(predicted)?;
    let tags_agreeing = gold_tags
        .iter()
        .zip(&pred_tags)
        .filter(|(g, p)| g == p)
        .count() as u64;

    // matching key: token span + base type
    let key = |m: &crate::model::TokenMention| (m.first_token, m.last_token, m.ne_type);
    let gold_set: HashSet<_> = gold.token_mentions.iter().map(key).collect();
    let pred_set: HashSet<_> = predicted.token_mentions.iter().map(key).collect();

    let mut per_type: BTreeMap<NeType, Counts> = BTreeMap::new();
    for &(_, _, t) in gold_set.intersection(&pred_set) {
        per_type.entry(t).or_default().true_positives += 1;
    }
    for &(_, _, t) in pred_set.difference(&gold_set) {
        per_type.entry(t).or_default().false_positives += 1;
    }
    for &(_, _, t) in gold_set.difference(&pred_set) {
        per_type.entry(t).or_default().false_negatives += 1;
    }
    Ok(SentencePartial {
        per_type,
        tags_agreeing,
        tags_total: n as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{ConlluRow, RowId};
    use crate::model::TokenMention;

    fn sentence(n: usize, mentions: Vec<(usize, usize, NeType)>) -> ConlluSentence {
        ConlluSentence {
            sent_id: "s".into(),
            comments: vec![],
            rows: (1..=n)
                .map(|i| ConlluRow {
                    columns: vec![
                        i.to_string(),
                        format!("w{i}"),
                        "_".into(),
                        "_".into(),
                        "_".into(),
                        "_".into(),
                        "0".into(),
                        "_".into(),
                        "_".into(),
                        "_".into(),
                    ],
                    id: RowId::Word(i),
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
    fn f1_formula_matches_reported_scores() {
        // P=87.18, R=80.48 must give F1=83.70 at 2-decimal rounding
        let p = 87.18_f64;
        let r = 80.48_f64;
        let f1 = 2.0 * p * r / (p + r);
        assert_eq!(fmt2(f1), "83.70");
    }

    #[test]
    fn hand_counted_example() {
        // gold {(2..3,Loc),(5..5,Per)}, pred {(2..3,Loc),(1..1,Org)}
        let gold = vec![sentence(
            6,
            vec![(2, 3, NeType::Location), (5, 5, NeType::Person)],
        )];
        let pred = vec![sentence(
            6,
            vec![(2, 3, NeType::Location), (1, 1, NeType::Organization)],
        )];
        let report = evaluate(&gold, &pred).unwrap();
        assert_eq!(report.overall.true_positives, 1);
        assert_eq!(report.overall.false_positives, 1);
        assert_eq!(report.overall.false_negatives, 1);
        assert_eq!(fmt2(report.overall.precision()), "50.00");
        assert_eq!(fmt2(report.overall.recall()), "50.00");
        assert_eq!(fmt2(report.overall.f1()), "50.00");
    }

    #[test]
    fn identical_corpora_score_hundred() {
        let gold = vec![sentence(4, vec![(2, 3, NeType::Company)])];
        let report = evaluate(&gold, &gold).unwrap();
        assert_eq!(fmt2(report.overall.precision()), "100.00");
        assert_eq!(fmt2(report.overall.recall()), "100.00");
        assert_eq!(fmt2(report.overall.f1()), "100.00");
        assert_eq!(report.token_accuracy, 100.0);
    }

    #[test]
    fn type_must_match_for_a_true_positive() {
        let gold = vec![sentence(4, vec![(2, 3, NeType::Location)])];
        let pred = vec![sentence(4, vec![(2, 3, NeType::Company)])];
        let report = evaluate(&gold, &pred).unwrap();
        assert_eq!(report.overall.true_positives, 0);
        assert_eq!(report.overall.false_positives, 1);
        assert_eq!(report.overall.false_negatives, 1);
    }

    #[test]
    fn subtype_is_ignored_in_matching() {
        let mut gold = sentence(4, vec![(2, 3, NeType::Location)]);
        gold.token_mentions[0].sub_type = Some("Country".into());
        let pred = sentence(4, vec![(2, 3, NeType::Location)]);
        let report = evaluate(&[gold], &[pred]).unwrap();
        assert_eq!(report.overall.true_positives, 1);
        // the surface tags differ (B-Location.Country vs B-Location)
        assert!(report.token_accuracy < 100.0);
    }

    #[test]
    fn counts_swap_under_argument_swap() {
        let a = vec![sentence(
            5,
            vec![(1, 1, NeType::Person), (3, 4, NeType::Location)],
        )];
        let b = vec![sentence(
            5,
            vec![(1, 1, NeType::Person), (2, 2, NeType::Product)],
        )];
        let ab = evaluate(&a, &b).unwrap();
        let ba = evaluate(&b, &a).unwrap();
        assert_eq!(ab.overall.true_positives, ba.overall.true_positives);
        assert_eq!(ab.overall.false_positives, ba.overall.false_negatives);
        assert_eq!(ab.overall.false_negatives, ba.overall.false_positives);
    }

    #[test]
    fn token_accuracy_three_of_four() {
        let gold: Vec<BioTag> = ["O", "O", "O", "O"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let pred: Vec<BioTag> = ["O", "B-Location", "O", "O"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(token_accuracy(&gold, &pred).unwrap(), 75.0);
        assert_eq!(token_accuracy(&gold, &gold).unwrap(), 100.0);
        assert!(matches!(
            token_accuracy(&[], &[]),
            Err(EvalError::EmptyCorpus)
        ));
        assert!(token_accuracy(&gold, &pred[..3]).is_err());
    }

    #[test]
    fn mismatched_corpora_are_fatal() {
        let a = vec![sentence(4, vec![])];
        let b = vec![sentence(4, vec![]), sentence(4, vec![])];
        assert!(matches!(
            evaluate(&a, &b),
            Err(EvalError::SentenceCountMismatch { .. })
        ));
        let c = vec![sentence(5, vec![])];
        assert!(matches!(
            evaluate(&a, &c),
            Err(EvalError::TokenCountMismatch { .. })
        ));
    }

    #[test]
    fn empty_corpus_accuracy_is_an_error() {
        assert!(matches!(evaluate(&[], &[]), Err(EvalError::EmptyCorpus)));
    }

    #[test]
    fn adding_predictions_moves_recall_and_precision_monotonically() {
        let mut rng = crate::split::SplitMix64::new(0xE7);
        for _ in 0..100 {
            let n = 12;
            // random non-overlapping gold mentions
            let mut gold_mentions = Vec::new();
            let mut next = 1usize;
            while next + 1 < n {
                if rng.next_u64().is_multiple_of(2) {
                    let last = next + (rng.next_u64() % 2) as usize;
                    let ne_type = NeType::ALL[(rng.next_u64() % 7) as usize];
                    gold_mentions.push((next, last, ne_type));
                    next = last + 2;
                } else {
                    next += 1;
                }
            }
            if gold_mentions.is_empty() {
                gold_mentions.push((1, 1, NeType::Person));
            }
            let gold = vec![sentence(n, gold_mentions.clone())];

            // grow predictions by correct mentions: recall never drops
            let mut previous_recall = 0.0;
            for k in 0..=gold_mentions.len() {
                let pred = vec![sentence(n, gold_mentions[..k].to_vec())];
                let recall = evaluate(&gold, &pred).unwrap().overall.recall();
                assert!(recall >= previous_recall);
                previous_recall = recall;
            }
            // then add a spurious prediction: precision never rises
            let half = gold_mentions.len() / 2;
            let mut pred_mentions = gold_mentions[..half].to_vec();
            let base = evaluate(&gold, &[sentence(n, pred_mentions.clone())])
                .unwrap()
                .overall
                .precision();
            // a span past the last gold mention, wrong by construction
            let free = gold_mentions.last().unwrap().1 + 1;
            if free <= n {
                pred_mentions.push((free, free, NeType::Product));
                let report = evaluate(&gold, &[sentence(n, pred_mentions)]).unwrap();
                assert!(report.overall.precision() <= base);
            }
        }
    }

    #[test]
    fn overall_is_the_sum_of_per_type_counts() {
        let gold = vec![sentence(
            8,
            vec![
                (1, 1, NeType::Person),
                (3, 4, NeType::Location),
                (6, 6, NeType::Company),
            ],
        )];
        let pred = vec![sentence(
            8,
            vec![
                (1, 1, NeType::Person),
                (3, 4, NeType::Company),
                (8, 8, NeType::Poi),
            ],
        )];
        let report = evaluate(&gold, &pred).unwrap();
        let mut summed = Counts::default();
        for counts in report.per_type.values() {
            summed.add(*counts);
        }
        assert_eq!(report.overall, summed);
    }

    #[test]
    fn machine_records_have_seven_fields() {
        let gold = vec![sentence(4, vec![(2, 3, NeType::Location)])];
        let report = evaluate(&gold, &gold).unwrap();
        for line in report.machine_records().lines() {
            assert_eq!(line.split('\t').count(), 7);
        }
    }
}
