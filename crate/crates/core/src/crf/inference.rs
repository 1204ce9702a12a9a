//! Scoring, the forward recursion, Viterbi decoding and forward-backward
//! marginals. Everything runs in log space.

use super::{CrfModel, EncodedSentence};

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Per-position/per-edge posterior probabilities plus the log partition.
#[derive(Debug, Clone)]
pub struct Marginals {
    /// `node[t][y]`, row-major over positions.
    pub node: Vec<Vec<f64>>,
    /// `edge[t][prev * n_tags + next]` for the edge between t and t+1.
    pub edge: Vec<Vec<f64>>,
    pub log_partition: f64,
}

impl CrfModel {
    /// Emission score matrix `[position][tag]`.
    pub(crate) fn emission_scores(&self, sentence: &EncodedSentence) -> Vec<Vec<f64>> {
        let k = self.n_tags();
        sentence
            .iter()
            .map(|active| {
                let mut row = vec![0.0; k];
                for &f in active {
                    let base = self.emission_index(f, 0);
                    for (tag, slot) in row.iter_mut().enumerate() {
                        *slot += self.weights[base + tag];
                    }
                }
                row
            })
            .collect()
    }

    /// Log-potential of one tag sequence: active emission weights plus
    /// adjacent-pair transition weights.
    pub fn score(&self, sentence: &EncodedSentence, tags: &[usize]) -> f64 {
        assert_eq!(sentence.len(), tags.len(), "feature/tag length mismatch");
        let mut total = 0.0;
        for (active, &tag) in sentence.iter().zip(tags) {
            for &f in active {
                total += self.emission_weight(f, tag);
            }
        }
        for pair in tags.windows(2) {
            total += self.transition_weight(pair[0], pair[1]);
        }
        total
    }

    /// Log of the summed exponentiated scores over all tag sequences,
    /// by the forward recursion.
    pub fn log_partition(&self, sentence: &EncodedSentence) -> f64 {
        assert!(!sentence.is_empty(), "log_partition of an empty sentence");
        let alpha = self.forward(&self.emission_scores(sentence));
        log_sum_exp(alpha.last().expect("non-empty sentence"))
    }

    fn forward(&self, emissions: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.n_tags();
        let mut alpha = Vec::with_capacity(emissions.len());
        alpha.push(emissions[0].clone());
        let mut scratch = vec![0.0; k];
        for emit in &emissions[1..] {
            let prev = alpha.last().expect("at least one row");
            let mut row = vec![0.0; k];
            for (next, slot) in row.iter_mut().enumerate() {
                for prev_tag in 0..k {
                    scratch[prev_tag] = prev[prev_tag] + self.transition_weight(prev_tag, next);
                }
                *slot = emit[next] + log_sum_exp(&scratch);
            }
            alpha.push(row);
        }
        alpha
    }

    fn backward(&self, emissions: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.n_tags();
        let n = emissions.len();
        let mut beta = vec![vec![0.0; k]; n];
        let mut scratch = vec![0.0; k];
        for t in (0..n - 1).rev() {
            for tag in 0..k {
                for next in 0..k {
                    scratch[next] = self.transition_weight(tag, next)
                        + emissions[t + 1][next]
                        + beta[t + 1][next];
                }
                beta[t][tag] = log_sum_exp(&scratch);
            }
        }
        beta
    }

    /// Highest-scoring tag sequence and its log-potential. Ties resolve to
    /// the lowest tag index at every backpointer decision and at the final
    /// selection, so an all-zero model yields the all-first-tag sequence.
    pub fn viterbi(&self, sentence: &EncodedSentence) -> (Vec<usize>, f64) {
        assert!(!sentence.is_empty(), "viterbi on an empty sentence");
        let emissions = self.emission_scores(sentence);
        let k = self.n_tags();
        let n = emissions.len();

        let mut best = emissions[0].clone();
        let mut backpointers: Vec<Vec<usize>> = Vec::with_capacity(n - 1);
        for emit in &emissions[1..] {
            let mut row = vec![f64::NEG_INFINITY; k];
            let mut pointers = vec![0usize; k];
            for (next, (slot, pointer)) in row.iter_mut().zip(&mut pointers).enumerate() {
                let mut arg = 0usize;
                let mut val = best[0] + self.transition_weight(0, next);
                for (prev, &prev_score) in best.iter().enumerate().skip(1) {
                    let cand = prev_score + self.transition_weight(prev, next);
                    if cand > val {
                        val = cand;
                        arg = prev;
                    }
                }
                *slot = val + emit[next];
                *pointer = arg;
            }
            backpointers.push(pointers);
            best = row;
        }

        let mut last = 0usize;
        let mut score = best[0];
        for (tag, &v) in best.iter().enumerate().skip(1) {
            if v > score {
                score = v;
                last = tag;
            }
        }
        let mut path = vec![last; n];
        for t in (0..n - 1).rev() {
            path[t] = backpointers[t][path[t + 1]];
        }
        (path, score)
    }

    /// Forward-backward posteriors.
    pub fn marginals(&self, sentence: &EncodedSentence) -> Marginals {
        assert!(!sentence.is_empty(), "marginals of an empty sentence");
        let emissions = self.emission_scores(sentence);
        let k = self.n_tags();
        let n = emissions.len();
        let alpha = self.forward(&emissions);
        let beta = self.backward(&emissions);
        let log_partition = log_sum_exp(&alpha[n - 1]);

        let node: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                (0..k)
                    .map(|y| (alpha[t][y] + beta[t][y] - log_partition).exp())
                    .collect()
            })
            .collect();
        let edge: Vec<Vec<f64>> = (0..n - 1)
            .map(|t| {
                let mut row = vec![0.0; k * k];
                for prev in 0..k {
                    for next in 0..k {
                        row[prev * k + next] = (alpha[t][prev]
                            + self.transition_weight(prev, next)
                            + emissions[t + 1][next]
                            + beta[t + 1][next]
                            - log_partition)
                            .exp();
                    }
                }
                row
            })
            .collect();
        Marginals {
            node,
            edge,
            log_partition,
        }
    }
}
