//! Batch negative log-likelihood and its gradient.
//!
//! Sentences are processed in fixed-size chunks; per-chunk partials are
//! merged in chunk order, so the floating-point result is independent of
//! the number of worker threads.

use std::collections::HashMap;

use super::{CrfModel, EncodedSentence};
use crate::par;

/// One training sentence: encoded features plus gold tag indices.
#[derive(Debug, Clone)]
pub struct GoldSentence {
    pub features: EncodedSentence,
    pub tags: Vec<usize>,
}

struct ChunkPartial {
    nll: f64,
    /// Sparse emission-gradient contributions, keyed by flat weight index.
    emission: HashMap<usize, f64>,
    /// Dense transition-gradient contributions, `prev * n_tags + next`.
    transition: Vec<f64>,
}

fn chunk_partial(model: &CrfModel, chunk: &[GoldSentence]) -> ChunkPartial {
    let k = model.n_tags();
    let mut nll = 0.0;
    let mut emission: HashMap<usize, f64> = HashMap::new();
    let mut transition = vec![0.0; k * k];

    for sentence in chunk {
        let marginals = model.marginals(&sentence.features);
        nll += marginals.log_partition - model.score(&sentence.features, &sentence.tags);

        for (t, active) in sentence.features.iter().enumerate() {
            let gold = sentence.tags[t];
            for &f in active {
                let base = model.emission_index(f, 0);
                for y in 0..k {
                    // expected count minus empirical count
                    let mut delta = marginals.node[t][y];
                    if y == gold {
                        delta -= 1.0;
                    }
                    if delta != 0.0 {
                        *emission.entry(base + y).or_insert(0.0) += delta;
                    }
                }
            }
        }
        for t in 0..sentence.tags.len().saturating_sub(1) {
            let gold_edge = sentence.tags[t] * k + sentence.tags[t + 1];
            for (slot, marginal) in transition.iter_mut().zip(&marginals.edge[t]) {
                *slot += marginal;
            }
            transition[gold_edge] -= 1.0;
        }
    }
    ChunkPartial {
        nll,
        emission,
        transition,
    }
}

/// Objective `sum NLL + l2/2 * ||w||^2` and its gradient over all weights.
///
/// The L1 penalty is not part of this objective; the optimizer applies it
/// as a clipped subgradient.
pub fn batch_objective(model: &CrfModel, batch: &[GoldSentence], l2: f64) -> (f64, Vec<f64>) {
    merge(
        model,
        l2,
        par::map_chunks(batch, |c| chunk_partial(model, c)),
    )
}

/// Sequential twin of [`batch_objective`]; the benchmark baseline.
pub fn batch_objective_serial(
    model: &CrfModel,
    batch: &[GoldSentence],
    l2: f64,
) -> (f64, Vec<f64>) {
    merge(
        model,
        l2,
        par::map_chunks_seq(batch, |c| chunk_partial(model, c)),
    )
}

fn merge(model: &CrfModel, l2: f64, partials: Vec<ChunkPartial>) -> (f64, Vec<f64>) {
    let k = model.n_tags();
    let trans_base = model.n_features() * k;
    let mut gradient = vec![0.0; model.weights().len()];
    let mut nll = 0.0;
    for partial in partials {
        nll += partial.nll;
        for (idx, delta) in partial.emission {
            gradient[idx] += delta;
        }
        for (offset, delta) in partial.transition.into_iter().enumerate() {
            gradient[trans_base + offset] += delta;
        }
    }
    let mut objective = nll;
    if l2 != 0.0 {
        for (slot, &w) in gradient.iter_mut().zip(model.weights()) {
            *slot += l2 * w;
        }
        objective += 0.5 * l2 * model.weights().iter().map(|w| w * w).sum::<f64>();
    }
    (objective, gradient)
}
