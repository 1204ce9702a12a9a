//! Chronological and seeded shuffled train/dev/test splits.
//!
//! Shuffling uses a self-contained SplitMix64 generator driving a
//! Fisher-Yates shuffle, so a (seed, corpus size) pair produces the same
//! partition on every platform. Split sizes are always explicit inputs.

use thiserror::Error;

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, then two xor-multiply mixing
/// rounds with 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB and a final
/// 31-bit xor-shift.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Requested part sizes; `seed: None` selects the chronological split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub seed: Option<u64>,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.n_train + self.n_dev + self.n_test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("split sizes {n_train}+{n_dev}+{n_test} do not sum to corpus size {corpus}")]
pub struct SizeMismatch {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub corpus: usize,
}

/// Train/dev/test index lists, in that order.
pub type SplitParts = (Vec<usize>, Vec<usize>, Vec<usize>);

/// Fisher-Yates permutation of `0..n` under SplitMix64.
pub fn shuffled_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Partitions `0..n` into (train, dev, test) index lists. Chronological
/// mode keeps corpus order; seeded mode permutes first. Each part keeps
/// its indices in permuted order.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitParts, SizeMismatch> {
    if spec.total() != n {
        return Err(SizeMismatch {
            n_train: spec.n_train,
            n_dev: spec.n_dev,
            n_test: spec.n_test,
            corpus: n,
        });
    }
    let order: Vec<usize> = match spec.seed {
        None => (0..n).collect(),
        Some(seed) => shuffled_permutation(n, seed),
    };
    let train = order[..spec.n_train].to_vec();
    let dev = order[spec.n_train..spec.n_train + spec.n_dev].to_vec();
    let test = order[spec.n_train + spec.n_dev..].to_vec();
    Ok((train, dev, test))
}

/// Splits a corpus by reference, following [`split_indices`].
#[allow(clippy::type_complexity)]
pub fn split<'a, T>(
    corpus: &'a [T],
    spec: &SplitSpec,
) -> Result<(Vec<&'a T>, Vec<&'a T>, Vec<&'a T>), SizeMismatch> {
    let (train, dev, test) = split_indices(corpus.len(), spec)?;
    let pick = |ids: Vec<usize>| ids.into_iter().map(|i| &corpus[i]).collect();
    Ok((pick(train), pick(dev), pick(test)))
}
