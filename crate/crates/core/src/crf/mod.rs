//! Linear-chain conditional random field: scoring, inference, gradients,
//! elastic-net-regularized rprop training, model persistence and the
//! mention-broadcasting post-process.
//!
//! A model scores a tag sequence as the sum of emission weights for the
//! active features at each position plus transition weights for each
//! adjacent tag pair; there are no dedicated begin/end weights. Unknown
//! feature keys are silently dropped at encoding time, never an error.

mod broadcast;
mod gradient;
mod inference;
mod io;
mod train;

pub use broadcast::broadcast_mentions;
pub use gradient::{batch_objective, batch_objective_serial, GoldSentence};
pub use inference::Marginals;
pub use io::ModelIoError;
pub use train::{train, EpochStats, TrainError, TrainOutcome, TrainSentence};

use std::collections::HashMap;

use thiserror::Error;

use crate::features::FeatureVector;

/// Active feature indices per position; unknown keys already dropped.
pub type EncodedSentence = Vec<Vec<u32>>;

/// Full-batch rprop training configuration with elastic-net penalties.
///
/// The defaults use the canonical rprop step constants and the 0.1/0.1
/// penalty pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub l1: f64,
    pub l2: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_init: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Recorded for provenance; full-batch training is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l1: 0.1,
            l2: 0.1,
            max_epochs: 100,
            patience: 5,
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 0.1,
            delta_min: 1e-8,
            delta_max: 50.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.l1 >= 0.0
            && self.l2 >= 0.0
            && self.eta_minus < 1.0
            && 1.0 < self.eta_plus
            && self.delta_min <= self.delta_init
            && self.delta_init <= self.delta_max
            && self.delta_min > 0.0
            && self.max_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("tag set must be non-empty, unique and contain O")]
    BadTagSet,
    #[error("feature keys must be unique")]
    DuplicateFeatureKey,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("non-finite weight at index {0}")]
    NonFiniteWeight(usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

/// A trained (or hand-built) linear-chain CRF.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    tags: Vec<String>,
    tag_lookup: HashMap<String, usize>,
    feature_keys: Vec<String>,
    feature_lookup: HashMap<String, u32>,
    /// Emissions `[feature * n_tags + tag]`, then transitions
    /// `[n_features * n_tags + prev * n_tags + next]`.
    weights: Vec<f64>,
    template_hash: String,
    config: TrainConfig,
}

impl CrfModel {
    pub fn from_parts(
        tags: Vec<String>,
        feature_keys: Vec<String>,
        weights: Vec<f64>,
        template_hash: String,
        config: TrainConfig,
    ) -> Result<Self, ModelError> {
        let tag_lookup: HashMap<String, usize> = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if tags.is_empty() || tag_lookup.len() != tags.len() || !tag_lookup.contains_key("O") {
            return Err(ModelError::BadTagSet);
        }
        let feature_lookup: HashMap<String, u32> = feature_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();
        if feature_lookup.len() != feature_keys.len() {
            return Err(ModelError::DuplicateFeatureKey);
        }
        let expected = feature_keys.len() * tags.len() + tags.len() * tags.len();
        if weights.len() != expected {
            return Err(ModelError::WeightCount {
                expected,
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(ModelError::NonFiniteWeight(i));
        }
        Ok(CrfModel {
            tags,
            tag_lookup,
            feature_keys,
            feature_lookup,
            weights,
            template_hash,
            config,
        })
    }

    /// All-zero model over the given tag set and feature inventory.
    pub fn zeroed(
        tags: Vec<String>,
        feature_keys: Vec<String>,
        template_hash: String,
        config: TrainConfig,
    ) -> Result<Self, ModelError> {
        let n = feature_keys.len() * tags.len() + tags.len() * tags.len();
        Self::from_parts(tags, feature_keys, vec![0.0; n], template_hash, config)
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_keys.len()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn feature_keys(&self) -> &[String] {
        &self.feature_keys
    }

    pub fn template_hash(&self) -> &str {
        &self.template_hash
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tag_lookup.get(tag).copied()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mutable weight access for optimizers and gradient checks. Finiteness
    /// is re-checked when the model is saved.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub(crate) fn emission_index(&self, feature: u32, tag: usize) -> usize {
        feature as usize * self.tags.len() + tag
    }

    #[inline]
    pub(crate) fn transition_index(&self, prev: usize, next: usize) -> usize {
        self.feature_keys.len() * self.tags.len() + prev * self.tags.len() + next
    }

    pub fn emission_weight(&self, feature: u32, tag: usize) -> f64 {
        self.weights[self.emission_index(feature, tag)]
    }

    pub fn transition_weight(&self, prev: usize, next: usize) -> f64 {
        self.weights[self.transition_index(prev, next)]
    }

    /// Maps extracted features to indices; keys outside the model's
    /// dictionary are dropped.
    pub fn encode_sentence(&self, features: &[FeatureVector]) -> EncodedSentence {
        features
            .iter()
            .map(|fv| {
                fv.iter()
                    .filter_map(|key| self.feature_lookup.get(key).copied())
                    .collect()
            })
            .collect()
    }
}
