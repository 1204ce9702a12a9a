//! Full-batch rprop training on the elastic-net-penalized negative
//! log-likelihood.
//!
//! The step rule is rprop with weight backtracking in its improved form
//! (iRprop+): per-weight step sizes grow or shrink with gradient sign
//! agreement, and on a sign flip the previous step is undone only when the
//! objective worsened. The L2 term is part of the differentiable objective; the
//! L1 term enters as a clipped subgradient: at zero the pseudo-gradient is
//! chosen so that a weight the penalty can hold at zero stays exactly
//! zero, and a weight whose update would cross zero is clipped to zero.
//! Convergence is judged on dev token error (1 - accuracy) after each
//! epoch; the best-dev weights are retained.

use std::collections::BTreeSet;

use thiserror::Error;

use super::gradient::{batch_objective, GoldSentence};
use super::{CrfModel, ModelError, TrainConfig};
use crate::features::FeatureVector;
use crate::par;

/// One training or dev sentence: extracted features plus gold surface tags.
#[derive(Debug, Clone)]
pub struct TrainSentence {
    pub features: Vec<FeatureVector>,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Penalized objective (NLL + L2 + L1 terms) at the epoch's starting
    /// weights.
    pub objective: f64,
    /// Dev token error (1 - accuracy) after the epoch's update.
    pub dev_error: f64,
}

impl EpochStats {
    /// `epoch TAB objective TAB dev_error`, the training-log line format.
    pub fn log_line(&self) -> String {
        format!("{}\t{}\t{}", self.epoch, self.objective, self.dev_error)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CrfModel,
    pub log: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_dev_error: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("dev set is empty")]
    EmptyDevSet,
    #[error("{which} sentence {index} is empty")]
    EmptySentence { which: &'static str, index: usize },
    #[error("{which} sentence {index}: {features} feature vectors vs {tags} tags")]
    LengthMismatch {
        which: &'static str,
        index: usize,
        features: usize,
        tags: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("objective became non-finite at epoch {epoch}: {objective}")]
    Diverged { epoch: usize, objective: f64 },
}

fn check_set(which: &'static str, set: &[TrainSentence]) -> Result<(), TrainError> {
    for (i, s) in set.iter().enumerate() {
        if s.features.is_empty() {
            return Err(TrainError::EmptySentence {
                which,
                index: i + 1,
            });
        }
        if s.features.len() != s.tags.len() {
            return Err(TrainError::LengthMismatch {
                which,
                index: i + 1,
                features: s.features.len(),
                tags: s.tags.len(),
            });
        }
    }
    Ok(())
}

/// Tag inventory observed in the training gold: O first, the rest sorted.
fn collect_tags(train_set: &[TrainSentence]) -> Vec<String> {
    let set: BTreeSet<&str> = train_set
        .iter()
        .flat_map(|s| s.tags.iter().map(String::as_str))
        .filter(|t| *t != "O")
        .collect();
    let mut tags = vec!["O".to_owned()];
    tags.extend(set.into_iter().map(str::to_owned));
    tags
}

/// Feature dictionary in first-seen order over the training set.
fn collect_features(train_set: &[TrainSentence]) -> Vec<String> {
    let mut keys = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for sentence in train_set {
        for fv in &sentence.features {
            for key in fv.iter() {
                if seen.insert(key.to_owned()) {
                    keys.push(key.to_owned());
                }
            }
        }
    }
    keys
}

struct DevSentence {
    features: super::EncodedSentence,
    /// Gold tag indices; `None` for tags outside the model inventory
    /// (they can never be predicted, so they always count as errors).
    gold: Vec<Option<usize>>,
}

fn dev_token_error(model: &CrfModel, dev: &[DevSentence]) -> f64 {
    let counts = par::map_ordered(dev, |s| {
        let (path, _) = model.viterbi(&s.features);
        let wrong = path
            .iter()
            .zip(&s.gold)
            .filter(|(p, g)| Some(**p) != **g)
            .count();
        (wrong as u64, s.gold.len() as u64)
    });
    let (wrong, total) = counts
        .into_iter()
        .fold((0u64, 0u64), |(w, t), (dw, dt)| (w + dw, t + dt));
    wrong as f64 / total as f64
}

/// OWL-QN-style pseudo-gradient of the L1 term added to the smooth
/// gradient. At w = 0 the subgradient that minimizes movement is chosen:
/// zero whenever the penalty can hold the weight at zero.
fn l1_pseudo_gradient(smooth: f64, w: f64, l1: f64) -> f64 {
    if l1 == 0.0 {
        smooth
    } else if w > 0.0 {
        smooth + l1
    } else if w < 0.0 {
        smooth - l1
    } else if smooth + l1 < 0.0 {
        smooth + l1
    } else if smooth - l1 > 0.0 {
        smooth - l1
    } else {
        0.0
    }
}

struct Rprop {
    delta: Vec<f64>,
    prev_grad: Vec<f64>,
    prev_step: Vec<f64>,
}

impl Rprop {
    fn new(n: usize, delta_init: f64) -> Self {
        Rprop {
            delta: vec![delta_init; n],
            prev_grad: vec![0.0; n],
            prev_step: vec![0.0; n],
        }
    }

    /// One iRprop+ sweep: step sizes adapt to gradient sign agreement;
    /// on a sign flip the step is undone only if the objective worsened
    /// since the previous epoch.
    fn update(
        &mut self,
        weights: &mut [f64],
        gradient: &[f64],
        objective_rose: bool,
        config: &TrainConfig,
    ) {
        let clip = config.l1 > 0.0;
        for i in 0..weights.len() {
            let g = gradient[i];
            let sign_product = g * self.prev_grad[i];
            if sign_product > 0.0 {
                self.delta[i] = (self.delta[i] * config.eta_plus).min(config.delta_max);
                self.step(weights, i, g, clip);
            } else if sign_product < 0.0 {
                self.delta[i] = (self.delta[i] * config.eta_minus).max(config.delta_min);
                if objective_rose {
                    weights[i] -= self.prev_step[i];
                }
                self.prev_step[i] = 0.0;
                self.prev_grad[i] = 0.0;
            } else {
                self.step(weights, i, g, clip);
            }
        }
    }

    fn step(&mut self, weights: &mut [f64], i: usize, g: f64, clip: bool) {
        let step = if g > 0.0 {
            -self.delta[i]
        } else if g < 0.0 {
            self.delta[i]
        } else {
            0.0
        };
        let old = weights[i];
        let mut new = old + step;
        if clip && old != 0.0 && new * old < 0.0 {
            // the L1 penalty pins sign changes at exactly zero
            new = 0.0;
        }
        weights[i] = new;
        self.prev_step[i] = new - old;
        self.prev_grad[i] = g;
    }
}

/// Trains a CRF on pre-extracted features. Deterministic: the same inputs
/// and configuration produce the same model bytes at any thread count.
pub fn train(
    train_set: &[TrainSentence],
    dev_set: &[TrainSentence],
    config: &TrainConfig,
    template_hash: String,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    if dev_set.is_empty() {
        return Err(TrainError::EmptyDevSet);
    }
    check_set("train", train_set)?;
    check_set("dev", dev_set)?;

    let tags = collect_tags(train_set);
    let feature_keys = collect_features(train_set);
    let mut model = CrfModel::zeroed(tags, feature_keys, template_hash, config.clone())?;

    let gold: Vec<GoldSentence> = train_set
        .iter()
        .map(|s| GoldSentence {
            features: model.encode_sentence(&s.features),
            tags: s
                .tags
                .iter()
                .map(|t| model.tag_index(t).expect("tag collected from this set"))
                .collect(),
        })
        .collect();
    let dev: Vec<DevSentence> = dev_set
        .iter()
        .map(|s| DevSentence {
            features: model.encode_sentence(&s.features),
            gold: s.tags.iter().map(|t| model.tag_index(t)).collect(),
        })
        .collect();

    let mut rprop = Rprop::new(model.weights().len(), config.delta_init);
    let mut log = Vec::new();
    let mut best_weights = model.weights().to_vec();
    let mut best_dev_error = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale_epochs = 0usize;
    let mut previous_objective = f64::INFINITY;

    for epoch in 1..=config.max_epochs {
        let (smooth_objective, smooth_gradient) = batch_objective(&model, &gold, config.l2);
        let l1_penalty: f64 = config.l1 * model.weights().iter().map(|w| w.abs()).sum::<f64>();
        let objective = smooth_objective + l1_penalty;
        if !objective.is_finite() {
            return Err(TrainError::Diverged { epoch, objective });
        }

        let pseudo: Vec<f64> = smooth_gradient
            .iter()
            .zip(model.weights())
            .map(|(&g, &w)| l1_pseudo_gradient(g, w, config.l1))
            .collect();
        let objective_rose = objective > previous_objective;
        previous_objective = objective;
        let weights = model.weights_mut();
        rprop.update(weights, &pseudo, objective_rose, config);

        let dev_error = dev_token_error(&model, &dev);
        log.push(EpochStats {
            epoch,
            objective,
            dev_error,
        });

        if dev_error < best_dev_error {
            best_dev_error = dev_error;
            best_epoch = epoch;
            best_weights.copy_from_slice(model.weights());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    model.weights_mut().copy_from_slice(&best_weights);
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_dev_error,
    })
}
