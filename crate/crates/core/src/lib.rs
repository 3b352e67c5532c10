//! Category-agnostic prediction of classifier parameters from activation
//! statistics.
//!
//! The core idea: a frozen feature extractor maps inputs to activation
//! vectors `a(x)`. For every category `y` we keep the set of its activations
//! and their mean. A small predictor model `phi` maps a per-category
//! *statistic* (the mean, or a single sampled activation) to that category's
//! classifier weight vector. Once `phi` is trained on the large-scale
//! categories, a classifier for novel categories is assembled from a handful
//! of reference activations with nothing but forward passes — no optimizer
//! involved.
//!
//! Modules follow the pipeline:
//!
//! - [`data`]: activation stores, category means, statistic sampling, the
//!   synthetic dataset generator and large/few splitting.
//! - [`predictor`]: the `phi` models (linear and two-layer), the episodic
//!   classification loss and its exact analytic gradients.
//! - [`trainer`]: SGD with momentum and weight decay over sampled episodes.
//! - [`inference`]: classifier assembly (mean statistics for large
//!   categories, max-response weight sets for few-shot ones), accuracy
//!   evaluation, N-way K-shot episodes and the cosine nearest-neighbor
//!   baseline.
//! - [`analysis`]: channel-impact diagnostics of a learned linear predictor.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature,
//! on by default, switches float math to the platform intrinsics. All
//! randomized operations take seeds or explicit RNGs and are fully
//! deterministic; collections iterate in category-id order.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod data;
pub mod error;
mod fmath;
pub mod inference;
pub mod linalg;
pub mod predictor;
pub mod trainer;

pub use error::{Error, Result};

pub use analysis::{
    channel_impact, diagonal_dominance, log_heatmap, order_similarity, DiagonalStats,
    ImpactVector,
};
pub use data::{
    compute_means, gen_synthetic, sample_statistic_set, sample_training_batch, split_store,
    ActivationStore, CategoryId, CategoryMeans, Provenance, SplitStores, StatisticSet,
    SyntheticSpec,
};
pub use inference::{
    build_classifier, episode_report_from_accuracies, nn_cosine_baseline, register_few_shot,
    run_episode, run_episodes, softmax_probs, top_k_accuracy, Accuracy, AdaptStats, Classifier,
    ClassifierEntry, EpisodeReport, EvalEntry, EvalReport,
};
pub use predictor::{
    batch_gradients, batch_loss, he_scale, LossConfig, PhiGrads, PhiModel, PhiVariant,
    Regularizer, DEFAULT_LINEAR_INIT_NOISE,
};
pub use trainer::{
    sgd_step, train, train_observed, NullObserver, OptimizerState, TrainConfig, TrainLog,
    TrainMode, TrainObserver,
};
