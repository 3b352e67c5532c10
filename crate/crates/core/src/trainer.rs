//! Episodic SGD training of the parameter predictor.
//!
//! Every iteration draws a fresh statistic set (category mean with
//! probability `p_mean`, a single activation otherwise) and one training
//! activation per category, evaluates the batch loss and its exact
//! gradients, and applies one SGD step with momentum and coupled weight
//! decay. Mean-only mode pins the statistics to the category means, which
//! biases the model toward well-sampled categories.
//!
//! The loop is sequential (optimizer state carries across iterations) and
//! fully determined by `TrainConfig::seed`.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{self, ActivationStore, StatisticSet};
use crate::error::{Error, Result};
use crate::predictor::{batch_gradients, LossConfig, PhiGrads, PhiModel};

/// Statistic sampling regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Mean statistic with probability `p_mean`, sampled activation
    /// otherwise.
    Mixed,
    /// Statistics pinned to category means (effective `p_mean` = 1).
    MeanOnly,
}

/// Training hyperparameters. Defaults follow the reference regime:
/// 300 epochs of 250 batches, lr 0.001, momentum 0.9, weight decay 0.0005,
/// `p_mean` 0.9.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub p_mean: f64,
    /// Weight of the squared-Frobenius loss regularizer (kept separate
    /// from the optimizer's coupled weight decay; either can be zeroed).
    pub lambda: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batches_per_epoch: 250,
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 0.0005,
            p_mean: 0.9,
            lambda: 1e-4,
            seed: 42,
            mode: TrainMode::Mixed,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batches_per_epoch < 1 {
            return Err(Error::InvalidArgument(
                "batches_per_epoch must be >= 1".into(),
            ));
        }
        // lr 0 is allowed so runs can be replayed without updates.
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidArgument("lr must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(
                "momentum must lie in [0, 1)".into(),
            ));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight_decay must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.p_mean) {
            return Err(Error::InvalidArgument("p_mean must lie in [0, 1]".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        Ok(())
    }

    /// `p_mean` actually used when sampling: 1 in mean-only mode.
    pub fn effective_p_mean(&self) -> f64 {
        match self.mode {
            TrainMode::Mixed => self.p_mean,
            TrainMode::MeanOnly => 1.0,
        }
    }
}

/// Momentum buffers shaped like the model parameters, plus a step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    velocity: Vec<f64>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(model: &PhiModel) -> Self {
        OptimizerState {
            velocity: alloc::vec![0.0; model.param_count()],
            steps: 0,
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Number of SGD steps applied through this state.
    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// One SGD step with classic (coupled) momentum:
/// `v <- momentum * v + g + weight_decay * theta; theta <- theta - lr * v`.
pub fn sgd_step(
    phi: &mut PhiModel,
    grads: &PhiGrads,
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    assert!(grads.matches(phi), "gradient shape mismatch");
    assert_eq!(state.velocity.len(), phi.param_count());
    for ((theta, v), g) in phi
        .params_mut()
        .iter_mut()
        .zip(state.velocity.iter_mut())
        .zip(grads.params().iter())
    {
        *v = momentum * *v + g + weight_decay * *theta;
        *theta -= lr * *v;
    }
    state.steps += 1;
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean per-sample loss per completed epoch (batch losses sum over
    /// one sample per category, so this is the batch sum divided by the
    /// category count, averaged over the epoch). At uniform logits the
    /// value sits at `ln |C|`, which makes epochs comparable across
    /// category counts.
    pub epoch_mean_loss: Vec<f64>,
    /// Wall seconds per epoch as reported by the observer (zeros when
    /// untimed).
    pub epoch_seconds: Vec<f64>,
    /// SHA-256 digest of the final model parameters.
    pub final_digest: [u8; 32],
}

/// Hooks into the training loop; every method has a no-op default.
pub trait TrainObserver {
    /// Called with each freshly drawn statistic set.
    fn statistic_set(&mut self, _set: &StatisticSet) {}

    /// Called at the end of each epoch; the return value is recorded as
    /// the epoch's wall seconds (return 0.0 when not timing).
    fn epoch_end(&mut self, _epoch: usize, _mean_loss: f64, _model: &PhiModel) -> f64 {
        0.0
    }
}

/// Observer that does nothing.
pub struct NullObserver;

impl TrainObserver for NullObserver {}

/// Trains `init` on the store with the given configuration. Deterministic
/// given `cfg.seed`; see [`train_observed`] for instrumentation.
pub fn train(
    store: &ActivationStore,
    cfg: &TrainConfig,
    init: PhiModel,
) -> Result<(PhiModel, TrainLog)> {
    train_observed(store, cfg, init, &mut NullObserver)
}

/// [`train`] with an observer receiving statistic sets and epoch summaries.
///
/// Each iteration: sample a statistic set at the effective `p_mean`, sample
/// one training activation per category, evaluate loss and gradients with
/// `cfg.lambda`, and apply one SGD step. A non-finite loss aborts with the
/// iteration index.
pub fn train_observed(
    store: &ActivationStore,
    cfg: &TrainConfig,
    init: PhiModel,
    observer: &mut dyn TrainObserver,
) -> Result<(PhiModel, TrainLog)> {
    cfg.validate()?;
    if store.n_categories() < 2 {
        return Err(Error::InvalidArgument(
            "training store needs at least 2 categories".into(),
        ));
    }
    if store.dim() != init.dim() {
        return Err(Error::DimMismatch {
            expected: store.dim(),
            got: init.dim(),
        });
    }

    let categories = store.categories();
    let means = data::compute_means(store);
    let p_mean = cfg.effective_p_mean();
    let loss_cfg = LossConfig::new(cfg.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut phi = init;
    let mut state = OptimizerState::new(&phi);
    let mut log = TrainLog {
        epoch_mean_loss: Vec::with_capacity(cfg.epochs),
        epoch_seconds: Vec::with_capacity(cfg.epochs),
        final_digest: [0; 32],
    };

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for batch_idx in 0..cfg.batches_per_epoch {
            let stats = data::sample_statistic_set(store, &means, &categories, p_mean, &mut rng)?;
            observer.statistic_set(&stats);
            let batch = data::sample_training_batch(store, &categories, &mut rng)?;
            let (loss, grads) = batch_gradients(&phi, &stats, &batch, &loss_cfg)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: epoch * cfg.batches_per_epoch + batch_idx,
                    loss,
                });
            }
            sgd_step(
                &mut phi,
                &grads,
                &mut state,
                cfg.lr,
                cfg.momentum,
                cfg.weight_decay,
            );
            loss_sum += loss;
        }
        let mean_loss = loss_sum / (cfg.batches_per_epoch * categories.len()) as f64;
        let seconds = observer.epoch_end(epoch, mean_loss, &phi);
        log.epoch_mean_loss.push(mean_loss);
        log.epoch_seconds.push(seconds);
    }

    log.final_digest = phi.digest();
    Ok((phi, log))
}
