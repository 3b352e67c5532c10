//! `train`: fit a parameter predictor on an activation store.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use actpred_core::{
    he_scale, train_observed, PhiModel, TrainConfig, TrainMode, TrainObserver,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{resolve_train, ModeArg, TrainArgs, VariantArg};
use crate::error::{read_err, runtime, write_err, CmdError};
use crate::format::{self, FormatError};

/// Initialization draws from a stream derived from the training seed.
pub const INIT_SEED_OFFSET: u64 = 1;

struct CliObserver {
    last: Instant,
    checkpoint_every: usize,
    out_dir: PathBuf,
    write_error: Option<FormatError>,
}

impl TrainObserver for CliObserver {
    fn epoch_end(&mut self, epoch: usize, mean_loss: f64, model: &PhiModel) -> f64 {
        let seconds = self.last.elapsed().as_secs_f64();
        self.last = Instant::now();
        println!("epoch {epoch} mean_loss {mean_loss:.6} seconds {seconds:.3}");
        if self.checkpoint_every > 0
            && (epoch + 1).is_multiple_of(self.checkpoint_every)
            && self.write_error.is_none()
        {
            let path = self.out_dir.join(format!("checkpoint_epoch_{}.phim", epoch + 1));
            if let Err(e) = format::write_checkpoint(&path, model) {
                self.write_error = Some(e);
            }
        }
        seconds
    }
}

pub fn run(args: &TrainArgs) -> Result<(), CmdError> {
    let cfg = resolve_train(args)?;

    let store = format::read_store(&cfg.data, cfg.data_format.into()).map_err(read_err)?;
    let dim = store.dim();

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(INIT_SEED_OFFSET));
    let init = match cfg.variant {
        VariantArg::Linear => PhiModel::init_linear(dim, cfg.init_noise, &mut init_rng),
        VariantArg::TwoLayer => PhiModel::init_two_layer(dim, he_scale(dim), &mut init_rng),
    };

    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batches_per_epoch: cfg.batches_per_epoch,
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
        p_mean: cfg.p_mean,
        lambda: cfg.lambda,
        seed: cfg.seed,
        mode: match cfg.mode {
            ModeArg::Mixed => TrainMode::Mixed,
            ModeArg::MeanOnly => TrainMode::MeanOnly,
        },
    };

    fs::create_dir_all(&cfg.out_dir).map_err(runtime)?;
    let mut observer = CliObserver {
        last: Instant::now(),
        checkpoint_every: cfg.checkpoint_every,
        out_dir: cfg.out_dir.clone(),
        write_error: None,
    };

    let (model, log) = train_observed(&store, &train_cfg, init, &mut observer)?;
    if let Some(e) = observer.write_error {
        return Err(write_err(e));
    }

    format::write_checkpoint(&cfg.checkpoint, &model).map_err(write_err)?;
    format::write_train_log(&cfg.log, &log).map_err(write_err)?;

    println!("wrote {}", cfg.checkpoint.display());
    println!("wrote {}", cfg.log.display());
    println!("final_digest = {}", hex::encode(log.final_digest));
    if let Some(last) = log.epoch_mean_loss.last() {
        println!("final_epoch_mean_loss = {last:.6}");
    }
    Ok(())
}
