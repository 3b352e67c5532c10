//! Command configuration: clap flags, optional TOML config file, defaults.
//!
//! Precedence is flags > config file > built-in defaults. Every command
//! echoes its fully resolved configuration as TOML before doing any work;
//! feeding that echo back through `--config` reproduces the run. Seeds
//! default to a fixed constant so unadorned runs are deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{validation, CmdError};
use crate::format::StoreFormat;

/// Default seed for every command; never derived from the clock.
pub const DEFAULT_SEED: u64 = 42;

const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Linear,
    TwoLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Mixed,
    MeanOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Binary,
    Csv,
}

impl From<FormatArg> for StoreFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Binary => StoreFormat::Binary,
            FormatArg::Csv => StoreFormat::Csv,
        }
    }
}

/// Top-level TOML config file: one optional table per subcommand.
/// Unknown keys anywhere are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gen: Option<GenFile>,
    pub train: Option<TrainFile>,
    pub eval: Option<EvalFile>,
    pub episodes: Option<EpisodesFile>,
    pub analyze: Option<AnalyzeFile>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CmdError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| validation(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| validation(format!("{}: {e}", p.display())))
        }
    }
}

/// Picks flag value, then config-file value, then the default.
macro_rules! pick {
    ($args:expr, $file:expr, $field:ident, $default:expr) => {
        $args
            .$field
            .clone()
            .or_else(|| $file.as_ref().and_then(|f| f.$field.clone()))
            .unwrap_or($default)
    };
}

/// Same as `pick!` but the value has no default and must be present.
macro_rules! pick_required {
    ($args:expr, $file:expr, $field:ident, $flag:literal) => {
        $args
            .$field
            .clone()
            .or_else(|| $file.as_ref().and_then(|f| f.$field.clone()))
            .ok_or_else(|| {
                validation(concat!("missing required ", $flag, " (flag or config file)"))
            })?
    };
}

/// Optional in the resolved config as well.
macro_rules! pick_optional {
    ($args:expr, $file:expr, $field:ident) => {
        $args
            .$field
            .clone()
            .or_else(|| $file.as_ref().and_then(|f| f.$field.clone()))
    };
}

fn echo<T: Serialize>(section: &str, cfg: &T) {
    let body = toml::to_string(cfg).expect("resolved config serializes");
    println!("# resolved configuration");
    println!("[{section}]");
    print!("{body}");
    println!("# end configuration");
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct GenArgs {
    /// TOML config file; explicit flags win over file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the generated files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Number of large-scale categories.
    #[arg(long)]
    pub categories_large: Option<usize>,
    /// Number of few-shot categories (appended after the large ones).
    #[arg(long)]
    pub categories_few: Option<usize>,
    #[arg(long)]
    pub samples_per_category: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub center_scale: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Rescale samples to unit norm after adding noise.
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Reference samples per few-shot category in the train split.
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenFile {
    pub out_dir: Option<PathBuf>,
    pub categories_large: Option<usize>,
    pub categories_few: Option<usize>,
    pub samples_per_category: Option<usize>,
    pub dim: Option<usize>,
    pub center_scale: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub normalize: Option<bool>,
    pub shots: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenConfig {
    pub out_dir: PathBuf,
    pub categories_large: usize,
    pub categories_few: usize,
    pub samples_per_category: usize,
    pub dim: usize,
    pub center_scale: f64,
    pub noise_sigma: f64,
    pub normalize: bool,
    pub shots: usize,
    pub seed: u64,
}

pub fn resolve_gen(args: &GenArgs) -> Result<GenConfig, CmdError> {
    let file = load_file_config(args.config.as_deref())?.gen;
    let cfg = GenConfig {
        out_dir: pick!(args, file, out_dir, PathBuf::from(DEFAULT_OUT_DIR)),
        categories_large: pick!(args, file, categories_large, 20),
        categories_few: pick!(args, file, categories_few, 5),
        samples_per_category: pick!(args, file, samples_per_category, 30),
        dim: pick!(args, file, dim, 16),
        center_scale: pick!(args, file, center_scale, 1.0),
        noise_sigma: pick!(args, file, noise_sigma, 0.05),
        normalize: pick!(args, file, normalize, true),
        shots: pick!(args, file, shots, 1),
        seed: pick!(args, file, seed, DEFAULT_SEED),
    };
    echo("gen", &cfg);
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Activation store to train on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub data_format: Option<FormatArg>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batches_per_epoch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub p_mean: Option<f64>,
    /// Squared-Frobenius regularizer weight in the loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Noise scale added to the identity for linear initialization.
    #[arg(long)]
    pub init_noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Final checkpoint path (default `<out-dir>/phi.phim`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Train log path (default `<out-dir>/train_log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write an intermediate checkpoint every N epochs (0 = never).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub out_dir: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub data_format: Option<FormatArg>,
    pub variant: Option<VariantArg>,
    pub epochs: Option<usize>,
    pub batches_per_epoch: Option<usize>,
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub p_mean: Option<f64>,
    pub lambda: Option<f64>,
    pub mode: Option<ModeArg>,
    pub init_noise: Option<f64>,
    pub seed: Option<u64>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainCmdConfig {
    pub out_dir: PathBuf,
    pub data: PathBuf,
    pub data_format: FormatArg,
    pub variant: VariantArg,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub p_mean: f64,
    pub lambda: f64,
    pub mode: ModeArg,
    /// The p_mean the sampler actually uses (1.0 in mean-only mode).
    pub effective_p_mean: f64,
    pub init_noise: f64,
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub checkpoint_every: usize,
}

pub fn resolve_train(args: &TrainArgs) -> Result<TrainCmdConfig, CmdError> {
    let file = load_file_config(args.config.as_deref())?.train;
    let out_dir = pick!(args, file, out_dir, PathBuf::from(DEFAULT_OUT_DIR));
    let mode = pick!(args, file, mode, ModeArg::Mixed);
    let p_mean = pick!(args, file, p_mean, 0.9);
    let cfg = TrainCmdConfig {
        data: pick_required!(args, file, data, "--data"),
        data_format: pick!(args, file, data_format, FormatArg::Binary),
        variant: pick!(args, file, variant, VariantArg::Linear),
        epochs: pick!(args, file, epochs, 300),
        batches_per_epoch: pick!(args, file, batches_per_epoch, 250),
        lr: pick!(args, file, lr, 0.001),
        momentum: pick!(args, file, momentum, 0.9),
        weight_decay: pick!(args, file, weight_decay, 0.0005),
        p_mean,
        lambda: pick!(args, file, lambda, 1e-4),
        mode,
        effective_p_mean: match mode {
            ModeArg::Mixed => p_mean,
            ModeArg::MeanOnly => 1.0,
        },
        init_noise: pick!(args, file, init_noise, 1e-3),
        seed: pick!(args, file, seed, DEFAULT_SEED),
        checkpoint: pick!(args, file, checkpoint, out_dir.join("phi.phim")),
        log: pick!(args, file, log, out_dir.join("train_log.csv")),
        checkpoint_every: pick!(args, file, checkpoint_every, 0),
        out_dir,
    };
    echo("train", &cfg);
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub large: Option<PathBuf>,
    #[arg(long)]
    pub few_train: Option<PathBuf>,
    #[arg(long)]
    pub few_test: Option<PathBuf>,
    /// Use only the first N reference samples per few-shot category.
    #[arg(long)]
    pub shots: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFile {
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub large: Option<PathBuf>,
    pub few_train: Option<PathBuf>,
    pub few_test: Option<PathBuf>,
    pub shots: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalConfig {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub large: PathBuf,
    pub few_train: PathBuf,
    pub few_test: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
}

pub fn resolve_eval(args: &EvalArgs) -> Result<EvalConfig, CmdError> {
    let file = load_file_config(args.config.as_deref())?.eval;
    let cfg = EvalConfig {
        out_dir: pick!(args, file, out_dir, PathBuf::from(DEFAULT_OUT_DIR)),
        checkpoint: pick_required!(args, file, checkpoint, "--checkpoint"),
        large: pick_required!(args, file, large, "--large"),
        few_train: pick_required!(args, file, few_train, "--few-train"),
        few_test: pick_required!(args, file, few_test, "--few-test"),
        shots: pick_optional!(args, file, shots),
    };
    echo("eval", &cfg);
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// episodes
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EpisodesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Store the episodes sample categories and queries from.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n_way: Option<usize>,
    #[arg(long)]
    pub k_shot: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for episode evaluation (1 = serial).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodesFile {
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub n_way: Option<usize>,
    pub k_shot: Option<usize>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodesConfig {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub n_way: usize,
    pub k_shot: usize,
    pub episodes: usize,
    pub seed: u64,
    pub threads: usize,
}

pub fn resolve_episodes(args: &EpisodesArgs) -> Result<EpisodesConfig, CmdError> {
    let file = load_file_config(args.config.as_deref())?.episodes;
    let cfg = EpisodesConfig {
        out_dir: pick!(args, file, out_dir, PathBuf::from(DEFAULT_OUT_DIR)),
        checkpoint: pick_required!(args, file, checkpoint, "--checkpoint"),
        data: pick_required!(args, file, data, "--data"),
        n_way: pick!(args, file, n_way, 5),
        k_shot: pick!(args, file, k_shot, 1),
        episodes: pick!(args, file, episodes, 600),
        seed: pick!(args, file, seed, DEFAULT_SEED),
        threads: pick!(args, file, threads, 1),
    };
    echo("episodes", &cfg);
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Linear checkpoint to analyze.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Reference linear checkpoint for top-k order similarity.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Comma-separated k values for order similarity (default: 1..=dim).
    #[arg(long, value_delimiter = ',')]
    pub os_k: Option<Vec<usize>>,
    /// Heatmap submatrix size (clamped to the model dimension).
    #[arg(long)]
    pub submatrix: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeFile {
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub os_k: Option<Vec<usize>>,
    pub submatrix: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeConfig {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub os_k: Option<Vec<usize>>,
    pub submatrix: usize,
}

pub fn resolve_analyze(args: &AnalyzeArgs) -> Result<AnalyzeConfig, CmdError> {
    let file = load_file_config(args.config.as_deref())?.analyze;
    let cfg = AnalyzeConfig {
        out_dir: pick!(args, file, out_dir, PathBuf::from(DEFAULT_OUT_DIR)),
        checkpoint: pick_required!(args, file, checkpoint, "--checkpoint"),
        reference: pick_optional!(args, file, reference),
        os_k: pick_optional!(args, file, os_k),
        submatrix: pick!(args, file, submatrix, 256),
    };
    echo("analyze", &cfg);
    Ok(cfg)
}
