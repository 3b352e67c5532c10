//! Error type shared by all core operations.

use alloc::string::String;

use crate::data::CategoryId;

/// Errors produced by dataset handling, model evaluation and training.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown category id {0}")]
    UnknownCategory(CategoryId),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("category {category} has {available} samples, {requested} shots requested (need more than {requested})")]
    InsufficientSamples {
        category: CategoryId,
        available: usize,
        requested: usize,
    },

    #[error("statistic set and training batch cover different category sets")]
    CategoryMismatch,

    #[error("degenerate predictor output: pre-normalization norm {norm:e} below 1e-12")]
    DegenerateOutput { norm: f64 },

    #[error("non-finite loss {loss} at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, loss: f64 },

    #[error("top-{k} requested but only {candidates} candidate categories")]
    KOutOfRange { k: usize, candidates: usize },

    #[error("zero-norm vector rejected in cosine scoring")]
    ZeroNormVector,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
