//! The parameter predictor `phi` and the episodic classification loss.
//!
//! Two architectures, both mapping a dim-vector statistic to a dim-vector
//! classifier weight:
//!
//! - linear: `w = W s`, a bare matrix with no bias;
//! - two-layer: `relu(W1 s + b1)` into `W2 h + b2`, output rescaled to unit
//!   Euclidean norm.
//!
//! Parameters live in one flat `f64` buffer (row-major matrices, declared
//! field order), which keeps gradients, optimizer state, serialization and
//! finite-difference checks all trivially aligned.
//!
//! The loss for one training batch couples every category's predicted
//! weight through a softmax over the statistic set: for each training pair
//! `(y, a)` the per-sample term is `-z_y + logsumexp_c(z_c)` with logits
//! `z_c = phi(s_c) . a`, plus `lambda` times the squared Frobenius norm of
//! all parameters. [`batch_gradients`] computes the exact analytic gradient
//! of that quantity, chaining through the ReLU mask and the
//! unit-normalization Jacobian `(I - u u^T / ||u||^2) / ||u||` for the
//! two-layer variant.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::data::{CategoryId, StatisticSet};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{self, MatView};

/// Pre-normalization output norms below this are reported as degenerate.
pub const NORM_EPS: f64 = 1e-12;

/// Default noise scale added to the identity when initializing a linear
/// model.
pub const DEFAULT_LINEAR_INIT_NOISE: f64 = 1e-3;

/// Predictor architecture tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiVariant {
    Linear,
    TwoLayer,
}

impl PhiVariant {
    /// Flat parameter count at dimensionality `dim`.
    pub fn param_count(&self, dim: usize) -> usize {
        match self {
            PhiVariant::Linear => dim * dim,
            PhiVariant::TwoLayer => 2 * dim * dim + 2 * dim,
        }
    }
}

/// A parameter predictor with its flat parameter buffer.
///
/// Layout: linear holds `[W]`; two-layer holds `[W1, b1, W2, b2]`, matrices
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiModel {
    dim: usize,
    variant: PhiVariant,
    params: Vec<f64>,
}

impl PhiModel {
    /// Linear model from a row-major `dim x dim` weight matrix.
    pub fn linear(dim: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                got: w.len(),
            });
        }
        Ok(PhiModel {
            dim,
            variant: PhiVariant::Linear,
            params: w,
        })
    }

    /// Linear model fixed to the identity matrix.
    pub fn linear_identity(dim: usize) -> Self {
        PhiModel {
            dim,
            variant: PhiVariant::Linear,
            params: linalg::identity(dim),
        }
    }

    /// Identity plus elementwise Gaussian noise of scale `noise_scale`.
    pub fn init_linear(dim: usize, noise_scale: f64, rng: &mut impl Rng) -> Self {
        let mut w = linalg::identity(dim);
        for x in w.iter_mut() {
            *x += noise_scale * rng.sample::<f64, _>(StandardNormal);
        }
        PhiModel {
            dim,
            variant: PhiVariant::Linear,
            params: w,
        }
    }

    /// Two-layer model from explicit parameters.
    pub fn two_layer(
        dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        for (len, expected) in [
            (w1.len(), dim * dim),
            (b1.len(), dim),
            (w2.len(), dim * dim),
            (b2.len(), dim),
        ] {
            if len != expected {
                return Err(Error::DimMismatch {
                    expected,
                    got: len,
                });
            }
        }
        let mut params = w1;
        params.extend_from_slice(&b1);
        params.extend_from_slice(&w2);
        params.extend_from_slice(&b2);
        Ok(PhiModel {
            dim,
            variant: PhiVariant::TwoLayer,
            params,
        })
    }

    /// Two-layer model with Gaussian weights of scale `weight_scale` and
    /// zero biases. [`he_scale`] gives the usual default.
    pub fn init_two_layer(dim: usize, weight_scale: f64, rng: &mut impl Rng) -> Self {
        let d2 = dim * dim;
        let mut params = vec![0.0; 2 * d2 + 2 * dim];
        let w2_start = d2 + dim;
        for p in params[..d2].iter_mut() {
            *p = weight_scale * rng.sample::<f64, _>(StandardNormal);
        }
        for p in params[w2_start..w2_start + d2].iter_mut() {
            *p = weight_scale * rng.sample::<f64, _>(StandardNormal);
        }
        PhiModel {
            dim,
            variant: PhiVariant::TwoLayer,
            params,
        }
    }

    /// Rebuilds a model from a flat parameter buffer in declared order.
    pub fn from_params(dim: usize, variant: PhiVariant, params: Vec<f64>) -> Result<Self> {
        if params.len() != variant.param_count(dim) {
            return Err(Error::DimMismatch {
                expected: variant.param_count(dim),
                got: params.len(),
            });
        }
        Ok(PhiModel {
            dim,
            variant,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> PhiVariant {
        self.variant
    }

    /// Flat parameters in declared field order.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// The weight matrix of a linear model; `None` for two-layer models.
    pub fn weight_matrix(&self) -> Option<MatView<'_>> {
        match self.variant {
            PhiVariant::Linear => Some(MatView::new(self.dim, self.dim, &self.params)),
            PhiVariant::TwoLayer => None,
        }
    }

    /// Squared Frobenius norm over all parameters (matrices and biases).
    pub fn squared_frobenius(&self) -> f64 {
        self.params.iter().map(|x| x * x).sum()
    }

    /// SHA-256 over variant tag, dimension and little-endian parameter
    /// bytes; identical models produce identical digests.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        let tag: u8 = match self.variant {
            PhiVariant::Linear => 1,
            PhiVariant::TwoLayer => 2,
        };
        hasher.update([tag]);
        hasher.update((self.dim as u32).to_le_bytes());
        for p in &self.params {
            hasher.update(p.to_le_bytes());
        }
        hasher.finalize().into()
    }

    /// Predicted classifier weight for statistic `s`.
    ///
    /// Linear: `W s`. Two-layer: `relu(W1 s + b1)` into `W2 h + b2`,
    /// rescaled to unit norm. A two-layer pre-normalization norm below
    /// [`NORM_EPS`] is an error (dead initialization or pathological
    /// input).
    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.forward_cached(s).map(|(out, _)| out)
    }

    /// Logit of activation `a` against the weight predicted from `s`.
    pub fn score(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        if a.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: a.len(),
            });
        }
        let w = self.forward(s)?;
        Ok(linalg::dot(&w, a))
    }

    fn check_input(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: s.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping the intermediates backprop needs.
    fn forward_cached(&self, s: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(s)?;
        let dim = self.dim;
        match self.variant {
            PhiVariant::Linear => {
                let mut out = vec![0.0; dim];
                linalg::matvec(&self.params, dim, dim, s, &mut out);
                Ok((out, ForwardCache::Linear))
            }
            PhiVariant::TwoLayer => {
                let (w1, b1, w2, b2) = self.two_layer_parts();
                let mut pre1 = vec![0.0; dim];
                linalg::matvec(w1, dim, dim, s, &mut pre1);
                for (p, b) in pre1.iter_mut().zip(b1.iter()) {
                    *p += b;
                }
                let hidden: Vec<f64> = pre1.iter().map(|&x| x.max(0.0)).collect();
                let mut u = vec![0.0; dim];
                linalg::matvec(w2, dim, dim, &hidden, &mut u);
                for (ui, b) in u.iter_mut().zip(b2.iter()) {
                    *ui += b;
                }
                let norm = linalg::norm2(&u);
                if norm < NORM_EPS {
                    return Err(Error::DegenerateOutput { norm });
                }
                let out: Vec<f64> = u.iter().map(|&x| x / norm).collect();
                Ok((
                    out,
                    ForwardCache::TwoLayer {
                        pre1,
                        hidden,
                        norm,
                    },
                ))
            }
        }
    }

    fn two_layer_parts(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let d = self.dim;
        let d2 = d * d;
        (
            &self.params[..d2],
            &self.params[d2..d2 + d],
            &self.params[d2 + d..2 * d2 + d],
            &self.params[2 * d2 + d..],
        )
    }
}

enum ForwardCache {
    Linear,
    TwoLayer {
        pre1: Vec<f64>,
        hidden: Vec<f64>,
        norm: f64,
    },
}

/// Gradient buffer shaped exactly like the owning model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiGrads {
    dim: usize,
    variant: PhiVariant,
    params: Vec<f64>,
}

impl PhiGrads {
    pub fn zeros_like(model: &PhiModel) -> Self {
        PhiGrads {
            dim: model.dim(),
            variant: model.variant(),
            params: vec![0.0; model.param_count()],
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn matches(&self, model: &PhiModel) -> bool {
        self.dim == model.dim()
            && self.variant == model.variant()
            && self.params.len() == model.param_count()
    }
}

/// Regularizer choice; squared Frobenius over all parameters is the only
/// supported form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularizer {
    #[default]
    FrobeniusSquared,
}

/// Loss configuration: regularizer weight and form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub regularizer: Regularizer,
}

impl LossConfig {
    pub fn new(lambda: f64) -> Self {
        LossConfig {
            lambda,
            regularizer: Regularizer::FrobeniusSquared,
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        // Weight-decay-scale default; override per run.
        LossConfig::new(1e-4)
    }
}

/// Numerically stable `-z_y + logsumexp(z)`; non-negative by construction.
fn per_sample_loss(logits: &[f64], true_idx: usize) -> f64 {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let sum_exp: f64 = logits.iter().map(|&z| fmath::exp(z - m)).sum();
    fmath::ln(sum_exp) + (m - logits[true_idx])
}

/// Softmax over logits reusing the shifted exponentials.
fn softmax_from_logits(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits.iter()) {
        *o = fmath::exp(z - m);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Episodic classification loss for one batch: the sum over `(y, a)` of
/// `-phi(s_y).a + logsumexp_c(phi(s_c).a)` plus `lambda * ||phi||_F^2`.
pub fn batch_loss(
    phi: &PhiModel,
    stats: &StatisticSet,
    batch: &BTreeMap<CategoryId, Vec<f64>>,
    cfg: &LossConfig,
) -> Result<f64> {
    batch_terms(phi, stats, batch, cfg, None)
}

/// Loss plus its exact gradient with respect to every model parameter.
/// The loss value is computed by the same code path as [`batch_loss`] and
/// matches it bit for bit.
pub fn batch_gradients(
    phi: &PhiModel,
    stats: &StatisticSet,
    batch: &BTreeMap<CategoryId, Vec<f64>>,
    cfg: &LossConfig,
) -> Result<(f64, PhiGrads)> {
    let mut grads = PhiGrads::zeros_like(phi);
    let loss = batch_terms(phi, stats, batch, cfg, Some(&mut grads))?;
    Ok((loss, grads))
}

fn batch_terms(
    phi: &PhiModel,
    stats: &StatisticSet,
    batch: &BTreeMap<CategoryId, Vec<f64>>,
    cfg: &LossConfig,
    mut grads: Option<&mut PhiGrads>,
) -> Result<f64> {
    if stats.dim() != phi.dim() {
        return Err(Error::DimMismatch {
            expected: phi.dim(),
            got: stats.dim(),
        });
    }
    let categories = stats.categories();
    if categories.len() < 2 {
        return Err(Error::InvalidArgument(
            "loss needs at least 2 categories".into(),
        ));
    }
    if batch.len() != categories.len()
        || !categories.iter().all(|c| batch.contains_key(c))
    {
        return Err(Error::CategoryMismatch);
    }
    let dim = phi.dim();
    for a in batch.values() {
        if a.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: a.len(),
            });
        }
    }

    // Predicted weight (and backprop cache) per category, in id order.
    let n_cats = categories.len();
    let mut weights = Vec::with_capacity(n_cats);
    let mut caches = Vec::with_capacity(n_cats);
    for &c in &categories {
        let (w, cache) = phi.forward_cached(stats.get(c)?)?;
        weights.push(w);
        caches.push(cache);
    }

    // dL/dw_c accumulated over all samples; only allocated when needed.
    let mut weight_grads: Vec<Vec<f64>> = if grads.is_some() {
        vec![vec![0.0; dim]; n_cats]
    } else {
        Vec::new()
    };

    let mut loss = 0.0;
    let mut logits = vec![0.0; n_cats];
    let mut probs = vec![0.0; n_cats];
    for (&y, a) in batch.iter() {
        for (z, w) in logits.iter_mut().zip(weights.iter()) {
            *z = linalg::dot(w, a);
        }
        let true_idx = categories
            .binary_search(&y)
            .expect("batch categories validated against stats");
        loss += per_sample_loss(&logits, true_idx);

        if grads.is_some() {
            softmax_from_logits(&logits, &mut probs);
            for (idx, g) in weight_grads.iter_mut().enumerate() {
                let coeff = probs[idx] - if idx == true_idx { 1.0 } else { 0.0 };
                linalg::axpy(coeff, a, g);
            }
        }
    }

    // Chain dL/dw_c back through the predictor.
    if let Some(grads) = grads.as_deref_mut() {
        for (idx, &c) in categories.iter().enumerate() {
            let s = stats.get(c)?;
            backprop_one(phi, s, &weights[idx], &caches[idx], &weight_grads[idx], grads);
        }
    }

    // lambda * ||phi||_F^2 over matrices and biases alike.
    if cfg.lambda != 0.0 {
        loss += cfg.lambda * phi.squared_frobenius();
        if let Some(grads) = grads {
            for (g, &p) in grads.params_mut().iter_mut().zip(phi.params().iter()) {
                *g += 2.0 * cfg.lambda * p;
            }
        }
    }

    Ok(loss)
}

/// Accumulates the gradient contribution of one category's predicted
/// weight: `g_w` is dL/dw for the weight produced from statistic `s`.
fn backprop_one(
    phi: &PhiModel,
    s: &[f64],
    w_out: &[f64],
    cache: &ForwardCache,
    g_w: &[f64],
    grads: &mut PhiGrads,
) {
    let dim = phi.dim();
    match cache {
        ForwardCache::Linear => {
            // w = W s  =>  dW += g_w s^T
            linalg::outer_acc(grads.params_mut(), dim, dim, 1.0, g_w, s);
        }
        ForwardCache::TwoLayer {
            pre1,
            hidden,
            norm,
        } => {
            // w = u / ||u||  =>  du = (g - (g . w) w) / ||u||
            let g_dot_w = linalg::dot(g_w, w_out);
            let du: Vec<f64> = g_w
                .iter()
                .zip(w_out.iter())
                .map(|(&g, &wi)| (g - g_dot_w * wi) / norm)
                .collect();

            let d = dim;
            let d2 = d * d;
            let (w2_start, b1_start, b2_start) = (d2 + d, d2, 2 * d2 + d);

            // u = W2 h + b2
            {
                let w2_grad = &mut grads.params_mut()[w2_start..w2_start + d2];
                linalg::outer_acc(w2_grad, d, d, 1.0, &du, hidden);
            }
            {
                let b2_grad = &mut grads.params_mut()[b2_start..b2_start + d];
                linalg::axpy(1.0, &du, b2_grad);
            }

            // h = relu(W1 s + b1)
            let w2 = &phi.params()[w2_start..w2_start + d2];
            let mut dh = vec![0.0; d];
            linalg::matvec_t(w2, d, d, &du, &mut dh);
            let dpre: Vec<f64> = dh
                .iter()
                .zip(pre1.iter())
                .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
                .collect();
            {
                let w1_grad = &mut grads.params_mut()[..d2];
                linalg::outer_acc(w1_grad, d, d, 1.0, &dpre, s);
            }
            {
                let b1_grad = &mut grads.params_mut()[b1_start..b1_start + d];
                linalg::axpy(1.0, &dpre, b1_grad);
            }
        }
    }
}

/// He-style weight scale `sqrt(2 / dim)` for two-layer initialization.
pub fn he_scale(dim: usize) -> f64 {
    fmath::sqrt(2.0 / dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StatisticSet;
    use alloc::collections::BTreeMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats_from(dim: usize, entries: &[(CategoryId, Vec<f64>)]) -> StatisticSet {
        StatisticSet::from_means(dim, entries.iter().cloned().collect()).unwrap()
    }

    #[test]
    fn linear_identity_forward_is_input() {
        let phi = PhiModel::linear_identity(2);
        assert_eq!(phi.forward(&[0.6, 0.8]).unwrap(), vec![0.6, 0.8]);
    }

    #[test]
    fn linear_scaling_forward() {
        let phi = PhiModel::linear(2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(phi.forward(&[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn two_layer_output_is_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = PhiModel::init_two_layer(6, he_scale(6), &mut rng);
        let s: Vec<f64> = (0..6).map(|i| 0.3 * (i as f64 + 1.0)).collect();
        let out = phi.forward(&s).unwrap();
        assert!((linalg::norm2(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_layer_degenerate_norm_is_reported() {
        let d = 3;
        let phi = PhiModel::two_layer(
            d,
            vec![0.0; d * d],
            vec![0.0; d],
            vec![0.0; d * d],
            vec![0.0; d],
        )
        .unwrap();
        assert!(matches!(
            phi.forward(&[1.0, 2.0, 3.0]),
            Err(Error::DegenerateOutput { .. })
        ));
    }

    #[test]
    fn score_is_cosine_for_identity_on_unit_vectors() {
        let phi = PhiModel::linear_identity(2);
        let s = [0.6, 0.8];
        let a = [1.0, 0.0];
        let score = phi.score(&s, &a).unwrap();
        let cos = linalg::cosine(&s, &a).unwrap();
        assert!((score - cos).abs() < 1e-15);
        // Self-similarity of a unit vector is exactly 1.
        assert_eq!(phi.score(&s, &s).unwrap(), 1.0);
        // Orthogonal activation scores zero.
        assert_eq!(phi.score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_logits_give_log_c() {
        // Zero weights force all logits to zero: per-sample loss is ln |C|.
        let dim = 3;
        let phi = PhiModel::linear(dim, vec![0.0; dim * dim]).unwrap();
        let stats = stats_from(
            dim,
            &[
                (0, vec![1.0, 0.0, 0.0]),
                (1, vec![0.0, 1.0, 0.0]),
                (2, vec![0.0, 0.0, 1.0]),
            ],
        );
        let batch: BTreeMap<CategoryId, Vec<f64>> = [
            (0, vec![0.5, 0.1, 0.0]),
            (1, vec![0.0, 0.7, 0.0]),
            (2, vec![0.2, 0.0, 0.9]),
        ]
        .into_iter()
        .collect();
        let loss = batch_loss(&phi, &stats, &batch, &LossConfig::new(0.0)).unwrap();
        assert_eq!(loss, 3.0 * (3.0f64).ln());
    }

    #[test]
    fn two_category_tie_is_log_two() {
        let dim = 2;
        let phi = PhiModel::linear_identity(dim);
        // Both statistics identical: scores tie for every sample.
        let s = vec![0.3, 0.4];
        let stats = stats_from(dim, &[(0, s.clone()), (1, s.clone())]);
        let batch: BTreeMap<CategoryId, Vec<f64>> =
            [(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])].into_iter().collect();
        let loss = batch_loss(&phi, &stats, &batch, &LossConfig::new(0.0)).unwrap();
        assert!((loss - 2.0 * (2.0f64).ln()).abs() < 1e-15);
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // the oracle loops stay naive
    fn loss_matches_direct_summation_oracle() {
        // Independent re-evaluation: naive scores, naive logsumexp.
        let dim = 8;
        let n_cats = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi = PhiModel::init_linear(dim, 0.3, &mut rng);
        let mut stat_entries = Vec::new();
        let mut batch = BTreeMap::new();
        for c in 0..n_cats as CategoryId {
            let s: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let a: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            stat_entries.push((c, s));
            batch.insert(c, a);
        }
        let stats = stats_from(dim, &stat_entries);
        let lambda = 0.01;
        let loss = batch_loss(&phi, &stats, &batch, &LossConfig::new(lambda)).unwrap();

        let mut expected = 0.0;
        for (&y, a) in &batch {
            let mut z = Vec::new();
            for (c, s) in &stat_entries {
                let mut w = vec![0.0; dim];
                for i in 0..dim {
                    for j in 0..dim {
                        w[i] += phi.params()[i * dim + j] * s[j];
                    }
                }
                let mut score = 0.0;
                for i in 0..dim {
                    score += w[i] * a[i];
                }
                z.push((c, score));
            }
            let own = z.iter().find(|(c, _)| **c == y).unwrap().1;
            let sum: f64 = z.iter().map(|(_, s)| s.exp()).sum();
            expected += -own + sum.ln();
        }
        expected += lambda * phi.params().iter().map(|p| p * p).sum::<f64>();

        assert!(
            (loss - expected).abs() <= 1e-10 * expected.abs().max(1.0),
            "loss {loss} vs oracle {expected}"
        );
    }

    #[test]
    fn gradient_loss_is_bit_identical_to_batch_loss() {
        let dim = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for phi in [
            PhiModel::init_linear(dim, 0.2, &mut rng),
            PhiModel::init_two_layer(dim, he_scale(dim), &mut rng),
        ] {
            let mut entries = Vec::new();
            let mut batch = BTreeMap::new();
            for c in 0..4 as CategoryId {
                entries.push((
                    c,
                    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
                ));
                batch.insert(
                    c,
                    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
                );
            }
            let stats = stats_from(dim, &entries);
            let cfg = LossConfig::new(1e-3);
            let plain = batch_loss(&phi, &stats, &batch, &cfg).unwrap();
            let (with_grads, _) = batch_gradients(&phi, &stats, &batch, &cfg).unwrap();
            assert_eq!(plain.to_bits(), with_grads.to_bits());
        }
    }

    #[test]
    fn regularizer_only_gradient_is_two_lambda_theta() {
        // Identical statistics for both categories cancel the data term
        // exactly, leaving only the regularizer gradient.
        let dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for phi in [
            PhiModel::init_linear(dim, 0.5, &mut rng),
            PhiModel::init_two_layer(dim, he_scale(dim), &mut rng),
        ] {
            let s: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let stats = stats_from(dim, &[(0, s.clone()), (1, s.clone())]);
            let a0: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let a1: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let batch: BTreeMap<CategoryId, Vec<f64>> =
                [(0, a0), (1, a1)].into_iter().collect();
            let lambda = 0.05;
            let (_, grads) =
                batch_gradients(&phi, &stats, &batch, &LossConfig::new(lambda)).unwrap();
            for (g, p) in grads.params().iter().zip(phi.params().iter()) {
                assert_eq!(*g, 2.0 * lambda * p);
            }
        }
    }

    #[test]
    fn per_sample_loss_is_shift_stable() {
        let logits = [1.3, -0.2, 4.1, 0.0, -2.5];
        let base = per_sample_loss(&logits, 2);
        for c in [-1000.0, -3.7, 0.9, 250.0] {
            let shifted: Vec<f64> = logits.iter().map(|z| z + c).collect();
            assert!((per_sample_loss(&shifted, 2) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn category_mismatch_is_rejected() {
        let dim = 2;
        let phi = PhiModel::linear_identity(dim);
        let stats = stats_from(dim, &[(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])]);
        let batch: BTreeMap<CategoryId, Vec<f64>> =
            [(0, vec![1.0, 0.0]), (2, vec![0.0, 1.0])].into_iter().collect();
        assert_eq!(
            batch_loss(&phi, &stats, &batch, &LossConfig::new(0.0)).unwrap_err(),
            Error::CategoryMismatch
        );
    }
}
