//! Classifier assembly and evaluation.
//!
//! The mixed strategy: a large-scale category gets a single weight
//! predicted from its mean activation (the expectation of its statistic
//! under the sampling mixture), while a few-shot category keeps one
//! predicted weight per reference activation and scores queries by the
//! maximal response. Adding categories is training-free — one predictor
//! forward pass per reference, no optimizer anywhere in the path.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ActivationStore, CategoryId, CategoryMeans};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg;
use crate::predictor::PhiModel;

/// Per-category classifier weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierEntry {
    /// One weight, predicted from the category mean.
    Single(Vec<f64>),
    /// One weight per reference activation; the category's score is the
    /// maximal response.
    MaxOver(Vec<Vec<f64>>),
}

/// A softmax classifier over predicted weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    dim: usize,
    entries: BTreeMap<CategoryId, ClassifierEntry>,
    predictor_forwards: usize,
}

/// Cost accounting for a classifier extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdaptStats {
    /// Predictor forward passes performed.
    pub predictor_forwards: usize,
    /// Optimizer steps performed; structurally zero (extension only takes
    /// `&PhiModel`), recorded so callers can assert the claim.
    pub optimizer_steps: usize,
}

impl Classifier {
    pub fn new(dim: usize) -> Self {
        Classifier {
            dim,
            entries: BTreeMap::new(),
            predictor_forwards: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn categories(&self) -> Vec<CategoryId> {
        self.entries.keys().copied().collect()
    }

    pub fn entry(&self, category: CategoryId) -> Option<&ClassifierEntry> {
        self.entries.get(&category)
    }

    /// Total predictor forward passes spent building this classifier.
    pub fn predictor_forwards(&self) -> usize {
        self.predictor_forwards
    }

    /// Registers a large-scale category: one forward pass on its mean (or
    /// any fixed statistic). Existing entries are left untouched.
    pub fn add_single(
        &mut self,
        phi: &PhiModel,
        category: CategoryId,
        statistic: &[f64],
    ) -> Result<AdaptStats> {
        self.check_phi(phi)?;
        let w = phi.forward(statistic)?;
        self.entries.insert(category, ClassifierEntry::Single(w));
        self.predictor_forwards += 1;
        Ok(AdaptStats {
            predictor_forwards: 1,
            optimizer_steps: 0,
        })
    }

    /// Registers a few-shot category: one forward pass per reference
    /// activation, scored later by maximal response. Existing entries are
    /// left untouched.
    pub fn add_max_over<'a>(
        &mut self,
        phi: &PhiModel,
        category: CategoryId,
        references: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<AdaptStats> {
        self.check_phi(phi)?;
        let mut weights = Vec::new();
        for r in references {
            weights.push(phi.forward(r)?);
        }
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "max-over entry needs at least one reference".into(),
            ));
        }
        let forwards = weights.len();
        self.entries
            .insert(category, ClassifierEntry::MaxOver(weights));
        self.predictor_forwards += forwards;
        Ok(AdaptStats {
            predictor_forwards: forwards,
            optimizer_steps: 0,
        })
    }

    /// Builds an entry from precomputed weights (baselines, tests).
    pub fn insert_entry(&mut self, category: CategoryId, entry: ClassifierEntry) -> Result<()> {
        let ok = match &entry {
            ClassifierEntry::Single(w) => w.len() == self.dim,
            ClassifierEntry::MaxOver(ws) => {
                !ws.is_empty() && ws.iter().all(|w| w.len() == self.dim)
            }
        };
        if !ok {
            return Err(Error::InvalidArgument(
                "classifier entry has wrong dimension or no weights".into(),
            ));
        }
        self.entries.insert(category, entry);
        Ok(())
    }

    /// Pre-softmax logit per category: dot product for single entries,
    /// maximal dot product for max-over entries.
    pub fn scores(&self, a: &[f64]) -> Result<BTreeMap<CategoryId, f64>> {
        if a.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: a.len(),
            });
        }
        let mut scores = BTreeMap::new();
        for (&category, entry) in &self.entries {
            let score = match entry {
                ClassifierEntry::Single(w) => linalg::dot(w, a),
                ClassifierEntry::MaxOver(ws) => ws
                    .iter()
                    .map(|w| linalg::dot(w, a))
                    .fold(f64::NEG_INFINITY, f64::max),
            };
            scores.insert(category, score);
        }
        Ok(scores)
    }

    fn check_phi(&self, phi: &PhiModel) -> Result<()> {
        if phi.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: phi.dim(),
            });
        }
        Ok(())
    }
}

/// Assembles the mixed classifier: single mean-predicted weights for every
/// category in `means_large`, max-over weight sets for every category in
/// `few_train`.
pub fn build_classifier(
    phi: &PhiModel,
    means_large: &CategoryMeans,
    few_train: &ActivationStore,
) -> Result<Classifier> {
    if !means_large.is_empty() && means_large.dim() != phi.dim() {
        return Err(Error::DimMismatch {
            expected: phi.dim(),
            got: means_large.dim(),
        });
    }
    if !few_train.is_empty() && few_train.dim() != phi.dim() {
        return Err(Error::DimMismatch {
            expected: phi.dim(),
            got: few_train.dim(),
        });
    }
    let mut classifier = Classifier::new(phi.dim());
    for (category, mean) in means_large.iter() {
        classifier.add_single(phi, category, mean)?;
    }
    register_few_shot(&mut classifier, phi, few_train)?;
    Ok(classifier)
}

/// Extends a classifier with every category of `few_train` as a max-over
/// entry, returning the adaptation cost. Existing entries are never
/// recomputed.
pub fn register_few_shot(
    classifier: &mut Classifier,
    phi: &PhiModel,
    few_train: &ActivationStore,
) -> Result<AdaptStats> {
    let mut total = AdaptStats::default();
    for category in few_train.categories() {
        let refs: Vec<&[f64]> = few_train.category_vectors(category)?.collect();
        let stats = classifier.add_max_over(phi, category, refs)?;
        total.predictor_forwards += stats.predictor_forwards;
        total.optimizer_steps += stats.optimizer_steps;
    }
    Ok(total)
}

/// Softmax with max subtraction; probabilities sum to 1.
pub fn softmax_probs(scores: &BTreeMap<CategoryId, f64>) -> BTreeMap<CategoryId, f64> {
    let m = scores
        .values()
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    let mut sum = 0.0;
    let mut exps = BTreeMap::new();
    for (&c, &z) in scores {
        let e = fmath::exp(z - m);
        exps.insert(c, e);
        sum += e;
    }
    for e in exps.values_mut() {
        *e /= sum;
    }
    exps
}

/// Correct/total counts for one metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub count: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.correct as f64 / self.count as f64
        }
    }
}

/// One labeled row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEntry {
    pub label: String,
    pub top1: Accuracy,
    pub top5: Accuracy,
}

/// Top-1/top-5 accuracies per split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
}

/// Counts a sample as correct when its true category is among the `k`
/// highest-scoring candidates; ties break by ascending category id.
/// `restrict`, when given, limits both the candidate categories and the
/// test samples.
pub fn top_k_accuracy(
    classifier: &Classifier,
    test: &ActivationStore,
    k: usize,
    restrict: Option<&BTreeSet<CategoryId>>,
) -> Result<Accuracy> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let candidates: Vec<CategoryId> = match restrict {
        Some(set) => classifier
            .categories()
            .into_iter()
            .filter(|c| set.contains(c))
            .collect(),
        None => classifier.categories(),
    };
    if k > candidates.len() {
        return Err(Error::KOutOfRange {
            k,
            candidates: candidates.len(),
        });
    }

    let mut correct = 0usize;
    let mut count = 0usize;
    for (category, a) in test.samples() {
        if let Some(set) = restrict {
            if !set.contains(category) {
                continue;
            }
        }
        let scores = classifier.scores(a)?;
        // A sample whose true category is not a candidate counts, and can
        // never be correct.
        if let Some(&true_score) = scores.get(category) {
            // Rank = number of candidates strictly ahead under
            // (score desc, id asc) ordering.
            let ahead = candidates
                .iter()
                .filter(|&&c| {
                    let s = scores[&c];
                    s > true_score || (s == true_score && c < *category)
                })
                .count();
            if ahead < k {
                correct += 1;
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument(
            "no test samples match the evaluation".into(),
        ));
    }
    Ok(Accuracy { correct, count })
}

/// N-way K-shot evaluation summary with a 95% confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub n_way: usize,
    pub k_shot: usize,
    pub n_episodes: usize,
    pub mean_accuracy: f64,
    /// `1.96 * sample std / sqrt(n_episodes)`; zero for fewer than two
    /// episodes.
    pub ci95: f64,
    pub accuracies: Vec<f64>,
}

/// Builds the report from per-episode accuracies (shared by serial and
/// parallel drivers so both reduce identically).
pub fn episode_report_from_accuracies(
    n_way: usize,
    k_shot: usize,
    accuracies: Vec<f64>,
) -> EpisodeReport {
    let n = accuracies.len();
    let mean = if n == 0 {
        0.0
    } else {
        accuracies.iter().sum::<f64>() / n as f64
    };
    let ci95 = if n < 2 {
        0.0
    } else {
        let var = accuracies
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        1.96 * fmath::sqrt(var) / fmath::sqrt(n as f64)
    };
    EpisodeReport {
        n_way,
        k_shot,
        n_episodes: n,
        mean_accuracy: mean,
        ci95,
        accuracies,
    }
}

/// One N-way K-shot episode with its own seed: sample `n_way` categories
/// without replacement, pick `k_shot` references per category, build a
/// max-over classifier from the predicted weights, and score top-1 on all
/// remaining samples of those categories.
pub fn run_episode(
    few_store: &ActivationStore,
    phi: &PhiModel,
    n_way: usize,
    k_shot: usize,
    episode_seed: u64,
) -> Result<f64> {
    let categories = few_store.categories();
    if n_way < 1 || categories.len() < n_way {
        return Err(Error::InvalidArgument(
            "store has fewer categories than n_way".into(),
        ));
    }
    if k_shot < 1 {
        return Err(Error::InvalidArgument("k_shot must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);

    let chosen_idx = rand::seq::index::sample(&mut rng, categories.len(), n_way);
    let mut chosen: Vec<CategoryId> = chosen_idx.iter().map(|i| categories[i]).collect();
    chosen.sort_unstable();

    let mut classifier = Classifier::new(few_store.dim());
    let mut reference_positions: BTreeSet<usize> = BTreeSet::new();
    for &category in &chosen {
        let positions = few_store.positions(category)?;
        if positions.len() <= k_shot {
            return Err(Error::InsufficientSamples {
                category,
                available: positions.len(),
                requested: k_shot,
            });
        }
        let picked = rand::seq::index::sample(&mut rng, positions.len(), k_shot);
        let mut refs = Vec::with_capacity(k_shot);
        for idx in picked.iter() {
            reference_positions.insert(positions[idx]);
            refs.push(few_store.vector(positions[idx]));
        }
        classifier.add_max_over(phi, category, refs)?;
    }

    let mut correct = 0usize;
    let mut count = 0usize;
    for &category in &chosen {
        for &pos in few_store.positions(category)? {
            if reference_positions.contains(&pos) {
                continue;
            }
            let scores = classifier.scores(few_store.vector(pos))?;
            let true_score = scores[&category];
            let ahead = scores
                .iter()
                .filter(|(&c, &s)| s > true_score || (s == true_score && c < category))
                .count();
            if ahead == 0 {
                correct += 1;
            }
            count += 1;
        }
    }
    Ok(correct as f64 / count as f64)
}

/// Runs `n_episodes` episodes with per-episode seeds `seed + index` and
/// aggregates mean accuracy and its 95% confidence interval.
pub fn run_episodes(
    few_store: &ActivationStore,
    phi: &PhiModel,
    n_way: usize,
    k_shot: usize,
    n_episodes: usize,
    seed: u64,
) -> Result<EpisodeReport> {
    if n_episodes < 1 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    let mut accuracies = Vec::with_capacity(n_episodes);
    for episode in 0..n_episodes {
        accuracies.push(run_episode(
            few_store,
            phi,
            n_way,
            k_shot,
            seed.wrapping_add(episode as u64),
        )?);
    }
    Ok(episode_report_from_accuracies(n_way, k_shot, accuracies))
}

/// Nearest-neighbor baseline: a category's score for a query is the best
/// cosine similarity over that category's reference samples; top-k follows
/// the same tie-breaking as [`top_k_accuracy`]. Zero-norm reference or
/// query vectors are rejected.
pub fn nn_cosine_baseline(
    reference: &ActivationStore,
    test: &ActivationStore,
    k: usize,
) -> Result<Accuracy> {
    if reference.dim() != test.dim() {
        return Err(Error::DimMismatch {
            expected: reference.dim(),
            got: test.dim(),
        });
    }
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let candidates = reference.categories();
    if k > candidates.len() {
        return Err(Error::KOutOfRange {
            k,
            candidates: candidates.len(),
        });
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("test store is empty".into()));
    }

    let mut correct = 0usize;
    let mut count = 0usize;
    for (true_category, a) in test.samples() {
        let mut scores: BTreeMap<CategoryId, f64> = BTreeMap::new();
        for &category in &candidates {
            let mut best = f64::NEG_INFINITY;
            for r in reference.category_vectors(category)? {
                let c = linalg::cosine(r, a).ok_or(Error::ZeroNormVector)?;
                best = best.max(c);
            }
            scores.insert(category, best);
        }
        if let Some(&true_score) = scores.get(true_category) {
            let ahead = scores
                .iter()
                .filter(|(&c, &s)| s > true_score || (s == true_score && c < *true_category))
                .count();
            if ahead < k {
                correct += 1;
            }
        }
        count += 1;
    }
    Ok(Accuracy { correct, count })
}
