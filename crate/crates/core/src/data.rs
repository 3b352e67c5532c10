//! Activation datasets: storage, category means, statistic sampling, the
//! synthetic generator and large/few splitting.
//!
//! A store keeps labeled activation vectors in insertion order plus a
//! per-category index. Sampling operations take an explicit RNG so callers
//! control determinism; everything iterates categories in ascending id
//! order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Dense non-negative category identifier. Generated datasets assign ids by
/// first appearance; loaded files carry their own.
pub type CategoryId = u32;

/// Labeled activation vectors with a per-category index.
///
/// Invariants (enforced at construction): every vector has length `dim`,
/// the index covers exactly the categories present, and every indexed
/// category has at least one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStore {
    dim: usize,
    samples: Vec<(CategoryId, Vec<f64>)>,
    category_index: BTreeMap<CategoryId, Vec<usize>>,
}

impl ActivationStore {
    /// Builds a store from `(category, vector)` pairs, preserving order.
    /// An empty sample list is allowed (it arises from degenerate splits).
    pub fn from_samples(dim: usize, samples: Vec<(CategoryId, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dim must be positive".into()));
        }
        let mut category_index: BTreeMap<CategoryId, Vec<usize>> = BTreeMap::new();
        for (pos, (cat, v)) in samples.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            category_index.entry(*cat).or_default().push(pos);
        }
        Ok(ActivationStore {
            dim,
            samples,
            category_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples in storage order.
    pub fn samples(&self) -> &[(CategoryId, Vec<f64>)] {
        &self.samples
    }

    /// Vector stored at `position`.
    pub fn vector(&self, position: usize) -> &[f64] {
        &self.samples[position].1
    }

    /// Distinct category ids in ascending order.
    pub fn categories(&self) -> Vec<CategoryId> {
        self.category_index.keys().copied().collect()
    }

    pub fn n_categories(&self) -> usize {
        self.category_index.len()
    }

    pub fn contains_category(&self, category: CategoryId) -> bool {
        self.category_index.contains_key(&category)
    }

    /// Storage positions of a category's samples.
    pub fn positions(&self, category: CategoryId) -> Result<&[usize]> {
        self.category_index
            .get(&category)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownCategory(category))
    }

    /// Iterates the vectors of one category in storage order.
    pub fn category_vectors(
        &self,
        category: CategoryId,
    ) -> Result<impl Iterator<Item = &[f64]> + '_> {
        let positions = self.positions(category)?;
        Ok(positions.iter().map(move |&p| self.vector(p)))
    }
}

/// Arithmetic mean activation per category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMeans {
    dim: usize,
    means: BTreeMap<CategoryId, Vec<f64>>,
}

impl CategoryMeans {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, category: CategoryId) -> Result<&[f64]> {
        self.means
            .get(&category)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownCategory(category))
    }

    pub fn iter(&self) -> impl Iterator<Item = (CategoryId, &[f64])> + '_ {
        self.means.iter().map(|(c, v)| (*c, v.as_slice()))
    }

    pub fn categories(&self) -> Vec<CategoryId> {
        self.means.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Mean activation of every category in the store.
pub fn compute_means(store: &ActivationStore) -> CategoryMeans {
    let mut means = BTreeMap::new();
    for category in store.categories() {
        let positions = store.positions(category).expect("indexed category");
        let mut acc = alloc::vec![0.0; store.dim()];
        for &p in positions {
            linalg::axpy(1.0, store.vector(p), &mut acc);
        }
        let inv = 1.0 / positions.len() as f64;
        for x in acc.iter_mut() {
            *x *= inv;
        }
        means.insert(category, acc);
    }
    CategoryMeans {
        dim: store.dim(),
        means,
    }
}

/// How one category's statistic was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// The category mean was used.
    Mean,
    /// The stored vector at this storage position was used.
    Sample(usize),
}

/// One statistic vector per category, redrawn each training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSet {
    dim: usize,
    stats: BTreeMap<CategoryId, Vec<f64>>,
    provenance: BTreeMap<CategoryId, Provenance>,
}

impl StatisticSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, category: CategoryId) -> Result<&[f64]> {
        self.stats
            .get(&category)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownCategory(category))
    }

    pub fn provenance(&self, category: CategoryId) -> Result<Provenance> {
        self.provenance
            .get(&category)
            .copied()
            .ok_or(Error::UnknownCategory(category))
    }

    pub fn iter(&self) -> impl Iterator<Item = (CategoryId, &[f64])> + '_ {
        self.stats.iter().map(|(c, v)| (*c, v.as_slice()))
    }

    pub fn categories(&self) -> Vec<CategoryId> {
        self.stats.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Builds a set directly from vectors, marking provenance as `Mean`.
    /// Intended for tests and for classifiers built from fixed statistics.
    pub fn from_means(dim: usize, stats: BTreeMap<CategoryId, Vec<f64>>) -> Result<Self> {
        for v in stats.values() {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        let provenance = stats.keys().map(|&c| (c, Provenance::Mean)).collect();
        Ok(StatisticSet {
            dim,
            stats,
            provenance,
        })
    }
}

/// Draws one statistic per listed category: the category mean with
/// probability `p_mean`, otherwise a uniformly sampled stored activation.
/// Draws happen in list order, one uniform variate per category plus one
/// index draw when the sample branch is taken.
pub fn sample_statistic_set(
    store: &ActivationStore,
    means: &CategoryMeans,
    categories: &[CategoryId],
    p_mean: f64,
    rng: &mut impl Rng,
) -> Result<StatisticSet> {
    if !(0.0..=1.0).contains(&p_mean) {
        return Err(Error::InvalidArgument(format!(
            "p_mean must lie in [0, 1], got {p_mean}"
        )));
    }
    let mut stats = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for &category in categories {
        let positions = store.positions(category)?;
        let use_mean = rng.random::<f64>() < p_mean;
        if use_mean {
            stats.insert(category, means.get(category)?.to_vec());
            provenance.insert(category, Provenance::Mean);
        } else {
            let position = positions[rng.random_range(0..positions.len())];
            stats.insert(category, store.vector(position).to_vec());
            provenance.insert(category, Provenance::Sample(position));
        }
    }
    Ok(StatisticSet {
        dim: store.dim(),
        stats,
        provenance,
    })
}

/// Draws exactly one activation per listed category, uniformly within the
/// category. Draw order follows the list.
pub fn sample_training_batch(
    store: &ActivationStore,
    categories: &[CategoryId],
    rng: &mut impl Rng,
) -> Result<BTreeMap<CategoryId, Vec<f64>>> {
    let mut batch = BTreeMap::new();
    for &category in categories {
        let positions = store.positions(category)?;
        let position = positions[rng.random_range(0..positions.len())];
        batch.insert(category, store.vector(position).to_vec());
    }
    Ok(batch)
}

/// Parameters of the synthetic Gaussian-cluster dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_categories: usize,
    pub samples_per_category: usize,
    pub dim: usize,
    /// Scale of the zero-mean isotropic Gaussian the cluster centers are
    /// drawn from.
    pub center_scale: f64,
    /// Isotropic noise scale added around each center.
    pub noise_sigma: f64,
    /// Rescale every sample to unit Euclidean norm after adding noise.
    pub normalize: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_categories < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_categories must be >= 2, got {}",
                self.n_categories
            )));
        }
        if self.samples_per_category < 1 {
            return Err(Error::InvalidArgument(
                "samples_per_category must be >= 1".into(),
            ));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "dim must be >= 2, got {}",
                self.dim
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generates the synthetic dataset: per category a Gaussian center, then
/// `samples_per_category` noisy copies (optionally unit-normalized).
/// Categories are `0..n_categories`; samples are stored grouped by category.
/// Fully reproducible from `spec.seed`: centers are drawn first, then
/// samples, all in category order.
pub fn gen_synthetic(
    spec: &SyntheticSpec,
) -> Result<(ActivationStore, BTreeMap<CategoryId, Vec<f64>>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut centers = BTreeMap::new();
    for category in 0..spec.n_categories as CategoryId {
        let center: Vec<f64> = (0..spec.dim)
            .map(|_| spec.center_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        centers.insert(category, center);
    }

    let mut samples = Vec::with_capacity(spec.n_categories * spec.samples_per_category);
    for category in 0..spec.n_categories as CategoryId {
        let center = &centers[&category];
        for _ in 0..spec.samples_per_category {
            let mut v: Vec<f64> = center
                .iter()
                .map(|&c| c + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            if spec.normalize {
                let n = linalg::norm2(&v);
                if n > 0.0 {
                    for x in v.iter_mut() {
                        *x /= n;
                    }
                }
            }
            samples.push((category, v));
        }
    }

    let store = ActivationStore::from_samples(spec.dim, samples)?;
    Ok((store, centers))
}

/// Result of [`split_store`]: disjoint large-scale and few-shot partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStores {
    pub large: ActivationStore,
    pub few_train: ActivationStore,
    pub few_test: ActivationStore,
}

/// Splits a store into a large-scale part (all samples of categories not
/// listed) and per-category few-shot reference/test parts. Each listed
/// category contributes exactly `shots` uniformly chosen reference samples
/// to `few_train`; the remainder goes to `few_test`. Relative storage order
/// is preserved in every output.
pub fn split_store(
    store: &ActivationStore,
    few_categories: &[CategoryId],
    shots: usize,
    rng: &mut impl Rng,
) -> Result<SplitStores> {
    if shots < 1 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let mut few_set = BTreeSet::new();
    for &category in few_categories {
        if !store.contains_category(category) {
            return Err(Error::UnknownCategory(category));
        }
        if !few_set.insert(category) {
            return Err(Error::InvalidArgument(format!(
                "duplicate few-shot category {category}"
            )));
        }
    }

    // Reference positions are drawn in the order the categories were given,
    // so the RNG stream is a function of the argument list.
    let mut train_positions: BTreeSet<usize> = BTreeSet::new();
    for &category in few_categories {
        let positions = store.positions(category)?;
        if positions.len() <= shots {
            return Err(Error::InsufficientSamples {
                category,
                available: positions.len(),
                requested: shots,
            });
        }
        let chosen = rand::seq::index::sample(rng, positions.len(), shots);
        for idx in chosen.iter() {
            train_positions.insert(positions[idx]);
        }
    }

    let mut large = Vec::new();
    let mut few_train = Vec::new();
    let mut few_test = Vec::new();
    for (pos, (category, v)) in store.samples().iter().enumerate() {
        if few_set.contains(category) {
            if train_positions.contains(&pos) {
                few_train.push((*category, v.clone()));
            } else {
                few_test.push((*category, v.clone()));
            }
        } else {
            large.push((*category, v.clone()));
        }
    }

    Ok(SplitStores {
        large: ActivationStore::from_samples(store.dim(), large)?,
        few_train: ActivationStore::from_samples(store.dim(), few_train)?,
        few_test: ActivationStore::from_samples(store.dim(), few_test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny_store() -> ActivationStore {
        ActivationStore::from_samples(
            2,
            vec![
                (0, vec![1.0, 0.0]),
                (1, vec![0.0, 1.0]),
                (0, vec![0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn store_indexes_categories() {
        let store = tiny_store();
        assert_eq!(store.dim(), 2);
        assert_eq!(store.categories(), vec![0, 1]);
        assert_eq!(store.positions(0).unwrap(), &[0, 2]);
        assert_eq!(store.positions(1).unwrap(), &[1]);
        assert!(matches!(
            store.positions(7),
            Err(Error::UnknownCategory(7))
        ));
    }

    #[test]
    fn store_rejects_ragged_vectors() {
        let err = ActivationStore::from_samples(2, vec![(0, vec![1.0, 0.0, 3.0])]).unwrap_err();
        assert_eq!(
            err,
            Error::DimMismatch {
                expected: 2,
                got: 3
            }
        );
    }

    #[test]
    fn means_single_sample_is_identity() {
        let store = ActivationStore::from_samples(2, vec![(3, vec![0.25, -1.5])]).unwrap();
        let means = compute_means(&store);
        assert_eq!(means.get(3).unwrap(), &[0.25, -1.5]);
    }

    #[test]
    fn means_two_point_average() {
        let store = tiny_store();
        let means = compute_means(&store);
        assert_eq!(means.get(0).unwrap(), &[0.5, 0.5]);
        assert_eq!(means.get(1).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn means_recover_centers_at_zero_noise() {
        let spec = SyntheticSpec {
            n_categories: 4,
            samples_per_category: 3,
            dim: 5,
            center_scale: 2.0,
            noise_sigma: 0.0,
            normalize: false,
            seed: 11,
        };
        let (store, centers) = gen_synthetic(&spec).unwrap();
        let means = compute_means(&store);
        for (category, center) in &centers {
            let mean = means.get(*category).unwrap();
            for (m, c) in mean.iter().zip(center.iter()) {
                assert!((m - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }
    }

    #[test]
    fn statistic_set_all_means_at_p_one() {
        let store = tiny_store();
        let means = compute_means(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = sample_statistic_set(&store, &means, &[0, 1], 1.0, &mut rng).unwrap();
        for category in [0, 1] {
            assert_eq!(set.provenance(category).unwrap(), Provenance::Mean);
            // Bit-equal to the mean, not merely close.
            assert_eq!(set.get(category).unwrap(), means.get(category).unwrap());
        }
    }

    #[test]
    fn statistic_set_single_sample_at_p_zero() {
        let store = tiny_store();
        let means = compute_means(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = sample_statistic_set(&store, &means, &[1], 0.0, &mut rng).unwrap();
        assert_eq!(set.provenance(1).unwrap(), Provenance::Sample(1));
        assert_eq!(set.get(1).unwrap(), store.vector(1));
    }

    #[test]
    fn statistic_set_mean_fraction_near_p() {
        let store = tiny_store();
        let means = compute_means(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut mean_draws = 0usize;
        let n = 10_000;
        for _ in 0..n {
            let set = sample_statistic_set(&store, &means, &[0], 0.9, &mut rng).unwrap();
            if set.provenance(0).unwrap() == Provenance::Mean {
                mean_draws += 1;
            }
        }
        let fraction = mean_draws as f64 / n as f64;
        // Binomial(10^4, 0.9): 0.88..0.92 is well beyond 6 sigma.
        assert!((0.88..=0.92).contains(&fraction), "fraction {fraction}");
    }

    #[test]
    fn statistic_set_rejects_bad_p_and_unknown_category() {
        let store = tiny_store();
        let means = compute_means(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_statistic_set(&store, &means, &[0], 1.5, &mut rng).is_err());
        assert!(matches!(
            sample_statistic_set(&store, &means, &[9], 0.5, &mut rng),
            Err(Error::UnknownCategory(9))
        ));
    }

    #[test]
    fn training_batch_covers_categories() {
        let store = tiny_store();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = sample_training_batch(&store, &[0, 1], &mut rng).unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(batch[&1], store.vector(1));
    }

    #[test]
    fn training_batch_is_uniform_within_category() {
        let store = ActivationStore::from_samples(
            1,
            vec![(0, vec![0.0]), (0, vec![1.0]), (0, vec![2.0]), (0, vec![3.0])],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            let batch = sample_training_batch(&store, &[0], &mut rng).unwrap();
            counts[batch[&0][0] as usize] += 1;
        }
        for &c in &counts {
            let f = c as f64 / n as f64;
            assert!((0.23..=0.27).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn synthetic_zero_noise_equals_center() {
        let spec = SyntheticSpec {
            n_categories: 3,
            samples_per_category: 2,
            dim: 4,
            center_scale: 1.0,
            noise_sigma: 0.0,
            normalize: false,
            seed: 5,
        };
        let (store, centers) = gen_synthetic(&spec).unwrap();
        for (category, v) in store.samples() {
            assert_eq!(v, &centers[category]);
        }
    }

    #[test]
    fn synthetic_normalized_samples_are_unit() {
        let spec = SyntheticSpec {
            n_categories: 3,
            samples_per_category: 4,
            dim: 6,
            center_scale: 1.0,
            noise_sigma: 0.3,
            normalize: true,
            seed: 6,
        };
        let (store, _) = gen_synthetic(&spec).unwrap();
        for (_, v) in store.samples() {
            assert!((linalg::norm2(v) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n_categories: 4,
            samples_per_category: 3,
            dim: 8,
            center_scale: 1.0,
            noise_sigma: 0.1,
            normalize: true,
            seed: 42,
        };
        let (a, ca) = gen_synthetic(&spec).unwrap();
        let (b, cb) = gen_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn synthetic_rejects_single_category() {
        let spec = SyntheticSpec {
            n_categories: 1,
            samples_per_category: 3,
            dim: 4,
            center_scale: 1.0,
            noise_sigma: 0.1,
            normalize: false,
            seed: 0,
        };
        assert!(gen_synthetic(&spec).is_err());
    }

    #[test]
    fn split_counts_and_disjointness() {
        let spec = SyntheticSpec {
            n_categories: 5,
            samples_per_category: 5,
            dim: 3,
            center_scale: 1.0,
            noise_sigma: 0.1,
            normalize: false,
            seed: 9,
        };
        let (store, _) = gen_synthetic(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let split = split_store(&store, &[3, 4], 1, &mut rng).unwrap();
        assert_eq!(split.large.len(), 15);
        assert_eq!(split.few_train.len(), 2);
        assert_eq!(split.few_test.len(), 8);
        assert_eq!(split.large.categories(), vec![0, 1, 2]);
        assert_eq!(split.few_train.categories(), vec![3, 4]);
        assert_eq!(
            split.large.len() + split.few_train.len() + split.few_test.len(),
            store.len()
        );
    }

    #[test]
    fn split_with_no_few_categories_is_identity() {
        let store = tiny_store();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let split = split_store(&store, &[], 1, &mut rng).unwrap();
        assert_eq!(split.large, store);
        assert!(split.few_train.is_empty());
        assert!(split.few_test.is_empty());
    }

    #[test]
    fn split_requires_spare_samples() {
        let store = ActivationStore::from_samples(
            1,
            vec![
                (0, vec![0.0]),
                (1, vec![1.0]),
                (1, vec![2.0]),
                (1, vec![3.0]),
                (1, vec![4.0]),
                (1, vec![5.0]),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = split_store(&store, &[1], 5, &mut rng).unwrap_err();
        assert_eq!(
            err,
            Error::InsufficientSamples {
                category: 1,
                available: 5,
                requested: 5
            }
        );
        let split = split_store(&store, &[1], 1, &mut rng).unwrap();
        assert_eq!(split.few_train.len(), 1);
        assert_eq!(split.few_test.len(), 4);
    }
}
