//! Channel-impact diagnostics for a learned linear predictor.
//!
//! The impact of input channel `j` on a matrix is the column-wise sum of
//! absolute weights: it measures how strongly that activation channel
//! influences the predicted parameters. Two maps are compared by the
//! overlap of their top-k impact channels; identity-like structure shows
//! up in the diagonal statistics and the log-scale heatmap export.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::MatView;

/// Non-negative per-channel impact values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactVector {
    values: Vec<f64>,
}

impl ImpactVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        ImpactVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values rescaled so their sum is 1 (all-zero input is returned
    /// unchanged).
    pub fn normalized_by_sum(&self) -> Vec<f64> {
        let total: f64 = self.values.iter().sum();
        if total == 0.0 {
            return self.values.clone();
        }
        self.values.iter().map(|v| v / total).collect()
    }

    /// Values rescaled to unit Euclidean norm (all-zero input is returned
    /// unchanged).
    pub fn normalized_by_euclidean(&self) -> Vec<f64> {
        let norm = fmath::sqrt(self.values.iter().map(|v| v * v).sum());
        if norm == 0.0 {
            return self.values.clone();
        }
        self.values.iter().map(|v| v / norm).collect()
    }

    /// Indexes of the `k` largest values, ties broken by ascending index.
    pub fn top_k_indexes(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&i, &j| {
            self.values[j]
                .partial_cmp(&self.values[i])
                .expect("impact values are finite")
                .then(i.cmp(&j))
        });
        order.truncate(k);
        order
    }
}

/// Mean and standard deviation of a value slice (population std).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, fmath::sqrt(var))
}

/// Column-wise sum of absolute values: impact of each input channel.
pub fn channel_impact(m: MatView<'_>) -> ImpactVector {
    let mut impacts = alloc::vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (j, impact) in impacts.iter_mut().enumerate() {
            *impact += fmath::abs(m.at(i, j));
        }
    }
    ImpactVector { values: impacts }
}

/// Fraction of shared indexes between the top-k impact channels of two
/// maps, in [0, 1].
pub fn order_similarity(a: &ImpactVector, b: &ImpactVector, k: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if k < 1 || k > a.len() {
        return Err(Error::KOutOfRange {
            k,
            candidates: a.len(),
        });
    }
    let top_a = a.top_k_indexes(k);
    let top_b = b.top_k_indexes(k);
    let set_b: alloc::collections::BTreeSet<usize> = top_b.into_iter().collect();
    let shared = top_a.iter().filter(|i| set_b.contains(i)).count();
    Ok(shared as f64 / k as f64)
}

/// Summary statistics of a square matrix's diagonal versus off-diagonal
/// mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalStats {
    pub mean_diag_abs: f64,
    pub mean_offdiag_abs: f64,
    /// Smallest raw (signed) diagonal entry.
    pub diag_min: f64,
    /// Largest raw (signed) diagonal entry.
    pub diag_max: f64,
}

/// Diagonal-dominance diagnostics; errors on non-square input.
pub fn diagonal_dominance(m: MatView<'_>) -> Result<DiagonalStats> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(
            "diagonal statistics need a square matrix".into(),
        ));
    }
    let d = m.rows();
    let mut diag_abs_sum = 0.0;
    let mut offdiag_abs_sum = 0.0;
    let mut diag_min = f64::INFINITY;
    let mut diag_max = f64::NEG_INFINITY;
    for i in 0..d {
        for j in 0..d {
            let v = m.at(i, j);
            if i == j {
                diag_abs_sum += fmath::abs(v);
                diag_min = diag_min.min(v);
                diag_max = diag_max.max(v);
            } else {
                offdiag_abs_sum += fmath::abs(v);
            }
        }
    }
    let offdiag_count = d * d - d;
    Ok(DiagonalStats {
        mean_diag_abs: diag_abs_sum / d as f64,
        mean_offdiag_abs: if offdiag_count == 0 {
            0.0
        } else {
            offdiag_abs_sum / offdiag_count as f64
        },
        diag_min,
        diag_max,
    })
}

/// `log10(|m_ij| + 1e-12)` over the top-left `submatrix x submatrix`
/// corner, for heatmap export.
pub fn log_heatmap(m: MatView<'_>, submatrix: usize) -> Result<Vec<Vec<f64>>> {
    if submatrix > m.rows() || submatrix > m.cols() {
        return Err(Error::InvalidArgument(
            "submatrix exceeds matrix dimensions".into(),
        ));
    }
    let mut grid = Vec::with_capacity(submatrix);
    for i in 0..submatrix {
        let mut row = Vec::with_capacity(submatrix);
        for j in 0..submatrix {
            row.push(fmath::log10(fmath::abs(m.at(i, j)) + 1e-12));
        }
        grid.push(row);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_impacts_are_all_one() {
        let w = linalg::identity(7);
        let impact = channel_impact(MatView::new(7, 7, &w));
        assert!(impact.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn impact_hand_arithmetic() {
        // [[1, -2], [3, 0]] -> column sums of magnitudes (4, 2).
        let m = [1.0, -2.0, 3.0, 0.0];
        let impact = channel_impact(MatView::new(2, 2, &m));
        assert_eq!(impact.values(), &[4.0, 2.0]);
    }

    #[test]
    fn impact_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows = 5;
        let cols = 9;
        let m: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random::<f64>() * 4.0 - 2.0)
            .collect();
        let impact = channel_impact(MatView::new(rows, cols, &m));
        for j in 0..cols {
            let mut expected = 0.0;
            for i in 0..rows {
                expected += m[i * cols + j].abs();
            }
            assert_eq!(impact.values()[j], expected);
        }
    }

    #[test]
    fn impact_scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m: Vec<f64> = (0..36).map(|_| rng.random::<f64>() - 0.5).collect();

        // Power-of-two scales commute with rounding: bit-exact.
        let c = -4.0;
        let scaled: Vec<f64> = m.iter().map(|x| c * x).collect();
        let base = channel_impact(MatView::new(6, 6, &m));
        let eq = channel_impact(MatView::new(6, 6, &scaled));
        for (a, b) in base.values().iter().zip(eq.values().iter()) {
            assert_eq!(c.abs() * a, *b);
        }

        // General scales agree to rounding error.
        let c = -3.7;
        let scaled: Vec<f64> = m.iter().map(|x| c * x).collect();
        let eq = channel_impact(MatView::new(6, 6, &scaled));
        for (a, b) in base.values().iter().zip(eq.values().iter()) {
            assert!((c.abs() * a - b).abs() <= 1e-14 * b.abs());
        }
    }

    #[test]
    fn order_similarity_basics() {
        let a = ImpactVector::from_values(vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.5]);
        for k in 1..=6 {
            assert_eq!(order_similarity(&a, &a, k).unwrap(), 1.0);
        }
        // Reversed ranking with distinct values: disjoint top-k supports
        // for k <= dim/2.
        let b = ImpactVector::from_values(vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0]);
        for k in 1..=3 {
            assert_eq!(order_similarity(&a, &b, k).unwrap(), 0.0);
        }
        // Full index sets always coincide.
        assert_eq!(order_similarity(&a, &b, 6).unwrap(), 1.0);
        assert!(order_similarity(&a, &b, 7).is_err());
        assert!(order_similarity(&a, &b, 0).is_err());
    }

    #[test]
    fn order_similarity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = ImpactVector::from_values((0..12).map(|_| rng.random::<f64>()).collect());
        let b = ImpactVector::from_values((0..12).map(|_| rng.random::<f64>()).collect());
        for k in 1..=12 {
            assert_eq!(
                order_similarity(&a, &b, k).unwrap(),
                order_similarity(&b, &a, k).unwrap()
            );
        }
    }

    #[test]
    fn top_k_ties_break_by_ascending_index() {
        let a = ImpactVector::from_values(vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(a.top_k_indexes(2), vec![0, 1]);
    }

    #[test]
    fn diagonal_stats_closed_forms() {
        let id = linalg::identity(4);
        let stats = diagonal_dominance(MatView::new(4, 4, &id)).unwrap();
        assert_eq!(
            stats,
            DiagonalStats {
                mean_diag_abs: 1.0,
                mean_offdiag_abs: 0.0,
                diag_min: 1.0,
                diag_max: 1.0
            }
        );

        let ones = vec![1.0; 9];
        let stats = diagonal_dominance(MatView::new(3, 3, &ones)).unwrap();
        assert_eq!(
            stats,
            DiagonalStats {
                mean_diag_abs: 1.0,
                mean_offdiag_abs: 1.0,
                diag_min: 1.0,
                diag_max: 1.0
            }
        );

        let rect = vec![0.0; 6];
        assert!(diagonal_dominance(MatView::new(2, 3, &rect)).is_err());
    }

    #[test]
    fn heatmap_identity_and_degenerate() {
        let id = linalg::identity(3);
        let grid = log_heatmap(MatView::new(3, 3, &id), 2).unwrap();
        assert!((grid[0][0] - 0.0).abs() < 1e-9);
        assert!((grid[0][1] + 12.0).abs() < 1e-9);
        assert!((grid[1][0] + 12.0).abs() < 1e-9);
        assert!((grid[1][1] - 0.0).abs() < 1e-9);

        let empty = log_heatmap(MatView::new(3, 3, &id), 0).unwrap();
        assert!(empty.is_empty());
        assert!(log_heatmap(MatView::new(3, 3, &id), 4).is_err());
    }
}
