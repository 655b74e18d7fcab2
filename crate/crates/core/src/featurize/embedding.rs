use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// One row per vocabulary entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillEmbedding {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl SkillEmbedding {
    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cosine between two rows; zero when either row is zero.
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            (dot / (nx * ny)).clamp(-1.0, 1.0)
        }
    }
}

/// Positive pointwise mutual information of a count matrix.
pub fn ppmi(counts: &DMatrix<f64>) -> DMatrix<f64> {
    let total: f64 = counts.iter().sum();
    let row_sums: Vec<f64> = counts.row_iter().map(|r| r.sum()).collect();
    let col_sums: Vec<f64> = counts.column_iter().map(|c| c.sum()).collect();
    DMatrix::from_fn(counts.nrows(), counts.ncols(), |i, j| {
        let c = counts[(i, j)];
        if c <= 0.0 {
            return 0.0;
        }
        (c * total / (row_sums[i] * col_sums[j])).ln().max(0.0)
    })
}

/// PPMI followed by a rank-`d` truncated eigendecomposition. Components are
/// ordered by eigenvalue magnitude; row `i` holds `u_ik * sqrt(|lambda_k|)`.
/// Each eigenvector's sign is fixed so its largest-magnitude entry is positive.
pub fn embed_skills(cooccurrence: &DMatrix<f64>, d: usize) -> Result<SkillEmbedding, FeatureError> {
    let n = cooccurrence.nrows();
    if n == 0 {
        return Err(FeatureError::EmptyVocabulary);
    }
    if d < 2 {
        return Err(FeatureError::DimensionTooSmall(d));
    }
    if d > n {
        return Err(FeatureError::DimensionTooLarge { d, vocab: n });
    }
    let symmetric = cooccurrence.ncols() == n
        && (0..n).all(|i| {
            (0..n).all(|j| {
                let v = cooccurrence[(i, j)];
                v >= 0.0 && v.is_finite() && v == cooccurrence[(j, i)]
            })
        });
    if !symmetric {
        return Err(FeatureError::InvalidMatrix);
    }

    let weights = ppmi(cooccurrence);
    if weights.iter().all(|&v| v == 0.0) {
        return Err(FeatureError::DegenerateMatrix);
    }

    let eigen = SymmetricEigen::new(weights);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .abs()
            .total_cmp(&eigen.eigenvalues[a].abs())
            .then(a.cmp(&b))
    });

    let mut rows = vec![vec![0.0; d]; n];
    for (k, &col) in order.iter().take(d).enumerate() {
        let vector = eigen.eigenvectors.column(col);
        let pivot = (0..n)
            .max_by(|&a, &b| vector[a].abs().total_cmp(&vector[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if vector[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = eigen.eigenvalues[col].abs().sqrt() * sign;
        for (i, row) in rows.iter_mut().enumerate() {
            row[k] = vector[i] * scale;
        }
    }
    Ok(SkillEmbedding { dim: d, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cliques() -> DMatrix<f64> {
        // {a,b} and {c,d}, each listed once
        DMatrix::from_row_slice(
            4,
            4,
            &[
                1., 1., 0., 0., //
                1., 1., 0., 0., //
                0., 0., 1., 1., //
                0., 0., 1., 1.,
            ],
        )
    }

    /// Independent route: PPMI recomputed by hand, then a full SVD.
    fn svd_oracle_cosines(counts: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
        let n = counts.nrows();
        let total: f64 = counts.iter().sum();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let ri: f64 = (0..n).map(|k| counts[(i, k)]).sum();
                let cj: f64 = (0..n).map(|k| counts[(k, j)]).sum();
                if counts[(i, j)] > 0.0 {
                    p[(i, j)] = f64::max(0.0, (counts[(i, j)] * total / (ri * cj)).ln());
                }
            }
        }
        let svd = p.svd(true, false);
        let u = svd.u.unwrap();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let emb = DMatrix::from_fn(n, d, |i, k| u[(i, idx[k])] * svd.singular_values[idx[k]].sqrt());
        DMatrix::from_fn(n, n, |i, j| {
            let a = emb.row(i);
            let b = emb.row(j);
            let (na, nb) = (a.norm(), b.norm());
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                a.dot(&b) / (na * nb)
            }
        })
    }

    #[test]
    fn disjoint_cliques_separate() {
        let e = embed_skills(&cliques(), 2).unwrap();
        assert!(e.cosine(0, 1) > e.cosine(0, 2));
        let oracle = svd_oracle_cosines(&cliques(), 2);
        for i in 0..4 {
            for j in 0..4 {
                assert!((e.cosine(i, j) - oracle[(i, j)]).abs() < 1e-9, "({i},{j})");
            }
        }
        assert!((oracle[(0, 1)] - 1.0).abs() < 1e-9);
        assert!(oracle[(0, 2)].abs() < 1e-9);
    }

    #[test]
    fn identical_rows_embed_identically() {
        // p and q (0 and 1) always listed together
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                3., 3., 1., 2., //
                3., 3., 1., 2., //
                1., 1., 4., 1., //
                2., 2., 1., 5.,
            ],
        );
        let e = embed_skills(&m, 2).unwrap();
        for k in 0..2 {
            assert!((e.row(0)[k] - e.row(1)[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn error_cases() {
        assert_eq!(
            embed_skills(&DMatrix::zeros(3, 3), 2).unwrap_err(),
            FeatureError::DegenerateMatrix
        );
        assert_eq!(
            embed_skills(&cliques(), 5).unwrap_err(),
            FeatureError::DimensionTooLarge { d: 5, vocab: 4 }
        );
        let mut asym = cliques();
        asym[(0, 3)] = 2.0;
        assert_eq!(embed_skills(&asym, 2).unwrap_err(), FeatureError::InvalidMatrix);
    }

    #[test]
    fn matches_svd_oracle_on_random_counts() {
        let n = 7;
        let mut m = DMatrix::zeros(n, n);
        let mut state = 17u64;
        for i in 0..n {
            for j in i..n {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((state >> 33) % 6) as f64;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let d = 4;
        let e = embed_skills(&m, d).unwrap();
        let oracle = svd_oracle_cosines(&m, d);
        for i in 0..n {
            for j in 0..n {
                assert!((e.cosine(i, j) - oracle[(i, j)]).abs() < 1e-9);
            }
        }
    }

    fn symmetric_counts(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(0u8..5, n * (n + 1) / 2).prop_map(move |vals| {
            let mut m = DMatrix::zeros(n, n);
            let mut it = vals.into_iter();
            for i in 0..n {
                for j in i..n {
                    let v = it.next().unwrap() as f64;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
                // keep every skill present
                m[(i, i)] += 1.0;
            }
            m
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn cosines_are_permutation_invariant(m in symmetric_counts(6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
            // full rank keeps the result independent of eigenvalue ties at the cut
            let d = 6;
            let permuted = DMatrix::from_fn(6, 6, |i, j| m[(perm[i], perm[j])]);
            let (Ok(a), Ok(b)) = (embed_skills(&m, d), embed_skills(&permuted, d)) else {
                return Ok(());
            };
            for i in 0..6 {
                for j in 0..6 {
                    let x = b.cosine(i, j);
                    let y = a.cosine(perm[i], perm[j]);
                    prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
                }
            }
        }

        #[test]
        fn rows_are_finite(m in symmetric_counts(5)) {
            if let Ok(e) = embed_skills(&m, 3) {
                prop_assert!(e.rows.iter().flatten().all(|v| v.is_finite()));
            }
        }
    }
}
