//! Cosine-similarity graphs over rows (or columns) restricted to groups of
//! the opposite axis, and unnormalized-Laplacian spectral embeddings.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64};

/// Which indices of the matrix are being clustered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Cluster rows; groups are column index sets.
    Rows,
    /// Cluster columns; groups are row index sets.
    Cols,
}

/// Symmetric nonnegative similarity `W = Σ_j W^(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub weights: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    /// `L = D − W` with `D` the diagonal of row sums of `W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut lap = -self.weights.clone();
        for i in 0..n {
            let degree: f64 = self.weights.row(i).sum();
            lap[(i, i)] += degree;
        }
        lap
    }
}

/// `cos^α` from `cos²`.
fn contrast(cos2: f64, alpha: f64) -> f64 {
    let half = 0.5 * alpha;
    if half == 0.5 {
        cos2.sqrt()
    } else if half.fract() == 0.0 && (1.0..=1024.0).contains(&half) {
        cos2.powi(half as i32)
    } else if cos2 == 0.0 {
        0.0
    } else {
        cos2.powf(half)
    }
}

/// Similarity of the indices along `axis`, summed over `groups` of the
/// opposite axis. For group `j`, indices `k ≠ l` get
/// `(|a_kᴴ a_l| / (‖a_k‖‖a_l‖))^α` where `a_k` is index `k` restricted to the
/// group; a zero restriction contributes nothing, including on the diagonal.
pub fn similarity(a: &ComplexMatrix, groups: &[Vec<usize>], axis: Axis, alpha: f64) -> Result<SimilarityMatrix> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("contrast exponent {alpha} must be positive")));
    }
    let (n, other) = match axis {
        Axis::Rows => (a.rows(), a.cols()),
        Axis::Cols => (a.cols(), a.rows()),
    };
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::MalformedPartition("empty group".into()));
    }
    if groups.iter().flatten().any(|&i| i >= other) {
        return Err(Error::MalformedPartition(format!("group index out of range 0..{other}")));
    }
    let entry = |k: usize, i: usize| match axis {
        Axis::Rows => a[(k, i)],
        Axis::Cols => a[(i, k)],
    };
    let mut w = DMatrix::<f64>::zeros(n, n);
    let mut unit: Vec<C64> = Vec::new();
    let mut nonzero = vec![false; n];
    for group in groups {
        let g = group.len();
        unit.clear();
        unit.resize(n * g, C64::new(0.0, 0.0));
        for k in 0..n {
            let row = &mut unit[k * g..(k + 1) * g];
            for (dst, &i) in row.iter_mut().zip(group) {
                *dst = entry(k, i);
            }
            let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            nonzero[k] = norm > 0.0;
            if nonzero[k] {
                row.iter_mut().for_each(|z| *z /= norm);
            }
        }
        for k in 0..n {
            if !nonzero[k] {
                continue;
            }
            w[(k, k)] += 1.0;
            let uk = &unit[k * g..(k + 1) * g];
            for l in k + 1..n {
                if !nonzero[l] {
                    continue;
                }
                let ul = &unit[l * g..(l + 1) * g];
                let dot: C64 = uk.iter().zip(ul).map(|(x, y)| x.conj() * y).sum();
                let val = contrast(dot.norm_sqr().min(1.0), alpha);
                w[(k, l)] += val;
                w[(l, k)] += val;
            }
        }
    }
    Ok(SimilarityMatrix { weights: w })
}

/// Eigenvectors of the unnormalized Laplacian for its `k` smallest
/// eigenvalues.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// `N × k`, column `c` is the eigenvector of `eigenvalues[c]`.
    pub vectors: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// Spectral embedding of a similarity graph into `k` dimensions.
///
/// Eigenvalues are ordered ascending (ties keep the solver's order), and each
/// eigenvector's largest-magnitude coordinate is made positive.
pub fn spectral_embed(w: &SimilarityMatrix, k: usize) -> Result<Embedding> {
    let n = w.size();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot embed {n} points into {k} dimensions")));
    }
    let eig = SymmetricEigen::new(w.laplacian());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut vectors = DMatrix::<f64>::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &e) in idx.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(e);
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, c)] = sign * col[i];
        }
        eigenvalues.push(eig.eigenvalues[e]);
    }
    Ok(Embedding { vectors, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[f64]]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows)
    }

    #[test]
    fn identical_and_orthogonal_rows() {
        let a = real(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 0.0], &[-2.0, 1.0, 0.0]]);
        let g = vec![vec![0, 1, 2]];
        for alpha in [0.01, 1.0, 7.5, 100.0] {
            let w = similarity(&a, &g, Axis::Rows, alpha).unwrap().weights;
            assert!((w[(0, 1)] - 1.0).abs() < 1e-12);
            assert_eq!(w[(0, 2)], 0.0);
            assert_eq!(w[(0, 0)], 1.0);
        }
    }

    #[test]
    fn contrast_exponent_applies_to_cosine() {
        // cos(60°) = 0.5
        let a = real(&[&[1.0, 0.0], &[0.5, 0.75f64.sqrt()]]);
        let w = similarity(&a, &[vec![0, 1]], Axis::Rows, 2.0).unwrap().weights;
        assert!((w[(0, 1)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_restrictions_contribute_nothing() {
        let a = real(&[&[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]]);
        let w = similarity(&a, &[vec![0, 1], vec![2]], Axis::Rows, 1.0).unwrap().weights;
        // Row 0 is zero on the first group: one nonzero group on its diagonal.
        assert_eq!(w[(0, 0)], 1.0);
        assert_eq!(w[(1, 1)], 2.0);
        assert!((w[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn column_axis_is_the_transpose() {
        let a = ComplexMatrix::from_fn(4, 6, |r, c| C64::new((r * 7 + c * 3) as f64 % 5.0 - 2.0, (r + c) as f64 * 0.1));
        let groups = vec![vec![0, 2], vec![1, 3]];
        let cols = similarity(&a, &groups, Axis::Cols, 1.5).unwrap();
        let rows_of_t = similarity(&a.transpose(), &groups, Axis::Rows, 1.5).unwrap();
        assert_eq!(cols, rows_of_t);
    }

    #[test]
    fn similarity_is_symmetric_and_group_order_invariant() {
        let a = ComplexMatrix::from_fn(6, 6, |r, c| C64::new(((r * 5 + c * 11) % 7) as f64 - 3.0, ((r * c) % 3) as f64));
        let g1 = vec![vec![0, 1, 2], vec![3, 4, 5]];
        let g2 = vec![vec![5, 3, 4], vec![2, 0, 1]];
        let w1 = similarity(&a, &g1, Axis::Rows, 3.0).unwrap().weights;
        let w2 = similarity(&a, &g2, Axis::Rows, 3.0).unwrap().weights;
        assert!((&w1 - &w1.transpose()).amax() < 1e-12);
        assert!((&w1 - &w2).amax() < 1e-12);
        assert!(w1.iter().all(|&x| (0.0..=2.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn rejects_bad_input() {
        let a = ComplexMatrix::identity(4);
        assert!(similarity(&a, &[vec![]], Axis::Rows, 1.0).is_err());
        assert!(similarity(&a, &[vec![4]], Axis::Rows, 1.0).is_err());
        assert!(similarity(&a, &[vec![0]], Axis::Rows, 0.0).is_err());
    }

    #[test]
    fn two_node_graph() {
        let w = SimilarityMatrix {
            weights: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        };
        let lap = w.laplacian();
        assert_eq!(lap, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let e = spectral_embed(&w, 2).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-12);
        assert!((e.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert!(spectral_embed(&w, 3).is_err());
    }

    #[test]
    fn constant_vector_spans_the_null_space_of_a_connected_graph() {
        let n = 7;
        let weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        let e = spectral_embed(&SimilarityMatrix { weights }, 2).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-12);
        let v = e.vectors.column(0);
        let c = 1.0 / (n as f64).sqrt();
        assert!(v.iter().all(|x| (x - c).abs() < 1e-10));
    }

    #[test]
    fn embedding_separates_disjoint_cliques() {
        let n = 6;
        let comp = |i: usize| usize::from(i % 2 == 1);
        let weights = DMatrix::from_fn(n, n, |i, j| if comp(i) == comp(j) { 1.0 } else { 0.0 });
        let e = spectral_embed(&SimilarityMatrix { weights }, 2).unwrap();
        let row = |i: usize| e.vectors.row(i).into_owned();
        for i in 0..n {
            for j in 0..n {
                let d = (row(i) - row(j)).norm();
                if comp(i) == comp(j) {
                    assert!(d < 1e-10);
                } else {
                    assert!(d > 0.1);
                }
            }
        }
    }

    #[test]
    fn eigenpair_residuals_are_small() {
        let n = 24;
        let weights = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (((i * 31 + j * 17) ^ (j * 31 + i * 17)) % 97) as f64 / 97.0
            }
        });
        let w = SimilarityMatrix { weights: (&weights + weights.transpose()) * 0.5 };
        let lap = w.laplacian();
        let e = spectral_embed(&w, 6).unwrap();
        for c in 0..6 {
            let v = e.vectors.column(c);
            let r = &lap * v - v * e.eigenvalues[c];
            assert!(r.norm() <= 1e-8 * lap.norm());
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(e.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
    }
}
