//! Monarch-class projections and hierarchical butterfly factorization with
//! fixed row and column permutations.
//!
//! The hierarchy peels one factor at a time: the level-1 Monarch projection
//! splits `B ≈ X Y` with `X` on `S_1` and `Y` on `I_2 ⊗ J_{N/2}`, and each of
//! the two diagonal blocks of `Y` is factorized recursively as a butterfly
//! matrix of half the size.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{log2_exact, Error, Result};
use crate::matrix::{best_rank_one, rank_one_residual, ComplexMatrix, C64};
use crate::permutation::Permutation;
use crate::support::butterfly_support;

/// The `L` factors of a butterfly matrix, factor `ℓ` supported on `S_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterflyFactors {
    factors: Vec<ComplexMatrix>,
}

impl ButterflyFactors {
    /// Checks that factor `ℓ` (one-based) vanishes outside `S_ℓ`.
    pub fn new(factors: Vec<ComplexMatrix>) -> Result<Self> {
        let n = factors.first().map_or(0, |f| f.rows());
        let l = log2_exact(n)?;
        if factors.len() != l {
            return Err(Error::DimensionMismatch {
                expected: format!("{l} factors"),
                found: format!("{}", factors.len()),
            });
        }
        for (k, f) in factors.iter().enumerate() {
            if !butterfly_support(n, k + 1)?.admits(f) {
                return Err(Error::InvalidArgument(format!(
                    "factor {} has entries outside its butterfly support",
                    k + 1
                )));
            }
        }
        Ok(Self { factors })
    }

    pub fn size(&self) -> usize {
        self.factors[0].rows()
    }

    pub fn num_levels(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[ComplexMatrix] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<ComplexMatrix> {
        self.factors
    }

    /// `X^(1) ⋯ X^(L)`.
    pub fn product(&self) -> ComplexMatrix {
        let mut it = self.factors.iter();
        let first = it.next().expect("at least one factor").clone();
        it.fold(first, |acc, f| acc.matmul(f).expect("square factors of equal size"))
    }

    /// Writes one `cmx` file per factor plus `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let files: Vec<String> = (1..=self.num_levels())
            .map(|k| format!("factor_{k:02}.cmx"))
            .collect();
        for (f, name) in self.factors.iter().zip(&files) {
            f.write_cmx(BufWriter::new(File::create(dir.join(name))?))?;
        }
        let manifest = FactorManifest {
            n: self.size(),
            levels: self.num_levels(),
            files,
        };
        serde_json::to_writer_pretty(File::create(dir.join("manifest.json"))?, &manifest)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest: FactorManifest =
            serde_json::from_reader(BufReader::new(File::open(dir.join("manifest.json"))?))?;
        let factors = manifest
            .files
            .iter()
            .map(|name| ComplexMatrix::read_cmx(BufReader::new(File::open(dir.join(name))?)))
            .collect::<Result<Vec<_>>>()?;
        let out = Self::new(factors)?;
        if out.size() != manifest.n || out.num_levels() != manifest.levels {
            return Err(Error::InvalidArgument("manifest does not match factor files".into()));
        }
        Ok(out)
    }
}

/// Manifest accompanying serialized factors; `files` is in factor order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorManifest {
    pub n: usize,
    pub levels: usize,
    pub files: Vec<String>,
}

/// Row partition into `N/2^ℓ` sets of size `2^ℓ` and column partition into
/// `2^ℓ` sets of size `N/2^ℓ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartition {
    pub level: usize,
    pub row_sets: Vec<Vec<usize>>,
    pub col_sets: Vec<Vec<usize>>,
}

impl LevelPartition {
    /// Checks cardinalities and the partition property for size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let l = log2_exact(n)?;
        if self.level == 0 || self.level >= l {
            return Err(Error::LevelOutOfRange {
                level: self.level,
                max: l - 1,
            });
        }
        let row_size = 1 << self.level;
        check_equal_partition(n, &self.row_sets, n / row_size, row_size, "row")?;
        check_equal_partition(n, &self.col_sets, row_size, n / row_size, "column")
    }

    /// Sorts every set and orders sets by their smallest element.
    pub fn canonicalize(&mut self) {
        canonicalize_sets(&mut self.row_sets);
        canonicalize_sets(&mut self.col_sets);
    }
}

pub(crate) fn canonicalize_sets(sets: &mut [Vec<usize>]) {
    for s in sets.iter_mut() {
        s.sort_unstable();
    }
    sets.sort_unstable_by_key(|s| s.first().copied());
}

pub(crate) fn check_equal_partition(
    n: usize,
    sets: &[Vec<usize>],
    count: usize,
    size: usize,
    what: &str,
) -> Result<()> {
    if sets.len() != count || sets.iter().any(|s| s.len() != size) {
        return Err(Error::MalformedPartition(format!(
            "{what} partition must have {count} sets of size {size}"
        )));
    }
    let mut seen = vec![false; n];
    for &i in sets.iter().flatten() {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::MalformedPartition(format!(
                "{what} sets do not partition 0..{n}"
            )));
        }
    }
    Ok(())
}

/// Canonical level-`ℓ` partition of a butterfly matrix: row set `i` is
/// `{i + k·N/2^ℓ}` and column set `j` is the contiguous block `j`.
pub fn canonical_level_partition(n: usize, level: usize) -> Result<LevelPartition> {
    let l = log2_exact(n)?;
    if level == 0 || level >= l {
        return Err(Error::LevelOutOfRange { level, max: l - 1 });
    }
    let stride = n >> level;
    let row_sets = (0..stride)
        .map(|i| (0..1 << level).map(|k| i + k * stride).collect())
        .collect();
    let col_sets = (0..1 << level)
        .map(|j| (0..stride).map(|k| j * stride + k).collect())
        .collect();
    Ok(LevelPartition {
        level,
        row_sets,
        col_sets,
    })
}

/// Sum over all blocks `(R_i, C_j)` of the squared rank-one residual.
pub fn partition_objective(a: &ComplexMatrix, p: &LevelPartition) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    p.validate(a.rows())?;
    Ok(p.row_sets
        .iter()
        .flat_map(|r| p.col_sets.iter().map(move |c| (r, c)))
        .map(|(r, c)| rank_one_residual(&a.submatrix(r, c)))
        .sum())
}

/// Output of [`monarch_two_factor`].
#[derive(Debug, Clone)]
pub struct MonarchFactors {
    pub x: ComplexMatrix,
    pub y: ComplexMatrix,
    pub err2: f64,
}

/// Projection onto the level-`ℓ` Monarch class: `X` on `S_{1:ℓ}`, `Y` on
/// `S_{ℓ+1:L}`, with each canonical block replaced by its best rank-one
/// approximation. Block `(i, j)` is carried by inner index
/// `c = j·N/2^ℓ + i`.
pub fn monarch_two_factor(m: &ComplexMatrix, level: usize) -> Result<MonarchFactors> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let n = m.rows();
    let part = canonical_level_partition(n, level)?;
    let stride = n >> level;
    let mut x = ComplexMatrix::zeros(n, n);
    let mut y = ComplexMatrix::zeros(n, n);
    let mut err2 = 0.0;
    for (i, rows) in part.row_sets.iter().enumerate() {
        for (j, cols) in part.col_sets.iter().enumerate() {
            let r1 = best_rank_one(&m.submatrix(rows, cols));
            err2 += r1.err2;
            if r1.s == 0.0 {
                continue;
            }
            let c = j * stride + i;
            let root = r1.s.sqrt();
            for (&r, u) in rows.iter().zip(&r1.u) {
                x[(r, c)] = u * root;
            }
            for (&col, v) in cols.iter().zip(&r1.v) {
                y[(c, col)] = v.conj() * root;
            }
        }
    }
    Ok(MonarchFactors { x, y, err2 })
}

/// Factorizes `b` (size `2^L`) into `L` butterfly factors by recursive
/// level-1 peeling.
pub fn factorize_butterfly(b: &ComplexMatrix) -> Result<ButterflyFactors> {
    if !b.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", b.rows(), b.cols()),
        });
    }
    log2_exact(b.rows())?;
    ButterflyFactors::new(peel(b))
}

fn peel(b: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let n = b.rows();
    if n == 2 {
        return vec![b.clone()];
    }
    let MonarchFactors { x, y, .. } = monarch_two_factor(b, 1).expect("n >= 4 is a power of two");
    let h = n / 2;
    let lo: Vec<usize> = (0..h).collect();
    let hi: Vec<usize> = (h..n).collect();
    let top = peel(&y.submatrix(&lo, &lo));
    let bottom = peel(&y.submatrix(&hi, &hi));
    let mut out = Vec::with_capacity(top.len() + 1);
    out.push(x);
    for (t, u) in top.iter().zip(&bottom) {
        out.push(block_diag(t, u));
    }
    out
}

fn block_diag(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ha, hb) = (a.rows(), b.rows());
    ComplexMatrix::from_fn(ha + hb, ha + hb, |r, c| match (r < ha, c < ha) {
        (true, true) => a[(r, c)],
        (false, false) => b[(r - ha, c - ha)],
        _ => C64::new(0.0, 0.0),
    })
}

/// Result of [`hierarchical_factorize`].
#[derive(Debug, Clone)]
pub struct HierarchicalResult {
    pub factors: ButterflyFactors,
    /// Absolute error `‖A − Qᵀ X^(1)⋯X^(L) P‖_F`.
    pub e_bf: f64,
}

/// Butterfly factorization of `Q A Pᵀ` with both permutations fixed.
pub fn hierarchical_factorize(
    a: &ComplexMatrix,
    p: &Permutation,
    q: &Permutation,
) -> Result<HierarchicalResult> {
    let b = p.permute_cols(&q.permute_rows(a)?)?;
    let factors = factorize_butterfly(&b)?;
    let e_bf = b.sub(&factors.product())?.frobenius_norm();
    Ok(HierarchicalResult { factors, e_bf })
}

/// Rebuilds `Qᵀ X^(1)⋯X^(L) P` from factors and permutations.
pub fn reconstruct(factors: &ButterflyFactors, p: &Permutation, q: &Permutation) -> Result<ComplexMatrix> {
    let b = factors.product();
    p.inverse().permute_cols(&q.inverse().permute_rows(&b)?)
}
