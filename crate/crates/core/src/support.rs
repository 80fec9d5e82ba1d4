//! Butterfly support masks `S_ℓ = I_{2^{ℓ-1}} ⊗ J_2 ⊗ I_{N/2^ℓ}` and their
//! products `S_{p:q}`.
//!
//! With zero-based indices and `N = 2^L`, `(r, c)` lies in `S_{p:q}` iff `r`
//! and `c` agree on every bit outside positions `L-q ..= L-p`.

use crate::error::{log2_exact, Error, Result};
use crate::matrix::ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportMask {
    size: usize,
    first: usize,
    last: usize,
    free_bits: usize,
}

impl SupportMask {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Level range `(p, q)` of the product this mask represents.
    pub fn levels(&self) -> (usize, usize) {
        (self.first, self.last)
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r < self.size && c < self.size && (r ^ c) & !self.free_bits == 0
    }

    /// Number of allowed entries.
    pub fn cardinality(&self) -> usize {
        self.size << (self.last - self.first + 1)
    }

    /// Allowed entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.size).flat_map(move |r| {
            (0..self.size)
                .filter(move |&c| self.contains(r, c))
                .map(move |c| (r, c))
        })
    }

    /// True when every entry of `m` outside the mask is exactly zero.
    pub fn admits(&self, m: &ComplexMatrix) -> bool {
        m.rows() == self.size
            && m.cols() == self.size
            && (0..self.size).all(|r| {
                m.row(r)
                    .iter()
                    .enumerate()
                    .all(|(c, z)| self.contains(r, c) || (z.re == 0.0 && z.im == 0.0))
            })
    }

    /// Zeroes every entry outside the mask.
    pub fn project(&self, m: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| {
            if self.contains(r, c) {
                m[(r, c)]
            } else {
                Default::default()
            }
        })
    }
}

/// Support of the `level`-th butterfly factor of size `n`.
pub fn butterfly_support(n: usize, level: usize) -> Result<SupportMask> {
    product_support(n, level, level)
}

/// Support of `S_first ⋯ S_last`.
pub fn product_support(n: usize, first: usize, last: usize) -> Result<SupportMask> {
    let l = log2_exact(n)?;
    if first == 0 || first > l {
        return Err(Error::LevelOutOfRange { level: first, max: l });
    }
    if last < first || last > l {
        return Err(Error::LevelOutOfRange { level: last, max: l });
    }
    let free_bits = (l - last..=l - first).fold(0usize, |acc, b| acc | (1 << b));
    Ok(SupportMask {
        size: n,
        first,
        last,
        free_bits,
    })
}
