//! Permutations of `{0..n}` and their action on matrix rows and columns.
//!
//! The permutation matrix of `σ` has a one at `(i, σ(i))`, so left
//! multiplication gives `(P M)[i, :] = M[σ(i), :]`. Under this convention a
//! target `A = Qᵀ Ã P` satisfies `A[σ_Q(a), σ_P(b)] = Ã[a, b]`.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// Validates that `images` is a bijection of `{0..images.len()}`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n {
                return Err(Error::InvalidPermutation(format!("image {i} out of range 0..{n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPermutation(format!("image {i} repeated")));
            }
        }
        Ok(Self { images })
    }

    /// Uniformly random permutation from a seeded shuffle.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(&mut rng);
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Self { images: inv }
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.len(), self.len());
        for (i, &j) in self.images.iter().enumerate() {
            m[(i, j)] = C64::new(1.0, 0.0);
        }
        m
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("permutation of size {n}"),
                found: format!("size {}", self.len()),
            });
        }
        Ok(())
    }

    /// `P M`: row `i` of the result is row `σ(i)` of `m`.
    pub fn permute_rows(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_len(m.rows())?;
        Ok(ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(self.images[r], c)]))
    }

    /// `M Pᵀ`: column `j` of the result is column `σ(j)` of `m`.
    pub fn permute_cols(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_len(m.cols())?;
        Ok(ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, self.images[c])]))
    }

    /// Writes the `perm` text format with one-based images.
    pub fn write_perm<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "perm {}", self.len())?;
        let line: Vec<String> = self.images.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
        Ok(())
    }

    pub fn read_perm<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(|t| (i + 1, t.to_string())));
        }
        let mut it = tokens.into_iter();
        match it.next() {
            Some((_, ref t)) if t == "perm" => {}
            other => {
                return Err(Error::Parse {
                    line: other.map_or(1, |(l, _)| l),
                    msg: "expected `perm <n>` header".into(),
                })
            }
        }
        let (line, n) = it.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing size".into(),
        })?;
        let n: usize = n.parse().map_err(|_| Error::Parse {
            line,
            msg: "bad size".into(),
        })?;
        let mut images = Vec::with_capacity(n);
        for (line, t) in it {
            let v: usize = t.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad image `{t}`"),
            })?;
            if v == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "images are one-based".into(),
                });
            }
            images.push(v - 1);
        }
        if images.len() != n {
            return Err(Error::Parse {
                line: 2,
                msg: format!("expected {n} images, found {}", images.len()),
            });
        }
        Self::new(images)
    }
}
