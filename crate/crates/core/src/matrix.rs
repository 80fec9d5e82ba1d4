//! Dense complex matrices, best rank-one approximation and the `cmx` text
//! format.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real entries given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(rows.len(), cols, |r, c| C64::new(rows[r][c], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    /// Matrix product; zero entries of `self` are skipped, which makes
    /// products of sparse butterfly factors cheap.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                found: format!("{}", other.rows),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            data: self.data.iter().map(|z| z.conj()).collect(),
            ..*self
        }
    }

    /// Restriction to the given row and column index lists, in that order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Writes the matrix in `cmx v1` format.
    pub fn write_cmx<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cmx {} {}", self.rows, self.cols)?;
        let mut line = String::new();
        for r in 0..self.rows {
            line.clear();
            for (c, z) in self.row(r).iter().enumerate() {
                if c > 0 {
                    line.push(' ');
                }
                write!(line, "{:.16e},{:.16e}", z.re, z.im).expect("write to String");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_cmx<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (lineno, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        if parts.next() != Some("cmx") {
            return Err(parse_err(lineno, "expected `cmx <rows> <cols>` header"));
        }
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(lineno, "bad row count"))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(lineno, "bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| parse_err(lineno, "missing matrix rows"))?;
            let line = line?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let (re, im) = tok
                    .split_once(',')
                    .ok_or_else(|| parse_err(lineno, "expected `re,im` token"))?;
                let re: f64 = re.parse().map_err(|_| parse_err(lineno, "bad real part"))?;
                let im: f64 = im.parse().map_err(|_| parse_err(lineno, "bad imaginary part"))?;
                data.push(C64::new(re, im));
            }
            if data.len() - before != cols {
                return Err(parse_err(lineno, "wrong number of columns"));
            }
        }
        Self::from_vec(rows, cols, data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Best rank-one approximation `s * u * v^*` of a matrix.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub u: Vec<C64>,
    pub s: f64,
    pub v: Vec<C64>,
    /// Squared Frobenius residual, the sum of the squared trailing singular values.
    pub err2: f64,
}

/// Singular values and vectors of a complex matrix, `M = Σ_k s_k u_k v_kᴴ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `u[k]` is the left vector of `singular_values[k]`.
    pub u: Vec<Vec<C64>>,
    pub v: Vec<Vec<C64>>,
}

const JACOBI_MAX_SWEEPS: usize = 80;
const JACOBI_NEGLIGIBLE: f64 = 1e-40;

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Columns of the taller orientation are orthogonalized pairwise until every
/// pair is orthogonal to working precision. Small singular values come out
/// with absolute accuracy of order `ε·s_max`, so residuals of nearly rank-one
/// blocks are resolved far below `ε·‖M‖²`.
pub fn svd(m: &ComplexMatrix) -> Svd {
    let wide = m.rows() < m.cols();
    let mut work = if wide { m.adjoint() } else { m.clone() };
    // Unit scale keeps the sweeps away from underflow.
    let scale = work.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        work.data.iter_mut().for_each(|z| *z /= scale);
    }
    let (rows, cols) = (work.rows(), work.cols());
    // Column-major copies: a[j] is column j.
    let mut a: Vec<Vec<C64>> = (0..cols).map(|j| (0..rows).map(|i| work[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<C64>> = (0..cols)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); cols];
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let norm2 = |x: &[C64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>();
    // Columns this small no longer affect any singular value to working
    // precision and are left alone.
    let negligible = JACOBI_NEGLIGIBLE * work.norm_sqr();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = norm2(&a[p]);
                let beta = norm2(&a[q]);
                let gamma: C64 = a[p].iter().zip(&a[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if alpha <= negligible || beta <= negligible || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for vecs in [&mut a, &mut v] {
                    let (lo, hi) = vecs.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let yq = *y * phase;
                        let xp = *x;
                        *x = xp * c - yq * s;
                        *y = xp * s + yq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..cols).collect();
    let sv: Vec<f64> = a.iter().map(|col| norm2(col).sqrt()).collect();
    let rescale = if scale > 0.0 { scale } else { 1.0 };
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]).then(x.cmp(&y)));
    let mut singular_values = Vec::with_capacity(cols);
    let mut left = Vec::with_capacity(cols);
    let mut right = Vec::with_capacity(cols);
    for &k in &order {
        let s = sv[k];
        let u: Vec<C64> = if s > 0.0 {
            a[k].iter().map(|z| z / s).collect()
        } else {
            vec![C64::new(0.0, 0.0); rows]
        };
        singular_values.push(s * rescale);
        left.push(u);
        right.push(v[k].clone());
    }
    if wide {
        // Mᴴ = Σ s u vᴴ  ⇒  M = Σ s v uᴴ.
        std::mem::swap(&mut left, &mut right);
    }
    Svd {
        singular_values,
        u: left,
        v: right,
    }
}

/// Relative residual above which [`rank_one_residual`] trusts the Gram
/// eigenvalue shortcut.
const GRAM_SHORTCUT_FLOOR: f64 = 1e-6;

/// `‖M‖_F² − s_max²`, the squared distance from `m` to the nearest rank-one
/// matrix.
///
/// Uses the largest eigenvalue of the smaller Gram matrix when the residual
/// is not small compared to `‖M‖_F²`, and the Jacobi SVD otherwise, so the
/// result keeps a relative accuracy near machine precision in both regimes.
pub fn rank_one_residual(m: &ComplexMatrix) -> f64 {
    let (r, c) = (m.rows(), m.cols());
    if r.min(c) <= 1 {
        return 0.0;
    }
    let total = m.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let k = r.min(c);
    let gram = if r <= c {
        let mm = DMatrix::from_row_slice(r, c, &m.data);
        &mm * mm.adjoint()
    } else {
        let mm = DMatrix::from_row_slice(r, c, &m.data);
        mm.adjoint() * &mm
    };
    debug_assert_eq!(gram.nrows(), k);
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let err = total - top;
    if err > GRAM_SHORTCUT_FLOOR * total {
        err
    } else {
        best_rank_one(m).err2
    }
}

/// Leading singular triple of `m` from its full SVD.
///
/// The phase of the pair is fixed so that the first nonzero entry of `u` is
/// real and positive. A zero matrix yields `s = 0` with canonical basis
/// vectors.
pub fn best_rank_one(m: &ComplexMatrix) -> RankOne {
    assert!(m.rows() > 0 && m.cols() > 0, "best_rank_one of an empty matrix");
    let e1 = |n: usize| {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[0] = C64::new(1.0, 0.0);
        v
    };
    if m.as_slice().iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return RankOne {
            u: e1(m.rows()),
            s: 0.0,
            v: e1(m.cols()),
            err2: 0.0,
        };
    }
    let Svd {
        singular_values,
        mut u,
        mut v,
    } = svd(m);
    let s = singular_values[0];
    let err2: f64 = singular_values[1..].iter().map(|x| x * x).sum();
    let mut u = std::mem::take(&mut u[0]);
    let mut v = std::mem::take(&mut v[0]);
    let max_mod = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(first) = u.iter().find(|z| z.norm() > 1e-12 * max_mod) {
        let phase = first.conj() / first.norm();
        u.iter_mut().for_each(|z| *z *= phase);
        v.iter_mut().for_each(|z| *z *= phase);
    }
    RankOne { u, s, v, err2 }
}
