//! Targets used by the experiments: random orthogonal butterflies, butterflies
//! with Gaussian factors, the DFT matrix, and permuted noisy targets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factorization::ButterflyFactors;
use crate::matrix::{ComplexMatrix, C64};
use crate::permutation::Permutation;
use crate::support::butterfly_support;

fn check_levels(levels: usize) -> Result<usize> {
    if !(1..usize::BITS as usize - 1).contains(&levels) {
        return Err(Error::InvalidArgument(format!("unsupported level count {levels}")));
    }
    Ok(1 << levels)
}

/// Random orthogonal butterfly: every factor is made of `N/2` independent
/// Givens rotations with angles uniform in `[0, 2π)`.
///
/// Rotations are drawn factor by factor, and within a factor by increasing
/// leading index of the rotated pair.
pub fn random_orthogonal_butterfly(levels: usize, seed: u64) -> Result<ButterflyFactors> {
    let n = check_levels(levels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = (1..=levels)
        .map(|level| {
            let bit = n >> level;
            let mut f = ComplexMatrix::zeros(n, n);
            for a in (0..n).filter(|a| a & bit == 0) {
                let b = a | bit;
                let theta: f64 = rng.random::<f64>() * 2.0 * PI;
                let (s, c) = theta.sin_cos();
                f[(a, a)] = C64::new(c, 0.0);
                f[(a, b)] = C64::new(-s, 0.0);
                f[(b, a)] = C64::new(s, 0.0);
                f[(b, b)] = C64::new(c, 0.0);
            }
            f
        })
        .collect();
    ButterflyFactors::new(factors)
}

/// Butterfly whose factors have i.i.d. standard normal real entries on their
/// supports, drawn in row-major order factor by factor.
pub fn random_gaussian_butterfly(levels: usize, seed: u64) -> Result<ButterflyFactors> {
    let n = check_levels(levels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = (1..=levels)
        .map(|level| {
            let mask = butterfly_support(n, level)?;
            let mut f = ComplexMatrix::zeros(n, n);
            for (r, c) in mask.entries() {
                f[(r, c)] = C64::new(rng.sample(StandardNormal), 0.0);
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    ButterflyFactors::new(factors)
}

/// Unnormalized DFT matrix, entry `(k, l) = exp(-2πi·k·l/N)`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    crate::error::log2_exact(n)?;
    Ok(ComplexMatrix::from_fn(n, n, |k, l| {
        // Reduce the exponent first so large products keep full accuracy.
        let e = (k * l) % n;
        C64::from_polar(1.0, -2.0 * PI * e as f64 / n as f64)
    }))
}

/// `Qᵀ Ã P + ε (‖Ã‖_F / ‖N‖_F) N` with `N` an i.i.d. standard normal real
/// matrix drawn row-major from `seed`. `ε = 0` adds nothing.
pub fn make_target(
    base: &ComplexMatrix,
    p: &Permutation,
    q: &Permutation,
    eps: f64,
    seed: u64,
) -> Result<ComplexMatrix> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {eps} must be finite and nonnegative")));
    }
    let permuted = p.inverse().permute_cols(&q.inverse().permute_rows(base)?)?;
    if eps == 0.0 {
        return Ok(permuted);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = ComplexMatrix::from_fn(base.rows(), base.cols(), |_, _| {
        C64::new(rng.sample(StandardNormal), 0.0)
    });
    let scale = eps * base.frobenius_norm() / noise.frobenius_norm();
    permuted.add(&noise.scale(scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_defect(m: &ComplexMatrix) -> f64 {
        m.adjoint()
            .matmul(m)
            .unwrap()
            .sub(&ComplexMatrix::identity(m.rows()))
            .unwrap()
            .frobenius_norm()
    }

    #[test]
    fn orthogonal_butterfly_factors() {
        let bf = random_orthogonal_butterfly(5, 11).unwrap();
        for (k, f) in bf.factors().iter().enumerate() {
            assert!(gram_defect(f) < 1e-12);
            assert!(butterfly_support(32, k + 1).unwrap().admits(f));
        }
        assert!(gram_defect(&bf.product()) < 1e-10);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_orthogonal_butterfly(4, 3).unwrap(), random_orthogonal_butterfly(4, 3).unwrap());
        assert_ne!(random_orthogonal_butterfly(4, 3).unwrap(), random_orthogonal_butterfly(4, 4).unwrap());
        assert_eq!(random_gaussian_butterfly(3, 3).unwrap(), random_gaussian_butterfly(3, 3).unwrap());
    }

    #[test]
    fn dft_small_cases() {
        let f2 = dft_matrix(2).unwrap();
        let want = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]]);
        assert!(f2.sub(&want).unwrap().frobenius_norm() < 1e-15);
        let f4 = dft_matrix(4).unwrap();
        assert!((f4[(1, 1)] - C64::new(0.0, -1.0)).norm() < 1e-15);
        for n in [4, 16, 64] {
            let f = dft_matrix(n).unwrap();
            let g = f.matmul(&f.conj()).unwrap().scale(1.0 / n as f64);
            assert!(g.sub(&ComplexMatrix::identity(n)).unwrap().frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn target_without_noise_is_exact_permutation() {
        let base = random_orthogonal_butterfly(3, 1).unwrap().product();
        let p = Permutation::random(8, 5);
        let q = Permutation::random(8, 6);
        let a = make_target(&base, &p, &q, 0.0, 9).unwrap();
        let want = q.matrix().transpose().matmul(&base).unwrap().matmul(&p.matrix()).unwrap();
        assert_eq!(a, want);
        let id = Permutation::identity(8);
        assert_eq!(make_target(&base, &id, &id, 0.0, 9).unwrap(), base);
    }

    #[test]
    fn target_noise_has_requested_relative_level() {
        let base = dft_matrix(16).unwrap();
        let p = Permutation::random(16, 1);
        let q = Permutation::random(16, 2);
        let clean = make_target(&base, &p, &q, 0.0, 0).unwrap();
        for eps in [0.01, 0.03, 0.1] {
            let a = make_target(&base, &p, &q, eps, 42).unwrap();
            let rel = a.sub(&clean).unwrap().frobenius_norm() / base.frobenius_norm();
            assert!((rel - eps).abs() < 1e-12, "{rel} vs {eps}");
            // Real noise only.
            for r in 0..16 {
                for c in 0..16 {
                    assert_eq!((a[(r, c)] - clean[(r, c)]).im, 0.0);
                }
            }
        }
        assert!(make_target(&base, &p, &q, -1.0, 0).is_err());
    }
}
