//! Size-constrained k-means: every cluster receives exactly the same number
//! of points. The assignment step is an exact minimum-cost transportation
//! problem (unit supplies, equal demands), solved as an assignment problem
//! over `k·size` cluster slots.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Upper bound on assignment/update rounds.
pub const MAX_ROUNDS: usize = 100;

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, `O(n³)`). Returns `assign[row] = col`.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    hungarian(n, |i, j| cost[(i, j)])
}

fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // One-based internal arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    assign
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|d| {
            let x = points[(i, d)] - centroids[(c, d)];
            x * x
        })
        .sum()
}

/// Assigns every point (row of `points`) to a centroid (row of `centroids`)
/// so that each centroid gets exactly `size` points and the total squared
/// distance is minimal. Returns the labels and that total.
pub fn constrained_assignment(points: &DMatrix<f64>, centroids: &DMatrix<f64>, size: usize) -> Result<(Vec<usize>, f64)> {
    let n = points.nrows();
    let k = centroids.nrows();
    if k * size != n || points.ncols() != centroids.ncols() {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot fill {k} clusters of size {size}"
        )));
    }
    let dist = DMatrix::from_fn(n, k, |i, c| sq_dist(points, i, centroids, c));
    // Slot `s` belongs to cluster `s / size`.
    let assign = hungarian(n, |i, s| dist[(i, s / size)]);
    let labels: Vec<usize> = assign.iter().map(|&s| s / size).collect();
    let total = labels.iter().enumerate().map(|(i, &c)| dist[(i, c)]).sum();
    Ok((labels, total))
}

fn kmeans_plus_plus<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points, i, points, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // Every point coincides with a center: pick among the rest uniformly.
            let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            rest[rng.random_range(0..rest.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, points, next));
        }
    }
    DMatrix::from_fn(k, points.ncols(), |c, d| points[(chosen[c], d)])
}

/// Equal-size k-means seeded by k-means++, drawing from `rng`.
///
/// Alternates exact constrained assignment and centroid updates until the
/// assignment repeats or [`MAX_ROUNDS`] is reached. Returns `k` clusters of
/// exactly `size` point indices each, every cluster sorted.
pub fn balanced_kmeans_with_rng<R: Rng>(points: &DMatrix<f64>, k: usize, size: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let n = points.nrows();
    if k == 0 || size == 0 || k * size != n {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot be split into {k} clusters of size {size}"
        )));
    }
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..MAX_ROUNDS {
        let (next, _) = constrained_assignment(points, &centroids, size)?;
        if next == labels {
            break;
        }
        labels = next;
        centroids.fill(0.0);
        for (i, &c) in labels.iter().enumerate() {
            for d in 0..points.ncols() {
                centroids[(c, d)] += points[(i, d)];
            }
        }
        centroids /= size as f64;
    }
    let mut clusters = vec![Vec::with_capacity(size); k];
    for (i, &c) in labels.iter().enumerate() {
        clusters[c].push(i);
    }
    Ok(clusters)
}

/// [`balanced_kmeans_with_rng`] with a fresh generator from `seed`.
pub fn balanced_kmeans(points: &DMatrix<f64>, k: usize, size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    balanced_kmeans_with_rng(points, k, size, &mut ChaCha8Rng::seed_from_u64(seed))
}
