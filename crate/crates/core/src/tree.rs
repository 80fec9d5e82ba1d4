//! Balanced binary cluster trees over `{0..N}`.
//!
//! A tree is stored as its canonical leaf order: the leaves read left to right
//! where, at every internal node, the child holding the smaller minimum comes
//! first. Level `m` nodes are then the aligned segments of length `N/2^m`, and
//! two trees are equal iff their canonical leaf orders are equal.
//!
//! A leaf order is canonical iff `order[p - lowbit(p)] < order[p]` for every
//! position `p > 0`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{log2_exact, Error, Result, TreeViolation};
use crate::permutation::Permutation;

/// Largest size accepted by [`enumerate_trees`].
pub const MAX_ENUMERATION_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterTree {
    order: Vec<usize>,
}

fn lowbit(p: usize) -> usize {
    p & p.wrapping_neg()
}

fn bit_reverse(x: usize, bits: usize) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS as usize - bits)
    }
}

/// Reorders segment halves so the leaf order becomes canonical.
fn canonicalize(order: &mut [usize]) {
    let n = order.len();
    let mut s = 2;
    while s <= n {
        let h = s / 2;
        for seg in order.chunks_exact_mut(s) {
            if seg[h] < seg[0] {
                seg.rotate_left(h);
            }
        }
        s *= 2;
    }
}

fn is_canonical(order: &[usize]) -> bool {
    (1..order.len()).all(|p| order[p - lowbit(p)] < order[p])
}

impl ClusterTree {
    /// Tree whose level-`m` nodes are the aligned segments of `order`.
    pub fn from_leaf_order(mut order: Vec<usize>) -> Result<Self> {
        log2_exact(order.len())?;
        Permutation::new(order.clone())?;
        canonicalize(&mut order);
        Ok(Self { order })
    }

    pub fn size(&self) -> usize {
        self.order.len()
    }

    /// Number of levels below the root, `L = log2 N`.
    pub fn depth(&self) -> usize {
        self.order.len().trailing_zeros() as usize
    }

    pub fn leaf_order(&self) -> &[usize] {
        &self.order
    }

    /// Sorted members of node `k` at level `m`; nodes are numbered in
    /// left-to-right order, so the parent of `(m, k)` is `(m - 1, k / 2)`.
    pub fn node(&self, m: usize, k: usize) -> Vec<usize> {
        let width = self.size() >> m;
        let mut v = self.order[k * width..(k + 1) * width].to_vec();
        v.sort_unstable();
        v
    }

    /// All nodes of level `m`, each sorted, left to right.
    pub fn level(&self, m: usize) -> Vec<Vec<usize>> {
        assert!(m <= self.depth(), "level {m} beyond depth {}", self.depth());
        (0..1 << m).map(|k| self.node(m, k)).collect()
    }

    /// The tree `σ(T)`: every index mapped through `σ`.
    pub fn relabel(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: format!("permutation of size {}", self.size()),
                found: format!("size {}", sigma.len()),
            });
        }
        let mut order: Vec<usize> = self.order.iter().map(|&i| sigma.apply(i)).collect();
        canonicalize(&mut order);
        Ok(Self { order })
    }

    pub fn to_json(&self) -> TreeJson {
        TreeJson {
            n: self.size(),
            levels: (0..=self.depth())
                .map(|m| {
                    self.level(m)
                        .into_iter()
                        .map(|s| s.into_iter().map(|i| i + 1).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(json: &TreeJson) -> Result<Self> {
        let l = log2_exact(json.n)?;
        if json.levels.len() != l + 1 {
            return Err(Error::InvalidArgument(format!(
                "tree of size {} needs {} levels, found {}",
                json.n,
                l + 1,
                json.levels.len()
            )));
        }
        let zero_based = |sets: &Vec<Vec<usize>>| -> Result<Vec<Vec<usize>>> {
            sets.iter()
                .map(|s| {
                    s.iter()
                        .map(|&i| {
                            i.checked_sub(1)
                                .ok_or_else(|| Error::InvalidArgument("tree indices are one-based".into()))
                        })
                        .collect()
                })
                .collect()
        };
        let mut partitions = BTreeMap::new();
        for (m, sets) in json.levels.iter().enumerate() {
            let sets = zero_based(sets)?;
            if m == 0 || m == l {
                crate::factorization::check_equal_partition(json.n, &sets, 1 << m, json.n >> m, "tree level")
                    .map_err(|_| Error::InvalidTree {
                        level: m,
                        reason: TreeViolation::Cardinality,
                    })?;
            } else {
                partitions.insert(m, sets);
            }
        }
        assemble_tree(json.n, &partitions)
    }
}

/// JSON form of a tree: `levels[m]` lists the level-`m` nodes as sorted
/// one-based index arrays, root first, singletons last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJson {
    pub n: usize,
    pub levels: Vec<Vec<Vec<usize>>>,
}

/// The canonical row tree `T^X_bf` and column tree `T^Ω_bf` of a butterfly
/// matrix of size `n`. Column nodes at level `ℓ` are contiguous blocks; row
/// nodes at level `L-ℓ` are the strided sets `{i + k·N/2^ℓ}`.
pub fn canonical_trees(n: usize) -> Result<(ClusterTree, ClusterTree)> {
    let l = log2_exact(n)?;
    let rows = ClusterTree {
        order: (0..n).map(|p| bit_reverse(p, l)).collect(),
    };
    let cols = ClusterTree {
        order: (0..n).collect(),
    };
    debug_assert!(is_canonical(&rows.order));
    Ok((rows, cols))
}

/// Builds a tree from its intermediate levels `1..L`, keyed by level.
///
/// The singleton level is implied. Fails with the first level, in increasing
/// order, whose nodes have the wrong sizes, do not partition the indices, or
/// are not nested in the level above.
pub fn assemble_tree(n: usize, partitions: &BTreeMap<usize, Vec<Vec<usize>>>) -> Result<ClusterTree> {
    let l = log2_exact(n)?;
    let expected: Vec<usize> = (1..l).collect();
    let given: Vec<usize> = partitions.keys().copied().collect();
    if given != expected {
        return Err(Error::InvalidArgument(format!(
            "expected partitions for levels {expected:?}, found {given:?}"
        )));
    }
    // owner[m][e]: index of the level-m node holding e.
    let mut owners: Vec<Vec<usize>> = vec![vec![0; n]];
    for (&m, sets) in partitions {
        let size = n >> m;
        if sets.len() != 1 << m || sets.iter().any(|s| s.len() != size) {
            return Err(Error::InvalidTree {
                level: m,
                reason: TreeViolation::Cardinality,
            });
        }
        let mut owner = vec![usize::MAX; n];
        for (k, s) in sets.iter().enumerate() {
            for &e in s {
                if e >= n || owner[e] != usize::MAX {
                    return Err(Error::InvalidTree {
                        level: m,
                        reason: TreeViolation::NotPartition,
                    });
                }
                owner[e] = k;
            }
        }
        let parent = &owners[m - 1];
        let nested = sets.iter().all(|s| s.iter().all(|&e| parent[e] == parent[s[0]]));
        if !nested {
            return Err(Error::InvalidTree {
                level: m,
                reason: TreeViolation::NotNested,
            });
        }
        owners.push(owner);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&e| (owners.iter().map(|o| o[e]).collect::<Vec<_>>(), e));
    canonicalize(&mut order);
    Ok(ClusterTree { order })
}

/// A pair `(P, Q)` with `σ_Q(T^X_bf) = T^X` and `σ_P(T^Ω_bf) = T^Ω`.
///
/// Each leaf gets the bit string of its root-to-leaf path (left child = 0).
/// Column leaves sit at the canonical position that reads this string
/// most-significant-bit first, row leaves at the one that reads it
/// least-significant-bit first.
pub fn representative_permutations(
    rows: &ClusterTree,
    cols: &ClusterTree,
) -> Result<(Permutation, Permutation)> {
    if rows.size() != cols.size() {
        return Err(Error::DimensionMismatch {
            expected: format!("trees of size {}", rows.size()),
            found: format!("{}", cols.size()),
        });
    }
    let l = rows.depth();
    let p = Permutation::new(cols.order.clone())?;
    let q = Permutation::new((0..rows.size()).map(|c| rows.order[bit_reverse(c, l)]).collect())?;
    Ok((p, q))
}

/// Number of distinct cluster trees on `n` indices:
/// `u_N = ½·C(N, N/2)·u_{N/2}²`, `u_2 = 1`.
pub fn count_trees(n: usize) -> Result<BigUint> {
    log2_exact(n)?;
    let mut u = BigUint::one();
    let mut m = 2;
    while m < n {
        m *= 2;
        u = binomial(m, m / 2) / 2u32 * &u * &u;
    }
    Ok(u)
}

fn binomial(n: usize, k: usize) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Streams canonical leaf orders in strictly increasing lexicographic order
/// without allocating per item.
#[derive(Debug, Clone)]
pub struct LeafOrderStream {
    order: Vec<usize>,
    used: u64,
    started: bool,
    done: bool,
}

impl LeafOrderStream {
    pub fn new(n: usize) -> Result<Self> {
        log2_exact(n)?;
        if n > 64 {
            return Err(Error::SizeOutOfRange {
                size: n,
                reason: "leaf-order streams are limited to 64 indices",
            });
        }
        Ok(Self {
            order: vec![0; n],
            used: 0,
            started: false,
            done: false,
        })
    }

    /// The leaf order produced by the last successful [`advance`](Self::advance).
    pub fn current(&self) -> &[usize] {
        &self.order
    }

    fn free_above(&self, v: usize) -> u32 {
        let n = self.order.len();
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let above = if v + 1 >= 64 { 0 } else { all & !((1u64 << (v + 1)) - 1) };
        (above & !self.used).count_ones()
    }

    /// Smallest admissible value at position `p` strictly above `floor`.
    fn next_value(&self, p: usize, floor: usize) -> Option<usize> {
        let n = self.order.len();
        let need = lowbit(p) as u32 - 1;
        (floor + 1..n).find(|&v| self.used & (1 << v) == 0 && self.free_above(v) >= need)
    }

    fn fill_from(&mut self, start: usize) {
        for p in start..self.order.len() {
            let anchor = self.order[p - lowbit(p)];
            let v = self
                .next_value(p, anchor)
                .expect("greedy completion of a feasible prefix cannot fail");
            self.order[p] = v;
            self.used |= 1 << v;
        }
    }

    /// Moves to the next leaf order; returns `false` once exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        let n = self.order.len();
        if !self.started {
            self.started = true;
            self.order[0] = 0;
            self.used = 1;
            self.fill_from(1);
            return true;
        }
        for p in (1..n).rev() {
            let cur = self.order[p];
            self.used &= !(1 << cur);
            let anchor = self.order[p - lowbit(p)];
            if let Some(v) = self.next_value(p, cur.max(anchor)) {
                self.order[p] = v;
                self.used |= 1 << v;
                self.fill_from(p + 1);
                return true;
            }
        }
        self.done = true;
        false
    }
}

/// Every cluster tree on `n <= 16` indices, each exactly once.
pub fn enumerate_trees(n: usize) -> Result<impl Iterator<Item = ClusterTree>> {
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::SizeOutOfRange {
            size: n,
            reason: "tree enumeration is limited to 16 indices",
        });
    }
    let mut stream = LeafOrderStream::new(n)?;
    Ok(std::iter::from_fn(move || {
        stream.advance().then(|| ClusterTree {
            order: stream.current().to_vec(),
        })
    }))
}

/// True when `order` is the canonical leaf order of some tree.
pub fn is_canonical_leaf_order(order: &[usize]) -> bool {
    order.len().is_power_of_two() && Permutation::new(order.to_vec()).is_ok() && is_canonical(order)
}
