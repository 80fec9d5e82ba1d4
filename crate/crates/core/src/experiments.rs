//! Batch experiments: exhaustive tree search at `N = 8`, success-rate tables,
//! noise-scaling curves and partition-quality comparisons.
//!
//! Every random draw is derived from a base seed with [`derive_seed`], keyed
//! by what is being drawn, so any single instance can be regenerated in
//! isolation and outputs do not depend on execution order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{log2_exact, Error, Result};
use crate::factorization::{
    canonical_level_partition, hierarchical_factorize, partition_objective, LevelPartition,
};
use crate::generators::{dft_matrix, make_target, random_gaussian_butterfly, random_orthogonal_butterfly};
use crate::identify::{identify, IdentifyConfig};
use crate::matrix::ComplexMatrix;
use crate::partition::{alternating_partition, random_partition};
use crate::permutation::Permutation;
use crate::tree::{canonical_trees, enumerate_trees, representative_permutations, ClusterTree};

/// Largest size accepted without `large`.
pub const DESK_MAX_SIZE: usize = 64;
/// Largest size accepted at all.
pub const LARGE_MAX_SIZE: usize = 256;
/// Random partition pairs drawn for the partition-quality baseline.
pub const BASELINE_DRAWS: usize = 1000;

/// Matrix family of the clean target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RandomButterfly,
    Dft,
}

impl Family {
    fn tag(self) -> u64 {
        match self {
            Family::RandomButterfly => 1,
            Family::Dft => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::RandomButterfly => "random-butterfly",
            Family::Dft => "dft",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-butterfly" => Ok(Family::RandomButterfly),
            "dft" => Ok(Family::Dft),
            other => Err(Error::InvalidArgument(format!(
                "unknown family `{other}` (expected random-butterfly or dft)"
            ))),
        }
    }
}

/// What a derived seed is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Base = 1,
    ColPerm = 2,
    RowPerm = 3,
    Noise = 4,
    Baseline = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `words` into `base` with SplitMix64: `h ← splitmix64(h ⊕ w)` for
/// each word in turn.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(base), |h, &w| splitmix64(h ^ w))
}

/// Seed of one stream of one instance.
///
/// The clean matrix and both permutations depend on `(family, n, instance)`
/// only, so every noise level perturbs the same permuted matrix; the noise
/// additionally depends on the bit pattern of `eps`.
pub fn instance_seed(base: u64, family: Family, n: usize, instance: usize, stream: Stream, eps: f64) -> u64 {
    let mut words = vec![family.tag(), n as u64, instance as u64, stream as u64];
    if stream == Stream::Noise {
        words.push(eps.to_bits());
    }
    derive_seed(base, &words)
}

/// Settings shared by the batch experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub families: Vec<Family>,
    pub sizes: Vec<usize>,
    pub eps: Vec<f64>,
    pub instances: usize,
    pub identify: IdentifyConfig,
    pub base_seed: u64,
    /// Allows sizes above [`DESK_MAX_SIZE`].
    pub large: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            families: vec![Family::RandomButterfly],
            sizes: vec![8, 16, 32],
            eps: vec![0.0, 0.01, 0.03, 0.1],
            instances: 20,
            identify: IdentifyConfig::default(),
            base_seed: 0,
            large: false,
        }
    }
}

/// Checks a single size against the desk-scale envelope.
pub fn check_size(n: usize, large: bool) -> Result<()> {
    log2_exact(n)?;
    if n < 4 {
        return Err(Error::SizeOutOfRange {
            size: n,
            reason: "experiments need N >= 4",
        });
    }
    if n > LARGE_MAX_SIZE {
        return Err(Error::SizeOutOfRange {
            size: n,
            reason: "N above 256 is outside the supported range",
        });
    }
    if n > DESK_MAX_SIZE && !large {
        return Err(Error::SizeOutOfRange {
            size: n,
            reason: "N above 64 requires --large",
        });
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.sizes.is_empty() || self.eps.is_empty() {
            return Err(Error::InvalidArgument("families, sizes and eps must be nonempty".into()));
        }
        for &n in &self.sizes {
            check_size(n, self.large)?;
        }
        if let Some(e) = self.eps.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::InvalidArgument(format!("noise level {e} must be finite and >= 0")));
        }
        if self.instances == 0 {
            return Err(Error::InvalidArgument("at least one instance is required".into()));
        }
        validate_identify(&self.identify)
    }
}

pub fn validate_identify(cfg: &IdentifyConfig) -> Result<()> {
    if cfg.alphas.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("alpha grid and seed list must be nonempty".into()));
    }
    if let Some(a) = cfg.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidArgument(format!("contrast exponent {a} must be finite and > 0")));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    Ok(())
}

fn bit_reversal(n: usize) -> Permutation {
    let bits = n.trailing_zeros();
    Permutation::new((0..n).map(|c| c.reverse_bits() >> (usize::BITS - bits)).collect())
        .expect("bit reversal is a permutation")
}

/// One generated problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: Family,
    pub index: usize,
    pub eps: f64,
    /// Clean matrix before permutation and noise.
    pub clean: ComplexMatrix,
    pub target: ComplexMatrix,
    /// Permutations used to scramble `clean`.
    pub p: Permutation,
    pub q: Permutation,
    /// Permutations under which the noiseless target is exactly a butterfly
    /// matrix. Equal to `(p, q)` except for the DFT, whose columns also need
    /// a bit reversal.
    pub p_true: Permutation,
    pub q_true: Permutation,
}

/// Builds instance `index` of `family` at size `n` and noise `eps`.
pub fn generate_instance(family: Family, n: usize, eps: f64, base_seed: u64, index: usize) -> Result<Instance> {
    let l = log2_exact(n)?;
    let seed = |s| instance_seed(base_seed, family, n, index, s, eps);
    let clean = match family {
        Family::RandomButterfly => random_orthogonal_butterfly(l, seed(Stream::Base))?.product(),
        Family::Dft => dft_matrix(n)?,
    };
    let p = Permutation::random(n, seed(Stream::ColPerm));
    let q = Permutation::random(n, seed(Stream::RowPerm));
    let target = make_target(&clean, &p, &q, eps, seed(Stream::Noise))?;
    let p_true = match family {
        Family::RandomButterfly => p.clone(),
        Family::Dft => p.compose(&bit_reversal(n)),
    };
    Ok(Instance {
        family,
        index,
        eps,
        clean,
        target,
        q_true: q.clone(),
        p,
        q,
        p_true,
    })
}

/// Outcome of identification on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub family: Family,
    pub n: usize,
    pub eps: f64,
    pub instance: usize,
    pub success: bool,
    /// `E_bf/‖A‖_F` with the identified permutations; empty on failure.
    pub relative_error: Option<f64>,
    /// `E_bf/‖A‖_F` with the true permutations.
    pub known_relative_error: f64,
}

/// Runs identification on every `(family, N, ε, instance)` of `cfg`. Records
/// come back sorted by that key.
pub fn run_instances(cfg: &ExperimentConfig) -> Result<Vec<InstanceRecord>> {
    cfg.validate()?;
    let mut keys = Vec::new();
    for &family in &cfg.families {
        for &n in &cfg.sizes {
            for &eps in &cfg.eps {
                for instance in 0..cfg.instances {
                    keys.push((family, n, eps, instance));
                }
            }
        }
    }
    keys.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)));
    keys.par_iter()
        .map(|&(family, n, eps, instance)| {
            let inst = generate_instance(family, n, eps, cfg.base_seed, instance)?;
            let norm = inst.target.frobenius_norm();
            let known = hierarchical_factorize(&inst.target, &inst.p_true, &inst.q_true)?.e_bf / norm;
            let report = identify(&inst.target, &cfg.identify)?;
            Ok(InstanceRecord {
                family,
                n,
                eps,
                instance,
                success: report.is_success(),
                relative_error: report.relative_error,
                known_relative_error: known,
            })
        })
        .collect()
}

/// One line of the success-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub family: Family,
    pub n: usize,
    pub eps: f64,
    pub instances: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over successful instances; empty when none succeeded.
    pub mean_relative_error: Option<f64>,
}

fn groups(records: &[InstanceRecord]) -> Vec<&[InstanceRecord]> {
    records
        .chunk_by(|a, b| a.family == b.family && a.n == b.n && a.eps.to_bits() == b.eps.to_bits())
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Aggregates sorted records per `(family, N, ε)`.
pub fn success_table(records: &[InstanceRecord]) -> Vec<SuccessRow> {
    groups(records)
        .into_iter()
        .map(|g| {
            let errs: Vec<f64> = g.iter().filter_map(|r| r.relative_error).collect();
            SuccessRow {
                family: g[0].family,
                n: g[0].n,
                eps: g[0].eps,
                instances: g.len(),
                successes: errs.len(),
                success_rate: errs.len() as f64 / g.len() as f64,
                mean_relative_error: mean(&errs),
            }
        })
        .collect()
}

pub fn run_success_table(cfg: &ExperimentConfig) -> Result<Vec<SuccessRow>> {
    Ok(success_table(&run_instances(cfg)?))
}

/// One point of the noise-scaling curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub family: Family,
    pub n: usize,
    pub eps: f64,
    pub successes: usize,
    /// Mean of `(E_bf/‖A‖_F)/ε` over successful instances.
    pub mean_relative_error_over_eps: Option<f64>,
    /// Sample standard deviation of the same ratio (0 for one success).
    pub std_relative_error_over_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCurve {
    pub rows: Vec<NoiseRow>,
    /// Zero noise levels left out of the curve.
    pub skipped_eps: Vec<f64>,
}

/// Aggregates sorted records into the noise curve, skipping `ε = 0`.
pub fn noise_curve(records: &[InstanceRecord]) -> Vec<NoiseRow> {
    groups(records)
        .into_iter()
        .filter(|g| g[0].eps > 0.0)
        .map(|g| {
            let eps = g[0].eps;
            let ratios: Vec<f64> = g.iter().filter_map(|r| r.relative_error).map(|e| e / eps).collect();
            let m = mean(&ratios);
            let std = m.map(|m| {
                if ratios.len() < 2 {
                    0.0
                } else {
                    (ratios.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (ratios.len() - 1) as f64).sqrt()
                }
            });
            NoiseRow {
                family: g[0].family,
                n: g[0].n,
                eps,
                successes: ratios.len(),
                mean_relative_error_over_eps: m,
                std_relative_error_over_eps: std,
            }
        })
        .collect()
}

pub fn run_noise_curve(cfg: &ExperimentConfig) -> Result<NoiseCurve> {
    let positive: Vec<f64> = cfg.eps.iter().copied().filter(|&e| e > 0.0).collect();
    let skipped_eps = cfg.eps.iter().copied().filter(|&e| e == 0.0).collect();
    if positive.is_empty() {
        cfg.validate()?;
        return Ok(NoiseCurve {
            rows: Vec::new(),
            skipped_eps,
        });
    }
    let cfg = ExperimentConfig {
        eps: positive,
        ..cfg.clone()
    };
    Ok(NoiseCurve {
        rows: noise_curve(&run_instances(&cfg)?),
        skipped_eps,
    })
}

/// Partition-quality comparison at one level. Objectives are divided by
/// `‖A‖_F²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionQualityRow {
    pub family: Family,
    pub n: usize,
    pub eps: f64,
    pub level: usize,
    pub runs: usize,
    pub alg_min: f64,
    pub alg_median: f64,
    pub alg_max: f64,
    /// Objective of the true partitions.
    pub oracle: f64,
    /// Smallest objective over [`BASELINE_DRAWS`] random partition pairs.
    pub random_baseline: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// The true level-`ℓ` partitions of an instance: canonical sets mapped
/// through the true permutations.
pub fn true_partition(inst: &Instance, level: usize) -> Result<LevelPartition> {
    let n = inst.target.rows();
    let canon = canonical_level_partition(n, level)?;
    let map = |sets: &[Vec<usize>], perm: &Permutation| -> Vec<Vec<usize>> {
        sets.iter().map(|s| s.iter().map(|&i| perm.apply(i)).collect()).collect()
    };
    let mut part = LevelPartition {
        level,
        row_sets: map(&canon.row_sets, &inst.q_true),
        col_sets: map(&canon.col_sets, &inst.p_true),
    };
    part.canonicalize();
    Ok(part)
}

/// For every level of instance 0 of each `(family, N, ε)`: the spread of the
/// alternating partition over the `(α, seed)` grid, the true partitions,
/// and the best of [`BASELINE_DRAWS`] random partitions.
pub fn run_partition_quality(cfg: &ExperimentConfig) -> Result<Vec<PartitionQualityRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut families = cfg.families.clone();
    families.sort();
    let mut sizes = cfg.sizes.clone();
    sizes.sort();
    let mut eps_list = cfg.eps.clone();
    eps_list.sort_by(f64::total_cmp);
    for &family in &families {
        for &n in &sizes {
            for &eps in &eps_list {
                let inst = generate_instance(family, n, eps, cfg.base_seed, 0)?;
                let a = &inst.target;
                let scale = a.norm_sqr();
                let l = log2_exact(n)?;
                for level in 1..l {
                    let grid: Vec<(f64, u64)> = cfg
                        .identify
                        .alphas
                        .iter()
                        .flat_map(|&al| cfg.identify.seeds.iter().map(move |&s| (al, s)))
                        .collect();
                    let mut objs = grid
                        .par_iter()
                        .map(|&(al, s)| Ok(alternating_partition(a, level, al, s, cfg.identify.iterations)?.objective / scale))
                        .collect::<Result<Vec<f64>>>()?;
                    objs.sort_by(f64::total_cmp);
                    let oracle = partition_objective(a, &true_partition(&inst, level)?)? / scale;
                    let base_seed = instance_seed(cfg.base_seed, family, n, level, Stream::Baseline, eps);
                    let random_baseline = random_baseline(a, level, base_seed)? / scale;
                    rows.push(PartitionQualityRow {
                        family,
                        n,
                        eps,
                        level,
                        runs: objs.len(),
                        alg_min: objs[0],
                        alg_median: median(&objs),
                        alg_max: objs[objs.len() - 1],
                        oracle,
                        random_baseline,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Smallest objective over [`BASELINE_DRAWS`] uniformly random pairs of
/// equal-size partitions at `level`.
pub fn random_baseline(a: &ComplexMatrix, level: usize, seed: u64) -> Result<f64> {
    let n = a.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<LevelPartition> = (0..BASELINE_DRAWS)
        .map(|_| LevelPartition {
            level,
            row_sets: random_partition(n, n >> level, &mut rng),
            col_sets: random_partition(n, 1 << level, &mut rng),
        })
        .collect();
    let objs = draws
        .par_iter()
        .map(|p| partition_objective(a, p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(objs.into_iter().fold(f64::INFINITY, f64::min))
}

/// One tree pair of the exhaustive search. Tree ids are one-based positions
/// in the lexicographic enumeration of leaf orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveRow {
    pub row_tree_id: usize,
    pub col_tree_id: usize,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    /// Sorted by ascending error, then by ids.
    pub rows: Vec<ExhaustiveRow>,
    /// Ids of the trees the target was built from.
    pub true_row_tree_id: usize,
    pub true_col_tree_id: usize,
}

/// Size of the exhaustive search.
pub const EXHAUSTIVE_SIZE: usize = 8;

/// Factorizes a noiseless permuted butterfly matrix with Gaussian factors
/// under every pair of cluster trees of size 8.
pub fn run_exhaustive(n: usize, seed: u64) -> Result<ExhaustiveResult> {
    if n != EXHAUSTIVE_SIZE {
        return Err(Error::SizeOutOfRange {
            size: n,
            reason: "the exhaustive search is limited to N = 8",
        });
    }
    let l = log2_exact(n)?;
    let family = Family::RandomButterfly;
    let s = |stream| instance_seed(seed, family, n, 0, stream, 0.0);
    let clean = random_gaussian_butterfly(l, s(Stream::Base))?.product();
    let p = Permutation::random(n, s(Stream::ColPerm));
    let q = Permutation::random(n, s(Stream::RowPerm));
    let a = make_target(&clean, &p, &q, 0.0, 0)?;
    let norm = a.frobenius_norm();

    let trees: Vec<ClusterTree> = enumerate_trees(n)?.collect();
    let (tx, tw) = canonical_trees(n)?;
    let id_of = |t: &ClusterTree| trees.iter().position(|u| u == t).expect("enumeration is complete") + 1;
    let true_row_tree_id = id_of(&tx.relabel(&q)?);
    let true_col_tree_id = id_of(&tw.relabel(&p)?);
    let qs = trees
        .iter()
        .map(|t| Ok(representative_permutations(t, &tw)?.1))
        .collect::<Result<Vec<_>>>()?;
    let ps = trees
        .iter()
        .map(|t| Ok(representative_permutations(&tx, t)?.0))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = (0..trees.len())
        .into_par_iter()
        .map(|i| {
            (0..trees.len())
                .map(|j| {
                    Ok(ExhaustiveRow {
                        row_tree_id: i + 1,
                        col_tree_id: j + 1,
                        relative_error: hierarchical_factorize(&a, &ps[j], &qs[i])?.e_bf / norm,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    rows.sort_by(|x, y| {
        x.relative_error
            .total_cmp(&y.relative_error)
            .then((x.row_tree_id, x.col_tree_id).cmp(&(y.row_tree_id, y.col_tree_id)))
    });
    Ok(ExhaustiveResult {
        rows,
        true_row_tree_id,
        true_col_tree_id,
    })
}

/// Writes `rows` as CSV with a header, even when empty.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], header: &[&str], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub const INSTANCE_HEADER: &[&str] = &[
    "family",
    "n",
    "eps",
    "instance",
    "success",
    "relative_error",
    "known_relative_error",
];
pub const SUCCESS_HEADER: &[&str] = &[
    "family",
    "n",
    "eps",
    "instances",
    "successes",
    "success_rate",
    "mean_relative_error",
];
pub const NOISE_HEADER: &[&str] = &[
    "family",
    "n",
    "eps",
    "successes",
    "mean_relative_error_over_eps",
    "std_relative_error_over_eps",
];
pub const PARTITION_QUALITY_HEADER: &[&str] = &[
    "family",
    "n",
    "eps",
    "level",
    "runs",
    "alg_min",
    "alg_median",
    "alg_max",
    "oracle",
    "random_baseline",
];
pub const EXHAUSTIVE_HEADER: &[&str] = &["row_tree_id", "col_tree_id", "relative_error"];
