//! Per-level hyperparameter sweep, tree assembly and validation, and the
//! final butterfly factorization with recovered permutations.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{log2_exact, Error, Result, TreeViolation};
use crate::factorization::{hierarchical_factorize, ButterflyFactors, LevelPartition};
use crate::matrix::ComplexMatrix;
use crate::partition::{alternating_partition, DEFAULT_ITERATIONS};
use crate::permutation::Permutation;
use crate::tree::{assemble_tree, representative_permutations, ClusterTree, TreeJson};

/// Sweep grid for [`identify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyConfig {
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            alphas: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
            seeds: (0..5).collect(),
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSide {
    Rows,
    Cols,
}

/// Best run of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub alpha: f64,
    pub seed: u64,
    /// `(alpha index, seed index)` of the winning run.
    pub grid_index: (usize, usize),
    pub objective: f64,
    pub partition: LevelPartition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeFailure {
    pub tree: TreeSide,
    /// Tree level (not partition level) of the first violation.
    pub level: usize,
    pub reason: TreeViolation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub partition_secs: f64,
    pub assemble_secs: f64,
    pub factorize_secs: f64,
}

/// Outcome of [`identify`]. Success carries both trees, the chosen
/// permutations and the factorization; failure lists the invalid trees.
#[derive(Debug, Clone)]
pub struct IdentificationReport {
    pub status: Status,
    pub levels: Vec<LevelResult>,
    pub row_tree: Option<ClusterTree>,
    pub col_tree: Option<ClusterTree>,
    pub failures: Vec<TreeFailure>,
    pub p: Option<Permutation>,
    pub q: Option<Permutation>,
    pub factors: Option<ButterflyFactors>,
    pub e_bf: Option<f64>,
    pub relative_error: Option<f64>,
    pub timings: Timings,
}

impl IdentificationReport {
    pub fn is_success(&self) -> bool {
        self.status == Status::Success
    }

    /// Serializable form; all indices are one-based.
    pub fn to_json(&self) -> ReportJson {
        let one_based = |sets: &[Vec<usize>]| -> Vec<Vec<usize>> {
            sets.iter().map(|s| s.iter().map(|i| i + 1).collect()).collect()
        };
        ReportJson {
            status: self.status,
            levels: self
                .levels
                .iter()
                .map(|lr| LevelJson {
                    level: lr.level,
                    alpha: lr.alpha,
                    seed: lr.seed,
                    objective: lr.objective,
                    row_sets: one_based(&lr.partition.row_sets),
                    col_sets: one_based(&lr.partition.col_sets),
                })
                .collect(),
            row_tree: self.row_tree.as_ref().map(ClusterTree::to_json),
            col_tree: self.col_tree.as_ref().map(ClusterTree::to_json),
            failures: self.failures.clone(),
            p: self.p.as_ref().map(|p| p.images().iter().map(|i| i + 1).collect()),
            q: self.q.as_ref().map(|q| q.images().iter().map(|i| i + 1).collect()),
            e_bf: self.e_bf,
            relative_error: self.relative_error,
            timings: self.timings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelJson {
    pub level: usize,
    pub alpha: f64,
    pub seed: u64,
    pub objective: f64,
    pub row_sets: Vec<Vec<usize>>,
    pub col_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub status: Status,
    pub levels: Vec<LevelJson>,
    pub row_tree: Option<TreeJson>,
    pub col_tree: Option<TreeJson>,
    pub failures: Vec<TreeFailure>,
    pub p: Option<Vec<usize>>,
    pub q: Option<Vec<usize>>,
    pub e_bf: Option<f64>,
    pub relative_error: Option<f64>,
    pub timings: Timings,
}

/// Runs the alternating partition for every `(level, alpha, seed)` and keeps,
/// per level, the run with the smallest objective (earliest grid position on
/// ties).
pub fn sweep_levels(a: &ComplexMatrix, cfg: &IdentifyConfig) -> Result<Vec<LevelResult>> {
    let l = log2_exact(a.rows())?;
    let jobs: Vec<(usize, usize, usize)> = (1..l)
        .flat_map(|level| {
            (0..cfg.alphas.len()).flat_map(move |k| (0..cfg.seeds.len()).map(move |m| (level, k, m)))
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(level, k, m)| alternating_partition(a, level, cfg.alphas[k], cfg.seeds[m], cfg.iterations))
        .collect::<Result<Vec<_>>>()?;
    let mut best: BTreeMap<usize, LevelResult> = BTreeMap::new();
    for (&(level, k, m), run) in jobs.iter().zip(runs) {
        let better = best.get(&level).is_none_or(|b| run.objective < b.objective);
        if better {
            best.insert(
                level,
                LevelResult {
                    level,
                    alpha: cfg.alphas[k],
                    seed: cfg.seeds[m],
                    grid_index: (k, m),
                    objective: run.objective,
                    partition: run.partition,
                },
            );
        }
    }
    Ok(best.into_values().collect())
}

fn tree_failure(side: TreeSide, err: Error) -> TreeFailure {
    match err {
        Error::InvalidTree { level, reason } => TreeFailure {
            tree: side,
            level,
            reason,
        },
        other => unreachable!("assembling well-formed partitions failed unexpectedly: {other}"),
    }
}

/// Identifies the row and column cluster trees of `a` and, when both are
/// valid, factorizes `a` with a representative pair of permutations.
pub fn identify(a: &ComplexMatrix, cfg: &IdentifyConfig) -> Result<IdentificationReport> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    let l = log2_exact(n)?;
    if l < 2 {
        return Err(Error::SizeOutOfRange {
            size: n,
            reason: "identification needs at least 4 indices",
        });
    }
    if cfg.alphas.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }

    let t0 = Instant::now();
    let levels = sweep_levels(a, cfg)?;
    let partition_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let row_parts = levels
        .iter()
        .map(|lr| (l - lr.level, lr.partition.row_sets.clone()))
        .collect();
    let col_parts = levels
        .iter()
        .map(|lr| (lr.level, lr.partition.col_sets.clone()))
        .collect();
    let row_tree = assemble_tree(n, &row_parts);
    let col_tree = assemble_tree(n, &col_parts);
    let assemble_secs = t1.elapsed().as_secs_f64();

    let mut report = IdentificationReport {
        status: Status::Failure,
        levels,
        row_tree: None,
        col_tree: None,
        failures: Vec::new(),
        p: None,
        q: None,
        factors: None,
        e_bf: None,
        relative_error: None,
        timings: Timings {
            partition_secs,
            assemble_secs,
            factorize_secs: 0.0,
        },
    };
    let (row_tree, col_tree) = match (row_tree, col_tree) {
        (Ok(r), Ok(c)) => (r, c),
        (r, c) => {
            if let Err(e) = r {
                report.failures.push(tree_failure(TreeSide::Rows, e));
            }
            if let Err(e) = c {
                report.failures.push(tree_failure(TreeSide::Cols, e));
            }
            return Ok(report);
        }
    };

    let t2 = Instant::now();
    let (p, q) = representative_permutations(&row_tree, &col_tree)?;
    let fact = hierarchical_factorize(a, &p, &q)?;
    report.timings.factorize_secs = t2.elapsed().as_secs_f64();

    report.status = Status::Success;
    report.relative_error = Some(fact.e_bf / a.frobenius_norm());
    report.e_bf = Some(fact.e_bf);
    report.factors = Some(fact.factors);
    report.row_tree = Some(row_tree);
    report.col_tree = Some(col_tree);
    report.p = Some(p);
    report.q = Some(q);
    Ok(report)
}
