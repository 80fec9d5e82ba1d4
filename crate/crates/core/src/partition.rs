//! Alternating spectral partitioning of rows and columns at a fixed level.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{log2_exact, Error, Result};
use crate::factorization::{canonicalize_sets, partition_objective, LevelPartition};
use crate::kmeans::balanced_kmeans_with_rng;
use crate::matrix::ComplexMatrix;
use crate::spectral::{similarity, spectral_embed, Axis};

/// Default number of alternations.
pub const DEFAULT_ITERATIONS: usize = 50;

/// Partitions reached by [`alternating_partition`] and their objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionState {
    pub partition: LevelPartition,
    /// Sum of squared rank-one residuals over all blocks.
    pub objective: f64,
    /// Objective after every half step (rows, then columns, per iteration).
    pub trace: Vec<f64>,
    /// Iterations actually run.
    pub iterations: usize,
}

impl PartitionState {
    pub fn level(&self) -> usize {
        self.partition.level
    }

    /// Writes the per-half-step objective trace as CSV.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "iteration", "side", "objective"])?;
        for (step, obj) in self.trace.iter().enumerate() {
            let side = if step % 2 == 0 { "rows" } else { "cols" };
            out.write_record([
                step.to_string(),
                (step / 2 + 1).to_string(),
                side.to_string(),
                format!("{obj:.17e}"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Seeded uniform shuffle of `0..n` cut into `count` consecutive groups.
pub fn random_partition(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut sets: Vec<Vec<usize>> = idx.chunks(n / count).map(<[usize]>::to_vec).collect();
    canonicalize_sets(&mut sets);
    sets
}

fn spectral_step(
    a: &ComplexMatrix,
    fixed: &[Vec<usize>],
    axis: Axis,
    alpha: f64,
    clusters: usize,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    let w = similarity(a, fixed, axis, alpha)?;
    let emb = spectral_embed(&w, clusters)?;
    let mut sets = balanced_kmeans_with_rng(&emb.vectors, clusters, size, rng)?;
    canonicalize_sets(&mut sets);
    Ok(sets)
}

/// Searches equal-size row and column partitions at `level` whose blocks are
/// as close to rank one as possible.
///
/// Starts from a random column partition, then repeatedly re-partitions the
/// rows with the columns fixed and the columns with the rows fixed, each by
/// spectral clustering of a cosine-similarity graph followed by equal-size
/// k-means. Stops after `iterations` rounds or once a round changes neither
/// partition. Returns the lowest-objective pair of partitions visited, the
/// latest one on ties.
pub fn alternating_partition(
    a: &ComplexMatrix,
    level: usize,
    alpha: f64,
    seed: u64,
    iterations: usize,
) -> Result<PartitionState> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    let l = log2_exact(n)?;
    if level == 0 || level >= l {
        return Err(Error::LevelOutOfRange { level, max: l - 1 });
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let row_size = 1 << level;
    let row_count = n / row_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = random_partition(n, row_size, &mut rng);
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut trace = Vec::with_capacity(2 * iterations);
    let mut best: Option<(f64, Vec<Vec<usize>>, Vec<Vec<usize>>)> = None;
    let mut ran = 0;

    let mut record = |rows: &Vec<Vec<usize>>, cols: &Vec<Vec<usize>>, trace: &mut Vec<f64>| -> Result<()> {
        let part = LevelPartition {
            level,
            row_sets: rows.clone(),
            col_sets: cols.clone(),
        };
        let obj = partition_objective(a, &part)?;
        trace.push(obj);
        if best.as_ref().is_none_or(|(b, _, _)| obj <= *b) {
            best = Some((obj, rows.clone(), cols.clone()));
        }
        Ok(())
    };

    for _ in 0..iterations {
        ran += 1;
        let new_rows = spectral_step(a, &cols, Axis::Rows, alpha, row_count, row_size, &mut rng)?;
        record(&new_rows, &cols, &mut trace)?;
        let new_cols = spectral_step(a, &new_rows, Axis::Cols, alpha, row_size, row_count, &mut rng)?;
        record(&new_rows, &new_cols, &mut trace)?;
        let fixed_point = new_rows == rows && new_cols == cols;
        rows = new_rows;
        cols = new_cols;
        if fixed_point {
            break;
        }
    }
    let (objective, row_sets, col_sets) = best.expect("at least one iteration ran");
    Ok(PartitionState {
        partition: LevelPartition {
            level,
            row_sets,
            col_sets,
        },
        objective,
        trace,
        iterations: ran,
    })
}
