//! Identification of the row and column cluster trees under which a permuted
//! (and possibly noisy) butterfly matrix has rank-one complementary blocks,
//! followed by butterfly factorization with the recovered permutations.
//!
//! The pipeline is:
//!
//! 1. [`partition::alternating_partition`] solves, for one level `ℓ`, the
//!    search for equal-size row and column partitions whose blocks are
//!    closest to rank one, alternating spectral clustering of rows and
//!    columns.
//! 2. [`identify::identify`] sweeps every level over a grid of contrast
//!    exponents and seeds, assembles the best partitions into cluster trees,
//!    and picks representative permutations.
//! 3. [`factorization::hierarchical_factorize`] computes the butterfly
//!    factors and the approximation error with those permutations fixed.

pub mod error;
pub mod experiments;
pub mod factorization;
pub mod generators;
pub mod identify;
pub mod kmeans;
pub mod matrix;
pub mod partition;
pub mod permutation;
pub mod spectral;
pub mod support;
pub mod tree;

pub use error::{Error, Result, TreeViolation};
pub use factorization::{
    canonical_level_partition, hierarchical_factorize, monarch_two_factor, partition_objective,
    ButterflyFactors, LevelPartition,
};
pub use generators::{dft_matrix, make_target, random_gaussian_butterfly, random_orthogonal_butterfly};
pub use identify::{identify, IdentificationReport, IdentifyConfig};
pub use matrix::{best_rank_one, ComplexMatrix, RankOne, C64};
pub use permutation::Permutation;
pub use support::{butterfly_support, product_support, SupportMask};
pub use tree::{
    assemble_tree, canonical_trees, count_trees, enumerate_trees, representative_permutations, ClusterTree,
};
