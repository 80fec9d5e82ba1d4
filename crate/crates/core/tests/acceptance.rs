//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs in minutes to tens of minutes on one core (the DFT sweep at N=64
//! dominates). Exits with status 0 after printing every line; set
//! `ACCEPTANCE_STRICT=1` to exit with status 1 when any criterion fails.

use std::collections::BTreeSet;
use std::time::Instant;

use butterfly_ident::experiments::{noise_curve, run_exhaustive, run_instances, ExperimentConfig, Family, InstanceRecord};
use butterfly_ident::kmeans::{balanced_kmeans, constrained_assignment};
use butterfly_ident::spectral::{similarity, spectral_embed, Axis};
use butterfly_ident::tree::LeafOrderStream;
use butterfly_ident::{
    butterfly_support, canonical_level_partition, canonical_trees, count_trees, enumerate_trees,
    hierarchical_factorize, make_target, partition_objective, product_support, random_gaussian_butterfly,
    random_orthogonal_butterfly, representative_permutations, ClusterTree, ComplexMatrix, IdentifyConfig,
    Permutation, C64,
};
use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const SIZES: [usize; 4] = [8, 16, 32, 64];
const NOISY_EPS: [f64; 3] = [0.01, 0.03, 0.1];
const INSTANCES: usize = 20;

fn config(family: Family, sizes: &[usize], eps: &[f64]) -> ExperimentConfig {
    ExperimentConfig {
        families: vec![family],
        sizes: sizes.to_vec(),
        eps: eps.to_vec(),
        instances: INSTANCES,
        identify: IdentifyConfig::default(),
        base_seed: 0,
        large: false,
    }
}

fn failed_cells(records: &[InstanceRecord]) -> Vec<String> {
    records
        .iter()
        .filter(|r| !r.success)
        .map(|r| format!("N={} eps={} #{}", r.n, r.eps, r.instance))
        .collect()
}

fn exact_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in SIZES {
        let l = n.trailing_zeros() as usize;
        for i in 0..INSTANCES as u64 {
            let b = random_orthogonal_butterfly(l, 1000 + i).unwrap().product();
            let p = Permutation::random(n, 2000 + i);
            let q = Permutation::random(n, 3000 + i);
            let a = make_target(&b, &p, &q, 0.0, 0).unwrap();
            let h = hierarchical_factorize(&a, &p, &q).unwrap();
            worst = worst.max(h.e_bf / a.frobenius_norm());
        }
    }
    outcome(worst < 1e-10, format!("max relative error {worst:.3e} (< 1e-10)"))
}

fn noiseless_identification() -> Outcome {
    let records = run_instances(&config(Family::RandomButterfly, &SIZES, &[0.0])).unwrap();
    let failures = failed_cells(&records);
    let worst = records.iter().filter_map(|r| r.relative_error).fold(0.0, f64::max);
    let pass = failures.is_empty() && worst < 1e-10;
    outcome(
        pass,
        format!(
            "{}/{} succeeded, max relative error {worst:.3e} (< 1e-10){}",
            records.len() - failures.len(),
            records.len(),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn noisy_identification() -> Outcome {
    let records = run_instances(&config(Family::RandomButterfly, &SIZES[..3], &NOISY_EPS)).unwrap();
    let failures = failed_cells(&records);
    let mismatches: Vec<String> = records
        .iter()
        .filter(|r| r.success)
        .filter(|r| (r.relative_error.unwrap() - r.known_relative_error).abs() > 1e-9 * r.known_relative_error)
        .map(|r| {
            format!(
                "N={} eps={} #{} ({:.6e} vs known {:.6e})",
                r.n,
                r.eps,
                r.instance,
                r.relative_error.unwrap(),
                r.known_relative_error
            )
        })
        .collect();
    let curve = noise_curve(&records);
    let off_scale: Vec<String> = curve
        .iter()
        .filter(|row| !row.mean_relative_error_over_eps.is_some_and(|m| m > 0.0 && m <= 2.0))
        .map(|row| format!("N={} eps={} mean {:?}", row.n, row.eps, row.mean_relative_error_over_eps))
        .collect();
    let range = curve
        .iter()
        .filter_map(|row| row.mean_relative_error_over_eps)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
    let pass = failures.is_empty() && mismatches.is_empty() && off_scale.is_empty();
    let mut detail = format!(
        "{}/{} succeeded, {} error mismatches, mean rel/eps in [{:.3}, {:.3}]",
        records.len() - failures.len(),
        records.len(),
        mismatches.len(),
        range.0,
        range.1
    );
    for (what, list) in [("failed", &failures), ("mismatched", &mismatches), ("off scale", &off_scale)] {
        if !list.is_empty() {
            detail.push_str(&format!("; {what}: {}", list.join(", ")));
        }
    }
    outcome(pass, detail)
}

fn dft_identification() -> Outcome {
    let records = run_instances(&config(Family::Dft, &SIZES, &[0.0, 0.01, 0.03, 0.1])).unwrap();
    let failures = failed_cells(&records);
    outcome(
        failures.is_empty(),
        format!(
            "{}/{} succeeded{}",
            records.len() - failures.len(),
            records.len(),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn exhaustive_search() -> Outcome {
    let r = run_exhaustive(8, 0).unwrap();
    let zero: Vec<_> = r.rows.iter().filter(|x| x.relative_error < 1e-10).collect();
    let next = r.rows.iter().map(|x| x.relative_error).filter(|&e| e >= 1e-10).fold(f64::INFINITY, f64::min);
    let single_true = zero.len() == 1
        && zero[0].row_tree_id == r.true_row_tree_id
        && zero[0].col_tree_id == r.true_col_tree_id;
    let pass = r.rows.len() == 315 * 315 && single_true && next > 1e-3;
    outcome(
        pass,
        format!(
            "{} pairs, {} below 1e-10 (the true pair: {single_true}), next smallest {next:.3e} (> 1e-3)",
            r.rows.len(),
            zero.len()
        ),
    )
}

fn combinatorics() -> Outcome {
    let counts: Vec<BigUint> = [2, 4, 8].iter().map(|&n| count_trees(n).unwrap()).collect();
    let counts_ok = counts == [1u32, 3, 315].map(BigUint::from);
    let small: Vec<usize> = [4, 8].iter().map(|&n| enumerate_trees(n).unwrap().count()).collect();
    let small_ok = small == [3, 315];
    let mut stream = LeafOrderStream::new(16).unwrap();
    let mut streamed: u64 = 0;
    let mut increasing = true;
    let mut prev: Vec<usize> = Vec::new();
    while stream.advance() {
        let cur = stream.current();
        if cur <= prev.as_slice() {
            increasing = false;
        }
        prev.clear();
        prev.extend_from_slice(cur);
        streamed += 1;
    }
    let u16 = count_trees(16).unwrap();
    let big_ok = BigUint::from(streamed) == u16 && increasing;
    outcome(
        counts_ok && small_ok && big_ok,
        format!(
            "u_2,u_4,u_8 = {}, {}, {}; enumerated N=4: {}, N=8: {}, N=16: {streamed} (u_16 = {u16}, strictly increasing: {increasing})",
            counts[0], counts[1], counts[2], small[0], small[1]
        ),
    )
}

fn random_dense(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn all_balanced_labellings(n: usize, k: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, cur: &mut Vec<usize>, counts: &mut Vec<usize>, size: usize, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..counts.len() {
            if counts[c] < size {
                counts[c] += 1;
                cur[i] = c;
                rec(i + 1, cur, counts, size, out);
                counts[c] -= 1;
            }
        }
    }
    let mut out = vec![];
    rec(0, &mut vec![0; n], &mut vec![0; k], size, &mut out);
    out
}

/// Swaps the children of randomly chosen nodes of `tree`.
fn random_symmetry(tree: &ClusterTree, rng: &mut ChaCha8Rng) -> Permutation {
    let order = tree.leaf_order().to_vec();
    let n = order.len();
    let mut swapped = order.clone();
    let mut width = n;
    while width >= 2 {
        for seg in swapped.chunks_exact_mut(width) {
            if rng.random_bool(0.5) {
                seg.rotate_left(width / 2);
            }
        }
        width /= 2;
    }
    let mut images = vec![0; n];
    for (a, b) in order.iter().zip(&swapped) {
        images[*a] = *b;
    }
    Permutation::new(images).unwrap()
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut broken: Vec<&str> = Vec::new();

    let masks_ok = (1..=10).all(|l| {
        let n = 1usize << l;
        (1..=l).all(|level| butterfly_support(n, level).unwrap().cardinality() == 2 * n)
    });
    if !masks_ok {
        broken.push("support cardinality");
    }

    let mut members_ok = true;
    for l in 2..=6 {
        let n = 1usize << l;
        for level in 1..l {
            let part = canonical_level_partition(n, level).unwrap();
            for _ in 0..100 {
                let x = product_support(n, 1, level).unwrap().project(&random_dense(n, &mut rng));
                let y = product_support(n, level + 1, l).unwrap().project(&random_dense(n, &mut rng));
                let m = x.matmul(&y).unwrap();
                members_ok &= partition_objective(&m, &part).unwrap() <= 1e-18 * m.norm_sqr();
            }
            let dense = random_dense(n, &mut rng);
            members_ok &= partition_objective(&dense, &part).unwrap() > 1e-3 * dense.norm_sqr();
        }
    }
    if !members_ok {
        broken.push("Monarch membership");
    }

    let mut sizes_ok = true;
    for t in 0..1000u64 {
        let k = rng.random_range(1..9);
        let size = rng.random_range(1..9);
        let dim = rng.random_range(1..5);
        let pts = DMatrix::from_fn(k * size, dim, |_, _| (rng.random::<f64>() * 4.0).round());
        let clusters = balanced_kmeans(&pts, k, size, t).unwrap();
        let all: BTreeSet<usize> = clusters.iter().flatten().copied().collect();
        sizes_ok &= clusters.len() == k && clusters.iter().all(|c| c.len() == size) && all.len() == k * size;
    }
    if !sizes_ok {
        broken.push("equal cluster sizes");
    }

    let mut assignment_ok = true;
    for &(n, k) in &[(2usize, 1usize), (4, 2), (6, 2), (6, 3), (8, 2), (8, 4)] {
        let size = n / k;
        let labellings = all_balanced_labellings(n, k, size);
        for _ in 0..20 {
            let pts = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>());
            let cents = DMatrix::from_fn(k, 3, |_, _| rng.random::<f64>());
            let d = |i: usize, c: usize| (0..3).map(|j| (pts[(i, j)] - cents[(c, j)]).powi(2)).sum::<f64>();
            let (_, cost) = constrained_assignment(&pts, &cents, size).unwrap();
            let brute = labellings
                .iter()
                .map(|lab| lab.iter().enumerate().map(|(i, &c)| d(i, c)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assignment_ok &= (cost - brute).abs() <= 1e-12;
        }
    }
    if !assignment_ok {
        broken.push("assignment optimality");
    }

    let mut eigen_ok = true;
    for n in [8usize, 16, 32, 64] {
        for _ in 0..10 {
            let a = random_dense(n, &mut rng);
            let groups: Vec<Vec<usize>> = Permutation::random(n, rng.random()).images().chunks(n / 4).map(<[usize]>::to_vec).collect();
            let alpha = [0.01, 1.0, 100.0][rng.random_range(0..3)];
            let w = similarity(&a, &groups, Axis::Rows, alpha).unwrap();
            let lap = w.laplacian();
            let k = n / 2;
            let emb = spectral_embed(&w, k).unwrap();
            let tol = 1e-8 * lap.norm();
            for c in 0..k {
                let v = emb.vectors.column(c);
                eigen_ok &= (&lap * v - v * emb.eigenvalues[c]).norm() <= tol;
            }
        }
    }
    if !eigen_ok {
        broken.push("eigenpair residuals");
    }

    let mut round_trip_ok = true;
    for n in [8usize, 16, 32, 64] {
        let (tx, tw) = canonical_trees(n).unwrap();
        for _ in 0..50 {
            let rows = ClusterTree::from_leaf_order(Permutation::random(n, rng.random()).images().to_vec()).unwrap();
            let cols = ClusterTree::from_leaf_order(Permutation::random(n, rng.random()).images().to_vec()).unwrap();
            let (p, q) = representative_permutations(&rows, &cols).unwrap();
            round_trip_ok &= tx.relabel(&q).unwrap() == rows && tw.relabel(&p).unwrap() == cols;
        }
    }
    if !round_trip_ok {
        broken.push("representative round trip");
    }

    let mut invariance_ok = true;
    let (tx, tw) = canonical_trees(8).unwrap();
    for seed in 0..10u64 {
        let base = random_gaussian_butterfly(3, seed).unwrap().product();
        let a = make_target(&base, &Permutation::random(8, rng.random()), &Permutation::random(8, rng.random()), 0.05, seed)
            .unwrap();
        let rows = ClusterTree::from_leaf_order(Permutation::random(8, rng.random()).images().to_vec()).unwrap();
        let cols = ClusterTree::from_leaf_order(Permutation::random(8, rng.random()).images().to_vec()).unwrap();
        let (p, q) = representative_permutations(&rows, &cols).unwrap();
        let reference = hierarchical_factorize(&a, &p, &q).unwrap().e_bf;
        let mut members = BTreeSet::new();
        while members.len() < 5 {
            let p2 = p.compose(&random_symmetry(&tw, &mut rng));
            let q2 = q.compose(&random_symmetry(&tx, &mut rng));
            if !members.insert((p2.images().to_vec(), q2.images().to_vec())) {
                continue;
            }
            let e = hierarchical_factorize(&a, &p2, &q2).unwrap().e_bf;
            invariance_ok &= (e - reference).abs() <= 1e-10 * reference;
        }
    }
    if !invariance_ok {
        broken.push("class invariance");
    }

    if broken.is_empty() {
        outcome(
            true,
            "support cardinality, Monarch membership, equal cluster sizes, assignment optimality, \
             eigenpair residuals, representative round trip, class invariance",
        )
    } else {
        outcome(false, format!("broken: {}", broken.join(", ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("exact recovery with known permutations", exact_recovery),
        ("identification, noiseless", noiseless_identification),
        ("identification, noisy", noisy_identification),
        ("DFT family", dft_identification),
        ("exhaustive search, N=8", exhaustive_search),
        ("combinatorics", combinatorics),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
