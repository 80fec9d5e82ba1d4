use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use butterfly_ident::experiments::{
    self, check_size, generate_instance, run_exhaustive, run_instances, run_noise_curve, run_partition_quality,
    success_table, validate_identify, write_csv, ExperimentConfig, Family, EXHAUSTIVE_SIZE,
};
use butterfly_ident::factorization::hierarchical_factorize;
use butterfly_ident::{identify, ComplexMatrix, Error, IdentifyConfig, Permutation};

/// Butterfly factorization of permuted butterfly matrices by cluster-tree
/// identification.
#[derive(Parser)]
#[command(name = "bfid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one generated instance (target, clean matrix, true permutations).
    Generate(Common),
    /// Factorize a matrix with fixed permutations.
    Factorize {
        matrix: PathBuf,
        /// Column permutation P.
        p: PathBuf,
        /// Row permutation Q.
        q: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Identify the cluster trees of a matrix and factorize it.
    Identify {
        matrix: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Error of every tree pair on an 8x8 permuted butterfly matrix.
    Exhaustive(Common),
    /// Success rate of identification per family, size and noise level.
    SuccessTable(Common),
    /// Relative error divided by the noise level.
    NoiseCurve(Common),
    /// Alternating partitions against true and random partitions.
    PartitionQuality(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Matrix families: random-butterfly, dft.
    #[arg(long, value_delimiter = ',', default_value = "random-butterfly")]
    family: Vec<Family>,
    /// Matrix sizes N (powers of two).
    #[arg(long, value_delimiter = ',')]
    size: Vec<usize>,
    /// Relative noise levels.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Instances per (family, N, eps).
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Contrast exponents of the similarity graph.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
    alpha_grid: Vec<f64>,
    /// Seeds of the alternating partition.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Iterations of the alternating partition.
    #[arg(long, default_value_t = butterfly_ident::partition::DEFAULT_ITERATIONS)]
    iters: usize,
    /// Base seed for generated instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Allow N above 64.
    #[arg(long)]
    large: bool,
}

impl Common {
    fn identify_config(&self) -> IdentifyConfig {
        IdentifyConfig {
            alphas: self.alpha_grid.clone(),
            seeds: self.seeds.clone(),
            iterations: self.iters,
        }
    }

    fn experiment(&self, default_sizes: &[usize], default_eps: &[f64]) -> ExperimentConfig {
        ExperimentConfig {
            families: self.family.clone(),
            sizes: if self.size.is_empty() { default_sizes.to_vec() } else { self.size.clone() },
            eps: if self.eps.is_empty() { default_eps.to_vec() } else { self.eps.clone() },
            instances: self.instances,
            identify: self.identify_config(),
            base_seed: self.seed,
            large: self.large,
        }
    }

    fn single<T: Copy>(values: &[T], default: T, what: &str) -> Result<T, Error> {
        match values {
            [] => Ok(default),
            [v] => Ok(*v),
            _ => Err(Error::InvalidArgument(format!("{what} takes a single value here"))),
        }
    }
}

const DEFAULT_EPS: [f64; 4] = [0.0, 0.01, 0.03, 0.1];

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn out_file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

/// A missing or unreadable input is a configuration error.
fn open_input(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> anyhow::Result<ComplexMatrix> {
    let f = open_input(path)?;
    ComplexMatrix::read_cmx(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_perm(path: &Path) -> anyhow::Result<Permutation> {
    let f = open_input(path)?;
    Permutation::read_perm(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn check_input(a: &ComplexMatrix, large: bool) -> Result<(), Error> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    check_size(a.rows(), large)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let family = Common::single(&c.family, Family::RandomButterfly, "--family")?;
            let n = Common::single(&c.size, 16, "--size")?;
            let eps = Common::single(&c.eps, 0.0, "--eps")?;
            check_size(n, c.large)?;
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidArgument(format!("noise level {eps} must be finite and >= 0")).into());
            }
            let inst = generate_instance(family, n, eps, c.seed, 0)?;
            create_out(&c.out)?;
            inst.target.write_cmx(out_file(&c.out, "target.cmx")?)?;
            inst.clean.write_cmx(out_file(&c.out, "clean.cmx")?)?;
            inst.p_true.write_perm(out_file(&c.out, "p.perm")?)?;
            inst.q_true.write_perm(out_file(&c.out, "q.perm")?)?;
            println!("wrote {family} instance N={n} eps={eps} to {}", c.out.display());
        }
        Command::Factorize { matrix, p, q, common } => {
            let a = read_matrix(&matrix)?;
            check_input(&a, common.large)?;
            let (p, q) = (read_perm(&p)?, read_perm(&q)?);
            let h = hierarchical_factorize(&a, &p, &q)?;
            let rel = h.e_bf / a.frobenius_norm();
            create_out(&common.out)?;
            h.factors.write_dir(&common.out.join("factors"))?;
            let summary = serde_json::json!({ "n": a.rows(), "e_bf": h.e_bf, "relative_error": rel });
            serde_json::to_writer_pretty(out_file(&common.out, "factorize.json")?, &summary)?;
            println!("E_bf = {:.6e} (relative {rel:.6e})", h.e_bf);
        }
        Command::Identify { matrix, common } => {
            let a = read_matrix(&matrix)?;
            check_input(&a, common.large)?;
            let cfg = common.identify_config();
            validate_identify(&cfg)?;
            let report = identify(&a, &cfg)?;
            create_out(&common.out)?;
            serde_json::to_writer_pretty(out_file(&common.out, "report.json")?, &report.to_json())?;
            if let (Some(p), Some(q), Some(rt), Some(ct), Some(f)) =
                (&report.p, &report.q, &report.row_tree, &report.col_tree, &report.factors)
            {
                p.write_perm(out_file(&common.out, "p.perm")?)?;
                q.write_perm(out_file(&common.out, "q.perm")?)?;
                serde_json::to_writer_pretty(out_file(&common.out, "row_tree.json")?, &rt.to_json())?;
                serde_json::to_writer_pretty(out_file(&common.out, "col_tree.json")?, &ct.to_json())?;
                f.write_dir(&common.out.join("factors"))?;
                println!("success: relative error {:.6e}", report.relative_error.unwrap_or(f64::NAN));
            } else {
                println!("failure: {} invalid tree(s), see report.json", report.failures.len());
            }
        }
        Command::Exhaustive(c) => {
            let n = Common::single(&c.size, EXHAUSTIVE_SIZE, "--size")?;
            let r = run_exhaustive(n, c.seed)?;
            create_out(&c.out)?;
            write_csv(&r.rows, experiments::EXHAUSTIVE_HEADER, out_file(&c.out, "exhaustive.csv")?)?;
            let zero = r.rows.iter().filter(|x| x.relative_error < 1e-10).count();
            println!(
                "{} pairs, {zero} below 1e-10; true pair ({}, {})",
                r.rows.len(),
                r.true_row_tree_id,
                r.true_col_tree_id
            );
        }
        Command::SuccessTable(c) => {
            let cfg = c.experiment(&[8, 16, 32], &DEFAULT_EPS);
            cfg.validate()?;
            let records = run_instances(&cfg)?;
            let table = success_table(&records);
            create_out(&c.out)?;
            write_csv(&records, experiments::INSTANCE_HEADER, out_file(&c.out, "instances.csv")?)?;
            write_csv(&table, experiments::SUCCESS_HEADER, out_file(&c.out, "success_table.csv")?)?;
            for row in &table {
                println!(
                    "{} N={} eps={}: {}/{} succeeded",
                    row.family, row.n, row.eps, row.successes, row.instances
                );
            }
        }
        Command::NoiseCurve(c) => {
            let cfg = c.experiment(&[8, 16, 32], &DEFAULT_EPS[1..]);
            cfg.validate()?;
            let curve = run_noise_curve(&cfg)?;
            for e in &curve.skipped_eps {
                eprintln!("note: eps = {e} skipped (the curve divides by eps)");
            }
            create_out(&c.out)?;
            write_csv(&curve.rows, experiments::NOISE_HEADER, out_file(&c.out, "noise_curve.csv")?)?;
            println!("{} rows", curve.rows.len());
        }
        Command::PartitionQuality(c) => {
            let cfg = c.experiment(&[16], &[0.0]);
            cfg.validate()?;
            let rows = run_partition_quality(&cfg)?;
            create_out(&c.out)?;
            write_csv(&rows, experiments::PARTITION_QUALITY_HEADER, out_file(&c.out, "partition_quality.csv")?)?;
            println!("{} rows", rows.len());
        }
    }
    Ok(())
}

/// Invalid configuration or input exits with 2, I/O failures with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_)) | Some(Error::Json(_)) | Some(Error::Csv(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
