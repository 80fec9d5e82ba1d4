//! End-to-end runs of the `bfid` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bfid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfid")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_factorize_identify() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("gen");
    let out = bfid(&["generate", "--family", "random-butterfly", "--size", "16", "--seed", "3", "--out", arg(&g)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["target.cmx", "clean.cmx", "p.perm", "q.perm"] {
        assert!(g.join(f).exists(), "{f}");
    }

    let f = dir.path().join("fact");
    let out = bfid(&[
        "factorize",
        arg(&g.join("target.cmx")),
        arg(&g.join("p.perm")),
        arg(&g.join("q.perm")),
        "--out",
        arg(&f),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(f.join("factorize.json")).unwrap()).unwrap();
    assert!(summary["relative_error"].as_f64().unwrap() < 1e-10);
    assert!(f.join("factors/manifest.json").exists());

    let i = dir.path().join("ident");
    let out = bfid(&["identify", arg(&g.join("target.cmx")), "--seeds", "0,1", "--out", arg(&i)]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(i.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "success");
    assert!(report["relative_error"].as_f64().unwrap() < 1e-10);
    for f in ["p.perm", "q.perm", "row_tree.json", "col_tree.json", "factors/factor_04.cmx"] {
        assert!(i.join(f).exists(), "{f}");
    }
}

#[test]
fn identify_reports_failure_without_error() {
    let dir = tempfile::tempdir().unwrap();
    // A dense random matrix: per-level partitions almost surely do not nest.
    let m = dir.path().join("dense.cmx");
    let mut text = String::from("cmx 8 8\n");
    let mut x: u64 = 12345;
    for _ in 0..8 {
        let row: Vec<String> = (0..8)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                format!("{:.17e},0", (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            })
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    std::fs::write(&m, text).unwrap();
    let out_dir = dir.path().join("r");
    let out = bfid(&["identify", arg(&m), "--out", arg(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    if report["status"] == "failure" {
        assert!(!report["failures"].as_array().unwrap().is_empty());
        assert!(!out_dir.join("p.perm").exists());
    }
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = arg(dir.path());
    let cases: Vec<Vec<&str>> = vec![
        vec!["generate", "--size", "12", "--out", o],
        vec!["generate", "--size", "128", "--out", o],
        vec!["generate", "--eps", "-0.1", "--out", o],
        vec!["generate", "--family", "hadamard", "--out", o],
        vec!["exhaustive", "--size", "16", "--out", o],
        vec!["success-table", "--instances", "0", "--out", o],
        vec!["success-table", "--alpha-grid", "0", "--out", o],
        vec!["noise-curve", "--iters", "0", "--out", o],
        vec!["identify", "/does/not/exist.cmx", "--out", o],
        vec!["frobnicate"],
    ];
    for args in cases {
        assert_eq!(bfid(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn large_flag_unlocks_bigger_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bfid(&["generate", "--size", "128", "--large", "--out", arg(dir.path())]);
    assert!(out.status.success());
}

#[test]
fn experiment_tables_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = bfid(&[
            "success-table",
            "--family",
            "random-butterfly,dft",
            "--size",
            "8",
            "--eps",
            "0,0.1",
            "--instances",
            "3",
            "--seeds",
            "0,1",
            "--iters",
            "10",
            "--seed",
            "7",
            "--out",
            arg(&d),
        ]);
        assert!(out.status.success());
        (
            std::fs::read_to_string(d.join("success_table.csv")).unwrap(),
            std::fs::read_to_string(d.join("instances.csv")).unwrap(),
        )
    };
    let (a, ai) = run("a");
    let (b, bi) = run("b");
    assert_eq!(a, b);
    assert_eq!(ai, bi);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "family,n,eps,instances,successes,success_rate,mean_relative_error");
    assert_eq!(lines.len(), 5);
    assert_eq!(ai.lines().count(), 13);
}

#[test]
fn noise_curve_with_only_zero_noise_has_only_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = bfid(&["noise-curve", "--size", "8", "--eps", "0", "--out", arg(dir.path())]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
    let csv = std::fs::read_to_string(dir.path().join("noise_curve.csv")).unwrap();
    assert_eq!(csv, "family,n,eps,successes,mean_relative_error_over_eps,std_relative_error_over_eps\n");
}

#[test]
fn exhaustive_and_partition_quality_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bfid(&["exhaustive", "--seed", "2", "--out", arg(dir.path())]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("exhaustive.csv")).unwrap();
    assert_eq!(csv.lines().count(), 99225 + 1);
    assert_eq!(csv.lines().next().unwrap(), "row_tree_id,col_tree_id,relative_error");

    let out = bfid(&["partition-quality", "--size", "8", "--eps", "0", "--out", arg(dir.path())]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("partition_quality.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
