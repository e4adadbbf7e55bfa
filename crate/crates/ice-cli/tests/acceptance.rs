//! Acceptance: byte-level determinism of every command across reruns and
//! worker-thread counts (manifest timestamp excluded).

use std::path::{Path, PathBuf};
use std::process::Command;

fn run_ok(args: &[&str]) {
    let output = Command::new(env!("CARGO_BIN_EXE_ice"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

/// All regular files under a directory, relative paths sorted.
fn files_under(dir: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, base, out);
            } else {
                out.push(path.strip_prefix(base).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Byte-compare every result file in two output trees. The run manifest is
/// excluded: it records the run's own coordinates (timestamp, output path),
/// not results.
fn assert_identical_outputs(a: &Path, b: &Path, context: &str) {
    let keep =
        |files: Vec<PathBuf>| -> Vec<PathBuf> {
            files
                .into_iter()
                .filter(|p| p.file_name().is_none_or(|n| n != "run_manifest.json"))
                .collect()
        };
    let files_a = keep(files_under(a));
    let files_b = keep(files_under(b));
    assert_eq!(files_a, files_b, "{context}: file sets differ");
    assert!(!files_a.is_empty(), "{context}: no result files written");
    for rel in &files_a {
        let x = std::fs::read(a.join(rel)).unwrap();
        let y = std::fs::read(b.join(rel)).unwrap();
        assert_eq!(
            x,
            y,
            "{context}: {} differs between runs",
            rel.display()
        );
    }
}

fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("observations.csv");
    std::fs::write(
        &data,
        "fips,name,n_total,y_white_high,y_black_low\n\
         13001,Alpha,400,60,140\n\
         13003,Bravo,350,50,120\n\
         13005,Charlie,500,90,130\n\
         13007,Delta,450,150,60\n\
         13009,Echo,300,110,40\n\
         13011,Foxtrot,250,95,30\n",
    )
    .unwrap();
    let adjacency = dir.join("adjacency.csv");
    std::fs::write(
        &adjacency,
        "src,dst\n13001,13003\n13003,13005\n13005,13007\n13007,13009\n13009,13011\n",
    )
    .unwrap();
    (data, adjacency)
}

#[test]
fn criterion_10_every_command_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (data, adjacency) = write_fixture(dir.path());

    // fit (local model exercises every sampler block) across reruns and
    // thread counts.
    let fit_out: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("fit{i}"))).collect();
    for (out, threads) in fit_out.iter().zip(["1", "1", "8"]) {
        run_ok(&[
            "fit",
            "--threads",
            threads,
            "--model",
            "local",
            "--clusters",
            "2",
            "--iters",
            "800",
            "--burnin",
            "300",
            "--seed",
            "41",
            "--data",
            data.to_str().unwrap(),
            "--adjacency",
            adjacency.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_identical_outputs(&fit_out[0], &fit_out[1], "fit rerun");
    assert_identical_outputs(&fit_out[0], &fit_out[2], "fit 1 vs 8 threads");

    // simulate
    let sim_out: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("sim{i}"))).collect();
    for (out, threads) in sim_out.iter().zip(["1", "1", "8"]) {
        run_ok(&[
            "simulate",
            "--threads",
            threads,
            "--scenario",
            "2",
            "--n",
            "150",
            "--replicates",
            "3",
            "--seed",
            "17",
            "--adjacency",
            adjacency.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_identical_outputs(&sim_out[0], &sim_out[1], "simulate rerun");
    assert_identical_outputs(&sim_out[0], &sim_out[2], "simulate 1 vs 8 threads");

    // evaluate (full experiment path: generate + fit + score)
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        "scenarios = 1\nn = 150\nmodels = bootstrap, bym\nreplicates = 2\nseed = 5\n\
         iterations = 500\nburnin = 200\nbootstrap_b = 300\n",
    )
    .unwrap();
    let eval_out: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("eval{i}"))).collect();
    for (out, threads) in eval_out.iter().zip(["1", "1", "8"]) {
        run_ok(&[
            "evaluate",
            "--threads",
            threads,
            "--config",
            config.to_str().unwrap(),
            "--adjacency",
            adjacency.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_identical_outputs(&eval_out[0], &eval_out[1], "evaluate rerun");
    assert_identical_outputs(&eval_out[0], &eval_out[2], "evaluate 1 vs 8 threads");

    // report over two fit outputs.
    let report_out: Vec<PathBuf> = (0..3)
        .map(|i| dir.path().join(format!("report{i}")))
        .collect();
    for (out, threads) in report_out.iter().zip(["1", "1", "8"]) {
        run_ok(&[
            "report",
            "--threads",
            threads,
            "--t1",
            fit_out[0].join("ice_summary.json").to_str().unwrap(),
            "--t2",
            fit_out[1].join("ice_summary.json").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_identical_outputs(&report_out[0], &report_out[1], "report rerun");
    assert_identical_outputs(&report_out[0], &report_out[2], "report 1 vs 8 threads");

    println!("ACCEPTANCE 10 command determinism (rerun + 1 vs 8 threads): PASS");
}
