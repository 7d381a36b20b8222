#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_morphkit"));
    cmd.env_remove("MORPHKIT_OUT_DIR");
    cmd
}

/// Runs the binary in `cwd`; relative paths in `args` resolve there.
pub fn run(cwd: &Path, args: &[&str]) -> Output {
    bin().current_dir(cwd).args(args).output().expect("binary runs")
}

pub fn run_ok(cwd: &Path, args: &[&str]) -> Output {
    let out = run(cwd, args);
    assert!(
        out.status.success(),
        "morphkit {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every command of the pipeline, writing below `cwd/<tag>/`. Inputs come
/// from `cwd/in/`, which the first call populates.
pub fn pipeline(cwd: &Path, tag: &str) -> Vec<PathBuf> {
    let o = |sub: &str| format!("{tag}/{sub}");
    if !cwd.join("in/embeddings.jsonl").exists() {
        run_ok(cwd, &["simulate", "--subjects", "80", "--seed", "3", "--out-dir", "in"]);
        run_ok(
            cwd,
            &[
                "simulate", "--subjects", "120", "--seed", "4", "--noise", "0.05", "--magnitude-min", "20",
                "--magnitude-max", "20", "--out-dir", "in/dmad",
            ],
        );
    }
    let data = ["--embeddings", "in/embeddings.jsonl", "--dim", "64"];
    let with = |head: &[&str], tail: &[&str]| -> Vec<String> {
        head.iter().chain(data.iter()).chain(tail.iter()).map(|s| s.to_string()).collect()
    };
    let steps: Vec<Vec<String>> = vec![
        vec!["simulate", "--subjects", "30", "--seed", "9", "--out-dir", &o("sim")].into_iter().map(String::from).collect(),
        with(&["pair", "--mode", "embedding"], &["--out-dir", &o("sel")]),
        with(&["pair", "--mode", "random", "--seed", "7"], &["--out-dir", &o("rnd")]),
        with(&["morph"], &["--pairs", &o("sel/pairs.csv"), "--out-dir", &o("sel")]),
        with(&["morph"], &["--pairs", &o("rnd/pairs.csv"), "--noise", "0.01", "--seed", "5", "--out-dir", &o("rnd")]),
        with(&["compare"], &["--morphs", &o("sel/morphs.jsonl"), "--frs-id", "a", "--out-dir", &o("sel")]),
        with(&["compare"], &["--morphs", &o("sel/morphs.jsonl"), "--frs-id", "b", "--out-dir", &o("sel")]),
        with(&["calibrate"], &["--frs-id", "a", "--subset", "50", "--seed", "1", "--out-dir", &o("cal")]),
        vec!["calibrate", "--scores-in", &o("cal/scores-a.csv"), "--frs-id", "b", "--fmr", "0.01", "--out-dir", &o("cal")]
            .into_iter()
            .map(String::from)
            .collect(),
        [
            "vuln", "--comparisons", &o("sel/comparisons-a.csv"), "--comparisons", &o("sel/comparisons-b.csv"),
            "--calibration", &o("cal/calibration-a.json"), "--calibration", &o("cal/calibration-b.json"),
            "--out-dir", &o("vuln"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "map", "--comparisons", &o("sel/comparisons-a.csv"), "--comparisons", &o("sel/comparisons-b.csv"),
            "--calibration", &o("cal/calibration-a.json"), "--tau", "b=0.5", "--out-dir", &o("map"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "pair", "--mode", "random", "--seed", "2", "--embeddings", "in/dmad/embeddings.jsonl", "--dim", "64",
            "--out-dir", &o("dmad"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "morph", "--embeddings", "in/dmad/embeddings.jsonl", "--dim", "64", "--pairs", &o("dmad/pairs.csv"),
            "--out-dir", &o("dmad"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "dmad-train", "--embeddings", "in/dmad/embeddings.jsonl", "--dim", "64", "--morphs",
            &o("dmad/morphs.jsonl"), "--seed", "4", "--out-dir", &o("dmad"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "dmad-eval", "--model", &o("dmad/dmad-model.json"), "--embeddings", "in/dmad/embeddings.jsonl", "--dim",
            "64", "--morphs", &o("dmad/morphs.jsonl"), "--out-dir", &o("dmad"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        run_ok(cwd, &args);
    }
    tree(&cwd.join(tag))
}

/// All files below `dir`, sorted.
pub fn tree(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    collect(dir, &mut files);
    files.sort();
    files
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).expect("readable dir") {
        let path = entry.expect("dir entry").path();
        if path.is_dir() {
            collect(&path, out);
        } else {
            out.push(path);
        }
    }
}
