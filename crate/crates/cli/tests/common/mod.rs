//! Shared helpers for the CLI and service test suites.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_leafdx")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn leafdx")
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().expect("spawn leafdx")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two-plant synthetic dataset written under `root`.
pub fn write_small_dataset(root: &Path) {
    let plants: &[(&str, &[&str])] = &[
        ("Apple", &["healthy", "scab", "rot"] as &[&str]),
        ("Tomato", &["healthy", "blight"] as &[&str]),
    ];
    leafdx::synth::write_dataset(root, plants, 10, 64, 7).expect("write dataset");
}

/// Extract + train one Apple model; returns (features.csv, model.json).
pub fn trained_apple_model(work: &Path) -> (PathBuf, PathBuf) {
    let data = work.join("data");
    write_small_dataset(&data);
    let features = work.join("features.csv");
    let model = work.join("apple.json");
    let out = run(&[
        "extract",
        "--data-dir",
        data.to_str().unwrap(),
        "--out",
        features.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "extract failed: {}", stderr(&out));
    let out = run(&[
        "train",
        "--features",
        features.to_str().unwrap(),
        "--plant",
        "Apple",
        "--out",
        model.to_str().unwrap(),
        "--trees",
        "20",
        "--seed",
        "42",
    ]);
    assert!(out.status.success(), "train failed: {}", stderr(&out));
    (features, model)
}
