#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsx_core::synthetic::{make_synthetic, SyntheticKind};
use tsx_core::{save_dataset, DatasetFormat};

pub const TSX: &str = env!("CARGO_BIN_EXE_tsx");
pub const FIXTURE: &str = env!("CARGO_BIN_EXE_tsx-fixture-model");

pub fn tsx(args: &[&str]) -> Output {
    Command::new(TSX).args(args).output().expect("tsx runs")
}

pub fn tsx_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(TSX);
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("tsx runs")
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

/// Writes a univariate CSV and a three-channel JSONL dataset into `dir`.
pub fn write_datasets(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let uni = make_synthetic(SyntheticKind::BumpUni, 40, 1, 30, seed).unwrap();
    let multi = make_synthetic(SyntheticKind::ChannelMulti, 40, 3, 30, seed).unwrap();
    let csv = dir.join("uni.csv");
    let jsonl = dir.join("multi.jsonl");
    save_dataset(&uni, &csv, DatasetFormat::CsvUni).unwrap();
    save_dataset(&multi, &jsonl, DatasetFormat::JsonlMulti).unwrap();
    (csv, jsonl)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
