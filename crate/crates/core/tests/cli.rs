//! End-to-end CLI checks: exit codes and artifact layout on a miniature run.

use std::path::Path;
use std::process::Command;

fn jtrans() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jtrans"))
}

fn tiny_args(out: &Path) -> Vec<String> {
    [
        "--out",
        &out.display().to_string(),
        "--count",
        "30",
        "--corpus-seed",
        "3",
        "--variant",
        "purified",
        "--model",
        "transformer",
        "--epochs",
        "2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn full_run_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    // unknown config key -> exit 1
    let bad = out.join("bad.ini");
    std::fs::write(&bad, "[model]\nwidth = 3\n").unwrap();
    let status = jtrans()
        .args(["build", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // eval before anything exists -> exit 1
    let status = jtrans()
        .arg("eval")
        .args(tiny_args(out))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // build -> train -> eval, all exit 0
    for cmd in ["build", "train", "eval"] {
        let output = jtrans().arg(cmd).args(tiny_args(out)).output().unwrap();
        assert_eq!(output.status.code(), Some(0), "{cmd}: {output:?}");
    }
    let run = out.join("transformer-purified-space");
    for artifact in ["model.ckpt", "src.vocab", "tgt.vocab", "curve.csv", "per_sample.csv", "report.txt"] {
        assert!(run.join(artifact).exists(), "missing {artifact}");
    }
    assert!(out.join("corpus/stats.txt").exists());

    // rebuild is byte-identical
    let manifest = std::fs::read(out.join("corpus/manifest.txt")).unwrap();
    let stats = std::fs::read(out.join("corpus/stats.txt")).unwrap();
    let status = jtrans().arg("build").args(tiny_args(out)).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(manifest, std::fs::read(out.join("corpus/manifest.txt")).unwrap());
    assert_eq!(stats, std::fs::read(out.join("corpus/stats.txt")).unwrap());

    // a checkpoint trained against different vocabularies -> exit 1
    let status = jtrans()
        .args(["train", "--out"])
        .arg(out)
        .args(["--variant", "redundant", "--model", "transformer", "--epochs", "1"])
        .args(["--run-id", "other"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    std::fs::copy(out.join("other/model.ckpt"), run.join("model.ckpt")).unwrap();
    let status = jtrans().arg("eval").args(tiny_args(out)).status().unwrap();
    assert_eq!(status.code(), Some(1));

    // noise-sweep rejects the purified variant -> exit 1
    let status = jtrans().arg("noise-sweep").args(tiny_args(out)).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
