use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn polylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polylab"))
        .args(args)
        .env_remove("POLYLAB_SEED")
        .output()
        .expect("spawn polylab")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compare against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "{name} differs; rerun with UPDATE_GOLDEN=1");
}

#[test]
fn help_text_is_stable() {
    for sub in [
        None,
        Some("gen-xor"),
        Some("train"),
        Some("partition-map"),
        Some("bench"),
        Some("plot"),
        Some("report"),
    ] {
        let out = match sub {
            Some(s) => polylab(&[s, "--help"]),
            None => polylab(&["--help"]),
        };
        assert!(out.status.success());
        let name = format!("{}.txt", sub.unwrap_or("polylab"));
        check_golden(&name, &String::from_utf8(out.stdout).unwrap());
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(polylab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(polylab(&["gen-xor"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = polylab(&["train", "--data", "/no/such/file.csv", "--family", "forest", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    let family = polylab(&["train", "--data", "x.csv", "--family", "svm", "--out", out]);
    assert_eq!(family.status.code(), Some(2));
}

#[test]
fn gen_xor_is_reproducible_and_prints_its_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = polylab(&[
            "--seed",
            "5",
            "gen-xor",
            "--n-train",
            "200",
            "--n-test",
            "50",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("seed: 5"));
        assert!(text.contains("config: "));
    }
    for file in ["train.csv", "test.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    assert!(a.path().join("manifest.json").exists());
}

#[test]
fn report_on_an_empty_log_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("records.jsonl");
    std::fs::write(&log, "").unwrap();
    let out = polylab(&["report", "--records", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("no records"));
}

#[test]
fn train_then_map_a_forest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let model = d.join("model");
    let map = d.join("map");
    let run = |args: &[&str]| {
        let out = polylab(args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["gen-xor", "--n-train", "300", "--n-test", "100", "--out", data.to_str().unwrap()]);
    run(&[
        "train",
        "--data",
        data.join("train.csv").to_str().unwrap(),
        "--test",
        data.join("test.csv").to_str().unwrap(),
        "--family",
        "forest",
        "--trees",
        "20",
        "--out",
        model.to_str().unwrap(),
    ]);
    run(&[
        "partition-map",
        "--model",
        model.join("model.json").to_str().unwrap(),
        "--data",
        data.join("train.csv").to_str().unwrap(),
        "--layer",
        "2",
        "--grid",
        "64",
        "--exact",
        "--out",
        map.to_str().unwrap(),
    ]);
    let svg = std::fs::read_to_string(map.join("partition.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let regions: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(map.join("regions.json")).unwrap()).unwrap();
    assert!(regions.as_array().is_some_and(|r| !r.is_empty()));
}
