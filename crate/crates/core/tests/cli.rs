use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_sermon");

fn sermon(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn sermon")
}

fn corpus_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus").join(name)
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_bundled_corpus() {
    let out = sermon(&["validate"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("KJV\t111 verses\t5:48 6:34 7:29"));
    assert!(text.trim_end().ends_with("aligned"));
}

#[test]
fn run_is_byte_deterministic_and_manifest_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(sermon(&["run", "--out", a.to_str().unwrap()]).status.success());
    assert!(sermon(&["run", "--out", b.to_str().unwrap()]).status.success());

    let first = read_dir(&a);
    assert_eq!(first, read_dir(&b));
    let names: Vec<&str> = first.keys().map(String::as_str).collect();
    assert_eq!(
        names,
        [
            "agreement.csv",
            "alignment.json",
            "chapter_totals.csv",
            "deviation.csv",
            "manifest.json",
            "ngrams.csv",
            "overlap.csv",
            "polarity.csv",
            "sentiment_matrix.csv",
        ]
    );

    let m = manifest(&a);
    assert_eq!(m["labels_source"], "baseline");
    let outputs = m["outputs"].as_object().unwrap();
    assert_eq!(outputs.len(), 8);
    for (name, digest) in outputs {
        assert_eq!(digest.as_str().unwrap(), hex::encode(Sha256::digest(&first[name])), "{name}");
    }
}

#[test]
fn config_hash_ignores_output_path_but_tracks_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    assert!(sermon(&["run", "--out", &dir("a")]).status.success());
    assert!(sermon(&["run", "--out", &dir("b")]).status.success());
    assert!(sermon(&["run", "--out", &dir("c"), "--top-k", "5"]).status.success());
    let hash = |s: &str| manifest(&tmp.path().join(s))["config_hash"].clone();
    assert_eq!(hash("a"), hash("b"));
    assert_ne!(hash("a"), hash("c"));
}

#[test]
fn predictions_replace_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let all = tmp.path().join("all.jsonl");
    assert!(sermon(&["labels", "--emit", all.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(&all).unwrap();
    assert_eq!(text.lines().count(), 5 * 111);

    let mut args = vec!["run".to_string()];
    for id in ["KJV", "ASV", "WEB", "DRA", "BBE"] {
        let path = tmp.path().join(format!("{id}.jsonl"));
        let tag = format!("\"translation\":\"{id}\"");
        let lines: String = text.lines().filter(|l| l.contains(&tag)).map(|l| format!("{l}\n")).collect();
        fs::write(&path, lines).unwrap();
        args.push("--predictions".into());
        args.push(format!("{id}={}", path.display()));
    }

    let only_kjv = tmp.path().join("mixed");
    let mut mixed: Vec<&str> = args[..3].iter().map(String::as_str).collect();
    mixed.extend(["--out", only_kjv.to_str().unwrap()]);
    assert!(sermon(&mixed).status.success());
    assert_eq!(manifest(&only_kjv)["labels_source"], "mixed");

    let full = tmp.path().join("full");
    let baseline = tmp.path().join("baseline");
    let mut every: Vec<&str> = args.iter().map(String::as_str).collect();
    every.extend(["--out", full.to_str().unwrap()]);
    assert!(sermon(&every).status.success());
    assert!(sermon(&["run", "--out", baseline.to_str().unwrap()]).status.success());
    assert_eq!(manifest(&full)["labels_source"], "predictions");
    for artifact in ["sentiment_matrix.csv", "agreement.csv"] {
        assert_eq!(
            fs::read(full.join(artifact)).unwrap(),
            fs::read(baseline.join(artifact)).unwrap(),
            "{artifact}"
        );
    }
}

#[test]
fn invalid_predictions_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.jsonl");
    fs::write(
        &bad,
        r#"{"translation":"KJV","chapter":5,"verse":1,"scores":[0,0,0,0,0,0,0,0,0],"labels":[]}"#,
    )
    .unwrap();
    let out = sermon(&[
        "run",
        "--predictions",
        &format!("KJV={}", bad.display()),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("record 1"), "{stderr}");
    assert!(!tmp.path().join("o").join("manifest.json").exists());
}

#[test]
fn misaligned_corpus_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let short = tmp.path().join("short.txt");
    let kjv = fs::read_to_string(corpus_file("kjv.txt")).unwrap();
    let trimmed: String = kjv.lines().filter(|l| !l.starts_with("7:29")).map(|l| format!("{l}\n")).collect();
    fs::write(&short, trimmed).unwrap();
    let corpus_a = format!("KJV={}", corpus_file("kjv.txt").display());
    let corpus_b = format!("SHORT={}", short.display());

    let v = sermon(&["validate", "--corpus", &corpus_a, "--corpus", &corpus_b]);
    assert_eq!(v.status.code(), Some(2));
    assert!(String::from_utf8(v.stdout).unwrap().contains("SHORT\t7:29"));

    let out = tmp.path().join("o");
    let r = sermon(&["run", "--corpus", &corpus_a, "--corpus", &corpus_b, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8(r.stderr).unwrap().contains("alignment"));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn malformed_corpus_exit_2_and_missing_file_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.txt");
    fs::write(&bad, "5:2\tsecond\n5:1\tfirst\n").unwrap();
    let out = sermon(&["validate", "--corpus", &format!("X={}", bad.display())]);
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("nope.txt");
    let out = sermon(&["validate", "--corpus", &format!("X={}", missing.display())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_files_override_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::copy(corpus_file("kjv.txt"), tmp.path().join("kjv.txt")).unwrap();
    fs::copy(corpus_file("bbe.txt"), tmp.path().join("bbe.txt")).unwrap();
    let kv = tmp.path().join("run.conf");
    fs::write(&kv, "# two translations\ncorpus.KJV = kjv.txt\ncorpus.BBE = bbe.txt\ntop_k = 3\nout = kv-out\n").unwrap();
    let out = sermon(&["run", "--config", kv.to_str().unwrap(), "--top-k", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&tmp.path().join("kv-out"));
    assert_eq!(m["config"]["top_k"], 3);

    let ngrams = fs::read_to_string(tmp.path().join("kv-out/ngrams.csv")).unwrap();
    assert_eq!(ngrams.lines().count(), 1 + 2 * 2 * 3);

    let json = tmp.path().join("run.json");
    fs::write(&json, r#"{"corpus": {"KJV": "kjv.txt"}, "tau": 0.7, "out": "json-out"}"#).unwrap();
    assert!(sermon(&["run", "--config", json.to_str().unwrap()]).status.success());
    let m = manifest(&tmp.path().join("json-out"));
    assert_eq!(m["config"]["tau"], 0.7);

    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(sermon(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn calibration_sweep_reproduces_frozen_file() {
    let out = sermon(&["polarity", "--calibrate"]);
    assert!(out.status.success());
    let frozen = fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/calibration.json")).unwrap();
    assert_eq!(out.stdout, frozen);
}

#[test]
fn chapter_totals_from_polarity_subcommand() {
    let out = sermon(&["polarity", "--corpus", &format!("KJV={}", corpus_file("kjv.txt").display())]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "translation,chapter,total\nKJV,5,-8\nKJV,6,16\nKJV,7,6\n"
    );
}
