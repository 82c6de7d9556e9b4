use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SEEDS: &str = "- tanh + * 3 x 4 6\n+ sin x cos x\n* 2 + x 1\n- + x 8 8\n";

fn egen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egen"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("egen runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

/// A small corpus in `dir/out`, built from four seeds.
fn small_corpus(dir: &Path) {
    std::fs::write(dir.join("seeds.txt"), SEEDS).unwrap();
    let o = egen(
        dir,
        &[
            "--templates",
            "none",
            "--max-rewrites",
            "30",
            "--jobs",
            "1",
            "corpus",
            "--expr-list",
            "seeds.txt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn manifest(path: &Path) -> Value {
    let mut name = path.file_name().unwrap().to_os_string();
    name.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(path.with_file_name(name)).unwrap()).unwrap()
}

#[test]
fn saturate_reports_fig1_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&egen(
        dir.path(),
        &["--rules", "fig1", "saturate", "--expr", "- + x 8 8"],
    ));
    assert_eq!(v["report"]["stop_reason"], "saturated");
    let roots: Vec<&str> = v["grammar"]["root_productions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_str().unwrap())
        .collect();
    assert!(roots.contains(&"x"), "{roots:?}");
    assert!(roots.iter().any(|p| p.starts_with("- ")), "{roots:?}");
}

#[test]
fn corpus_outputs_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let out = dir.path().join("out");
    for name in ["clusters.jsonl", "pairs.tsv", "triplets.tsv"] {
        let path = out.join(name);
        let bytes = std::fs::read(&path).unwrap();
        let m = manifest(&path);
        assert_eq!(m["tool"], "egen");
        assert_eq!(m["command"], "corpus");
        assert_eq!(m["output"], name);
        assert_eq!(m["sha256"], hex::encode(Sha256::digest(&bytes)));
        assert_eq!(
            m["records"].as_u64().unwrap() as usize,
            bytes.iter().filter(|&&b| b == b'\n').count()
        );
        assert_eq!(m["config"]["max_rewrites"], 30);
    }
    let clusters = std::fs::read_to_string(out.join("clusters.jsonl")).unwrap();
    assert_eq!(clusters.lines().count(), 4);
    let first: Value = serde_json::from_str(clusters.lines().next().unwrap()).unwrap();
    assert_eq!(first["seed"], "- tanh + * 3 x 4 6");
    for line in std::fs::read_to_string(out.join("pairs.tsv")).unwrap().lines() {
        assert_eq!(line.split('\t').count(), 2);
    }
    for line in std::fs::read_to_string(out.join("triplets.tsv")).unwrap().lines() {
        assert_eq!(line.split('\t').count(), 3);
    }
}

#[test]
fn dataset_builders_run_on_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let d = dir.path();
    let clusters = "out/clusters.jsonl";

    let v = stdout_json(&egen(d, &["verify", "--clusters", clusters]));
    assert_eq!(v["not_equivalent"], 0);

    stdout_json(&egen(d, &["derive", "--clusters", clusters, "--count", "6"]));
    let derivations = std::fs::read_to_string(d.join("out/derivations.jsonl")).unwrap();
    for line in derivations.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["steps"].as_array().unwrap().len() >= 2);
    }

    stdout_json(&egen(d, &["split", "--clusters", clusters, "--fraction", "0.25"]));
    let train = std::fs::read_to_string(d.join("out/train.jsonl"))
        .unwrap()
        .lines()
        .count();
    let test = std::fs::read_to_string(d.join("out/test.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(train + test, 4);
    assert!(test >= 1);

    stdout_json(&egen(d, &["select-tests", "--clusters", clusters, "--count", "5"]));
    assert!(d.join("out/selection_tests.jsonl.manifest.json").exists());
}

#[test]
fn synthetic_embeddings_evaluate_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let d = dir.path();
    let clusters = "out/clusters.jsonl";
    stdout_json(&egen(
        d,
        &[
            "synth-embed",
            "--clusters",
            clusters,
            "--dim",
            "8",
            "--sigma",
            "0",
            "--algebra-tests",
            "5",
        ],
    ));
    let emb = "out/embeddings.tsv";
    let km = stdout_json(&egen(
        d,
        &["eval", "kmeans", "--embeddings", emb, "--clusters", clusters],
    ));
    assert_eq!(km["accuracy"], 1.0);
    let r = stdout_json(&egen(
        d,
        &[
            "eval",
            "retrieve",
            "--embeddings",
            emb,
            "--clusters",
            clusters,
            "--k",
            "1",
        ],
    ));
    assert_eq!(r["accuracy"], 1.0);
    let a = stdout_json(&egen(
        d,
        &[
            "eval",
            "algebra",
            "--embeddings",
            emb,
            "--tests",
            "out/algebra_tests.jsonl",
            "--clusters",
            clusters,
        ],
    ));
    assert_eq!(a["accuracy"], 1.0);
    let q = stdout_json(&egen(
        d,
        &[
            "eval",
            "retrieve",
            "--embeddings",
            emb,
            "--query",
            "- tanh + * 3 x 4 6",
            "--k",
            "3",
        ],
    ));
    assert_eq!(q["results"].as_array().unwrap().len(), 3);
    assert_eq!(q["results"][0]["similarity"], 1.0);
}

#[test]
fn mistakes_on_derivation_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let d = dir.path();
    stdout_json(&egen(
        d,
        &[
            "derive",
            "--clusters",
            "out/clusters.jsonl",
            "--count",
            "8",
            "--mistake-prob",
            "0.5",
        ],
    ));
    stdout_json(&egen(
        d,
        &["synth-embed", "--derivations", "out/derivations.jsonl", "--sigma", "0"],
    ));
    let v = stdout_json(&egen(
        d,
        &[
            "eval",
            "mistakes",
            "--embeddings",
            "out/embeddings.tsv",
            "--derivations",
            "out/derivations.jsonl",
        ],
    ));
    assert_eq!(v["threshold"], 1.0);
    if v["report"]["mistake"]["support"].as_u64().unwrap() > 0 {
        assert_eq!(v["report"]["mistake"]["f1"], 1.0);
    }
    let none = stdout_json(&egen(
        d,
        &[
            "eval",
            "mistakes",
            "--embeddings",
            "out/embeddings.tsv",
            "--derivations",
            "out/derivations.jsonl",
            "--threshold",
            "-1",
        ],
    ));
    assert_eq!(none["report"]["mistake"]["recall"], 0.0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "seed = 5\nmax_rewrites = 7\ntemplates = \"none\"\n").unwrap();
    std::fs::write(d.join("seeds.txt"), "* 2 + x 1\n").unwrap();
    let o = egen(
        d,
        &[
            "--config",
            "run.toml",
            "--seed",
            "9",
            "--jobs",
            "1",
            "corpus",
            "--expr-list",
            "seeds.txt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&d.join("out/clusters.jsonl"));
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["max_rewrites"], 7);
    let c: Value = serde_json::from_str(std::fs::read_to_string(d.join("out/clusters.jsonl")).unwrap().trim()).unwrap();
    assert!(c["exprs"].as_array().unwrap().len() <= 7);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(code(&egen(d, &["--config", "bad.toml", "saturate", "--expr", "x"])), 1);
    assert_eq!(code(&egen(d, &["--max-nodes", "0", "saturate", "--expr", "x"])), 1);
    assert_eq!(code(&egen(d, &["saturate", "--expr", "(+ x"])), 1);
    assert_eq!(code(&egen(d, &["frobnicate"])), 1);
    assert_eq!(code(&egen(d, &["--templates", "none", "corpus"])), 1);
    assert_eq!(code(&egen(d, &["verify", "--clusters", "missing.jsonl"])), 2);
    assert_eq!(code(&egen(d, &["--help"])), 0);
    assert_eq!(code(&egen(d, &["--version"])), 0);
}

#[test]
fn verify_rejects_a_wrong_member() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let d = dir.path();
    let text = std::fs::read_to_string(d.join("out/clusters.jsonl")).unwrap();
    let mut first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    first["exprs"].as_array_mut().unwrap().push("+ x 1".into());
    std::fs::write(d.join("bad.jsonl"), format!("{first}\n")).unwrap();
    let o = egen(d, &["verify", "--clusters", "bad.jsonl"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["not_equivalent"], 1);
}
