//! End-to-end runs of the `mvrbm` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mvrbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvrbm")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mvrbm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        ok(&[
            "synth", "--concepts", "3", "--per-concept", "20", "--seed", "5",
            "--out", s(&f.path("data.jsonl")), "--schema", s(&f.path("schema.txt")),
        ]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, out: &str, extra: &[&str]) -> Vec<u8> {
        let (schema, data, model, log) = (self.path("schema.txt"), self.path("data.jsonl"), self.path(out), self.path("log.tsv"));
        let mut args = vec![
            "train", "--schema", s(&schema), "--data", s(&data), "--out", s(&model), "--log", s(&log),
            "--hidden", "8", "--epochs", "5", "--batch", "10", "--seed", "3",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(model).unwrap()
    }
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let f = Fixture::new();
    let a = f.train("a.txt", &["--alpha", "0.01", "--groups", "2", "--beta", "0.1"]);
    let b = f.train("b.txt", &["--alpha", "0.01", "--groups", "2", "--beta", "0.1"]);
    let c = f.train("c.txt", &["--alpha", "0.01", "--groups", "2", "--beta", "0.1", "--threads", "1"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let log = std::fs::read_to_string(f.path("log.tsv")).unwrap();
    assert!(log.starts_with("epoch\trecon_error\tmean_group_norm\tintra_kl\tinter_kl\n"));
    assert_eq!(log.lines().count(), 6);
}

#[test]
fn self_retrieval_and_evaluation() {
    let f = Fixture::new();
    f.train("m.txt", &[]);
    let model = f.path("m.txt");
    let data = f.path("data.jsonl");
    let table = ok(&["retrieve", "--model", s(&model), "--data", s(&data), "--k", "5"]);
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 60 * 5);
    for q in 0..60 {
        let own = rows.iter().find(|r| r[0] == q.to_string() && r[2] == q.to_string()).expect("query finds itself");
        assert_eq!(own[3], "0");
        assert_eq!(rows[q * 5][3], "0");
    }

    let perfect = f.path("perfect.tsv");
    std::fs::write(&perfect, "query\trank\tid\tdistance\trelevant\n0\t1\t4\t0.1\t1\n0\t2\t5\t0.2\t1\n0\t3\t6\t0.3\t0\n1\t1\t2\t0.1\t1\n").unwrap();
    let report = ok(&["eval", "--rankings", s(&perfect), "--k", "3", "--method", "ideal"]);
    assert_eq!(report, "method\tmetric\tvalue\tstd\nideal\tMAP@3\t1\t0\nideal\tNDCG@3\t1\t0\n");

    let projected = ok(&["project", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(projected.lines().count(), 61);
    assert!(projected.starts_with("id\tp1\t"));
    let clusters = ok(&["cluster", "--model", s(&model), "--data", s(&data), "--clusters", "3"]);
    assert_eq!(clusters.lines().count(), 61);
}

#[test]
fn predict_ranks_candidates() {
    let f = Fixture::new();
    f.train("m.txt", &[]);
    let table = ok(&[
        "predict", "--model", s(&f.path("m.txt")), "--data", s(&f.path("data.jsonl")), "--unit", "tokens",
        "--candidates", "3,1,7", "--mask",
    ]);
    let probs: Vec<f64> = table.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    let bad = mvrbm(&["predict", "--model", s(&f.path("m.txt")), "--data", s(&f.path("data.jsonl")), "--unit", "g0"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn gradcheck_passes_on_random_model() {
    let f = Fixture::new();
    let schema = f.path("tiny.txt");
    std::fs::write(&schema, "mvrbm-schema 1\nunit x binary\nunit c categorical 3\nunit w replicated_softmax 3\n").unwrap();
    let out = ok(&["gradcheck", "--schema", s(&schema), "--groups", "3"]);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().skip(1).all(|l| l.ends_with("\tpass")), "{out}");
    let strict = mvrbm(&["gradcheck", "--schema", s(&schema), "--tolerance", "0"]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn refuses_unknown_model_version() {
    let f = Fixture::new();
    f.train("m.txt", &[]);
    let text = std::fs::read_to_string(f.path("m.txt")).unwrap();
    assert!(text.starts_with("mvrbm-model 1\n"));
    let future = f.path("future.txt");
    std::fs::write(&future, text.replacen("mvrbm-model 1", "mvrbm-model 2", 1)).unwrap();
    let out = mvrbm(&["project", "--model", s(&future), "--data", s(&f.path("data.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    assert_eq!(mvrbm(&["train", "--bogus"]).status.code(), Some(1));
}
