use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coeba::graph::{EdgeSplit, Graph};
use coeba::report;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three-block stochastic block model with noisy block-indicator features.
fn sbm(seed: u64) -> Graph {
    let (blocks, size, dim) = (3, 40, 12);
    let n = blocks * size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u / size == v / size { 0.15 } else { 0.01 };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let mut x = Array2::zeros((n, dim));
    for u in 0..n {
        x[[u, u / size]] = 1.0;
        for j in blocks..dim {
            if rng.random::<f64>() < 0.2 {
                x[[u, j]] = 1.0;
            }
        }
    }
    Graph::new(n, edges, x).unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("toy.edges");
        let features = dir.path().join("toy.features");
        sbm(5).save(&edges, &features).unwrap();
        let config = dir.path().join("toy.cfg");
        let text = format!(
            "data.name = toy\n\
             data.edges = {}\n\
             data.features = {}\n\
             train.epochs = 24\n\
             train.num_splits = 2\n\
             train.eval_every = 4\n\
             train.lr = 0.01\n\
             eba.warmup_epochs = 8\n\
             eba.period = 8\n\
             model.hidden_dim = 16\n\
             model.out_dim = 8\n\
             eval.cluster_k = 3\n\
             eval.distance_sample = 500\n",
            edges.display(),
            features.display()
        );
        std::fs::write(&config, text).unwrap();
        Fixture { dir, config }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_coeba"));
        cmd.args(args).env_remove("COEBA_DATA_DIR");
        cmd.output().unwrap()
    }

    fn run_ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn cfg(&self) -> &str {
        self.config.to_str().unwrap()
    }
}

fn body(path: impl AsRef<Path>) -> String {
    report::read_body(path).unwrap()
}

#[test]
fn train_writes_reports_logs_and_checkpoints() {
    let f = Fixture::new();
    let out = f.path("train");
    let stdout = f.run_ok(&[
        "train",
        "--config",
        f.cfg(),
        "--out",
        out.to_str().unwrap(),
        "--k",
        "20",
    ]);
    assert!(stdout.contains("hits@10"));
    assert!(stdout.contains("hits@20"));

    let run = report::read_run(out.join("report.json")).unwrap();
    assert_eq!(run.report.per_split_scores.len(), 2);
    assert!(run.report.hits_at_k.contains_key(&20));
    assert!(run.report.distance_stats.is_some());
    assert!(run.report.cluster_stats.is_some());
    for name in [
        "config.cfg",
        "distance_connected.tsv",
        "distance_unconnected.tsv",
        "cluster_density.tsv",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    for s in 0..2 {
        let sub = out.join(format!("split{s}"));
        let manifest = EdgeSplit::read_manifest(sub.join("split.txt")).unwrap();
        assert_eq!(manifest.digest(), run.report.per_split_scores[s].manifest_sha256);
        let log = std::fs::read_to_string(sub.join("train.log")).unwrap();
        assert!(log.starts_with("# epoch\trecon_ori"));
        assert_eq!(log.lines().count(), 25);
        let index = std::fs::read_to_string(sub.join("checkpoints.txt")).unwrap();
        for line in index.lines() {
            let name = line.split(" = ").nth(1).unwrap();
            assert!(sub.join(name).is_file(), "{name}");
        }
    }
}

#[test]
fn runs_are_deterministic_and_train_matches_the_full_arm() {
    let f = Fixture::new();
    let a = f.path("a");
    let b = f.path("b");
    let c = f.path("c");
    f.run_ok(&[
        "train",
        "--config",
        f.cfg(),
        "--out",
        a.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    f.run_ok(&[
        "train",
        "--config",
        f.cfg(),
        "--out",
        b.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    f.run_ok(&[
        "ablate",
        "--config",
        f.cfg(),
        "--out",
        c.to_str().unwrap(),
        "--arm",
        "full,no_eba_cl",
    ]);
    assert_eq!(body(a.join("report.json")), body(b.join("report.json")));
    assert_eq!(body(a.join("report.json")), body(c.join("full/report.json")));
    assert_ne!(body(a.join("report.json")), body(c.join("no_eba_cl/report.json")));
    let summary: report::Summary = serde_json::from_str(&body(c.join("summary.json"))).unwrap();
    assert_eq!(summary.rows.len(), 2);

    let other_seed = f.path("d");
    f.run_ok(&[
        "train",
        "--config",
        f.cfg(),
        "--out",
        other_seed.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_ne!(body(a.join("report.json")), body(other_seed.join("report.json")));
}

#[test]
fn plug_shares_splits_between_arms() {
    let f = Fixture::new();
    let out = f.path("plug");
    f.run_ok(&[
        "plug",
        "--config",
        f.cfg(),
        "--out",
        out.to_str().unwrap(),
        "--backbone",
        "gnae",
    ]);
    for s in 0..2 {
        let base = std::fs::read(out.join(format!("baseline/split{s}/split.txt"))).unwrap();
        let eba = std::fs::read(out.join(format!("eba/split{s}/split.txt"))).unwrap();
        assert_eq!(base, eba);
    }
    let summary: report::Summary = serde_json::from_str(&body(out.join("summary.json"))).unwrap();
    let labels: Vec<&str> = summary.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["GNAE", "GNAE+EBA"]);
}

#[test]
fn eval_and_diagnose_read_back_checkpoints() {
    let f = Fixture::new();
    let out = f.path("train");
    f.run_ok(&[
        "train",
        "--config",
        f.cfg(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "train.num_splits=1",
    ]);
    let sub = out.join("split0");
    let index = std::fs::read_to_string(sub.join("checkpoints.txt")).unwrap();
    let best = index.lines().next().unwrap().split(" = ").nth(1).unwrap();
    let ckpt = sub.join(best);
    let manifest = sub.join("split.txt");

    let ev = f.path("eval");
    f.run_ok(&[
        "eval",
        "--config",
        f.cfg(),
        "--out",
        ev.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    let trained = report::read_run(out.join("report.json")).unwrap();
    let evaluated = report::read_run(ev.join("report.json")).unwrap();
    assert_eq!(
        trained.report.per_split_scores[0].hits[&10],
        evaluated.report.per_split_scores[0].hits[&10]
    );

    let diag = f.path("diag");
    let stdout = f.run_ok(&[
        "diagnose",
        "--config",
        f.cfg(),
        "--out",
        diag.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--clusters",
        "3",
    ]);
    assert!(stdout.contains("modularity"));
    let run = report::read_run(diag.join("report.json")).unwrap();
    assert_eq!(run.report.cluster_stats.unwrap().k, 3);
    assert!(run.report.min_degree_augmented >= run.report.min_degree_original);
}

#[test]
fn augment_writes_a_view_with_provenance() {
    let f = Fixture::new();
    let out = f.path("aug");
    f.run_ok(&[
        "augment",
        "--config",
        f.cfg(),
        "--out",
        out.to_str().unwrap(),
        "--full-graph",
    ]);
    let edges = std::fs::read_to_string(out.join("augmented.edges")).unwrap();
    assert!(edges.starts_with('#'));
    let g = Graph::load(out.join("augmented.edges"), out.join("augmented.features")).unwrap();
    assert_eq!(g.n_nodes(), 120);
    let stats: serde_json::Value = serde_json::from_str(&body(out.join("augment.json"))).unwrap();
    assert!(stats["min_degree_augmented"].as_u64() >= stats["min_degree_original"].as_u64());
}

#[test]
fn grid_skips_pairs_without_more_addition_than_removal() {
    let f = Fixture::new();
    let out = f.path("grid");
    f.run_ok(&[
        "grid",
        "--config",
        f.cfg(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "train.num_splits=1",
        "--rm",
        "0.1,0.5",
        "--ra",
        "0.3",
    ]);
    let table = std::fs::read_to_string(out.join("grid.tsv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(out.join("rm0.1_ra0.3/report.json").is_file());
    assert!(!out.join("rm0.5_ra0.3").exists());
}

#[test]
fn failures_map_to_exit_codes() {
    let f = Fixture::new();
    let out = f.path("x");
    let out = out.to_str().unwrap();
    let code = |args: &[&str]| f.run(args).status.code().unwrap();

    assert_eq!(code(&["train", "--bogus"]), 2);
    assert_eq!(
        code(&["train", "--config", f.cfg(), "--out", out, "--set", "nope=1"]),
        2
    );
    assert_eq!(
        code(&["train", "--config", f.cfg(), "--out", out, "--set", "eba.r_a=0.1"]),
        2
    );
    assert_eq!(
        code(&[
            "train",
            "--config",
            f.cfg(),
            "--out",
            out,
            "--set",
            "data.edges=/no/such/file"
        ]),
        3
    );

    let bad = f.path("bad.edges");
    std::fs::write(&bad, "0 1\n0 999\n").unwrap();
    let set = format!("data.edges={}", bad.display());
    let res = f.run(&["train", "--config", f.cfg(), "--out", out, "--set", &set]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bad.edges:2:"));

    let ckpt = f.path("garbage.ckpt");
    std::fs::write(&ckpt, "hello\n").unwrap();
    let manifest = f.path("missing.txt");
    assert_eq!(
        code(&[
            "eval",
            "--config",
            f.cfg(),
            "--out",
            out,
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--manifest",
            manifest.to_str().unwrap()
        ]),
        3
    );
}
