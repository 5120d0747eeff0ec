use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dalloc_cli::report::{aggregate_curves, CurvePoint};
use dalloc_cli::RunManifest;
use dalloc_core::simulator::CurveRecord;

const SMALL: &str = r#"
[experiment]
batch_size = 80
n_batches = 5
mc_iterations = 3
history_customers = 3000
policies = [{ kind = "thompson_sampling" }, { kind = "greedy" }, { kind = "random" }]

[experiment.training]
epochs = 4

[data]
customers = 3000

[simulate]
elasticity_train_customers = 1500
eval_customers = 100
grid_points = 11

[replay]
batch_size = 300
"#;

fn dalloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dalloc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = dalloc(args);
    assert!(
        out.status.success(),
        "dalloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn read_records(path: &Path) -> Vec<CurveRecord> {
    csv::Reader::from_path(path).unwrap().deserialize().map(Result::unwrap).collect()
}

#[test]
fn gen_data_is_deterministic_and_uniform() {
    let f = Fixture::new();
    ok(&["gen-data", "--config", &f.s("small.toml"), "--out", &f.s("a")]);
    ok(&["gen-data", "--config", &f.s("small.toml"), "--out", &f.s("b")]);
    let a = std::fs::read(f.path("a/log.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(f.path("b/log.jsonl")).unwrap());

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["format"], "dalloc-replay-log");
    assert_eq!(header["n_events"], 3000);
    let mut counts = [0usize; 5];
    let mut n = 0;
    for line in lines {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        let k = ((row["depth"].as_f64().unwrap() * 10.0).round() as usize) - 1;
        counts[k] += 1;
        n += 1;
    }
    assert_eq!(n, 3000);
    // Binomial(3000, 1/5): sd = sqrt(3000 * 0.2 * 0.8) ~ 21.9; allow 4 sd.
    for c in counts {
        assert!((c as f64 - 600.0).abs() < 4.0 * 21.91, "{counts:?}");
    }

    ok(&["gen-data", "--config", &f.s("small.toml"), "--seed", "5", "--out", &f.s("c")]);
    assert_ne!(
        std::fs::read(f.path("a/log.jsonl")).unwrap(),
        std::fs::read(f.path("c/log.jsonl")).unwrap()
    );
}

#[test]
fn train_embeddings_checkpoint_and_losses() {
    let f = Fixture::new();
    ok(&["gen-data", "--config", &f.s("small.toml"), "--out", &f.s("d")]);
    for out in ["e1", "e2"] {
        ok(&["train-embeddings", "--config", &f.s("small.toml"), "--data", &f.s("d/log.jsonl"), "--out", &f.s(out)]);
    }
    let a = std::fs::read(f.path("e1/embedding.json")).unwrap();
    assert_eq!(a, std::fs::read(f.path("e2/embedding.json")).unwrap());

    let model = dalloc_core::EmbeddingModel::load(&f.path("e1/embedding.json")).unwrap();
    let x = dalloc_core::CustomerFeatures::new(0, vec![0.3; 20]);
    let again = dalloc_core::EmbeddingModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(model.predict_log_basket(&x).unwrap(), again.predict_log_basket(&x).unwrap());

    let m = RunManifest::read(&f.path("e1/manifest-train-embeddings.json")).unwrap();
    let losses = m.training_losses.unwrap();
    assert_eq!(losses.len(), 4);
    assert!(losses.last().unwrap() < losses.first().unwrap(), "{losses:?}");
    assert_eq!(m.outputs[0].path, "embedding.json");
}

#[test]
fn train_embeddings_rejects_feature_mismatch() {
    let f = Fixture::new();
    ok(&["gen-data", "--config", &f.s("small.toml"), "--out", &f.s("d")]);
    std::fs::write(f.path("narrow.toml"), format!("{SMALL}\n[experiment.architecture]\nn_features = 7\n")).unwrap();
    let out = dalloc(&["train-embeddings", "--config", &f.s("narrow.toml"), "--data", &f.s("d/log.jsonl"), "--out", &f.s("e")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_outputs_and_rerun_from_manifest() {
    let f = Fixture::new();
    ok(&["simulate", "--config", &f.s("small.toml"), "--out", &f.s("s1"), "--workers", "1"]);
    let records = read_records(&f.path("s1/curves.csv"));
    assert_eq!(records.len(), 3 * 5 * 3);
    let points = aggregate_curves(&records);
    for p in points.iter().filter(|p| p.policy == "Random") {
        assert!((p.mean_scaled_abv - 1.0).abs() < 1e-12);
    }

    let sidecar: Vec<CurvePoint> = csv::Reader::from_path(f.path("s1/learning_curves.csv"))
        .unwrap()
        .deserialize()
        .map(Result::unwrap)
        .collect();
    assert_eq!(sidecar, points);

    let manifest = RunManifest::read(&f.path("s1/manifest-simulate.json")).unwrap();
    for chart in ["learning_curves.svg", "ulcc_curves.svg", "elasticity_curve.svg", "uncertainty_profile.svg"] {
        let svg = std::fs::read_to_string(f.path("s1").join(chart)).unwrap();
        assert!(svg.contains(&manifest.config_hash), "{chart}");
        assert!(manifest.outputs.iter().any(|o| o.path == chart));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("s1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["policies"].as_array().unwrap().len(), 3);
    assert!(summary["ulcc"]["degradation_pct"].is_number());

    ok(&["simulate", "--config", &f.s("s1/manifest-simulate.json"), "--out", &f.s("s2"), "--workers", "3"]);
    for o in manifest.outputs.iter().filter(|o| !o.path.starts_with("manifest")) {
        assert_eq!(
            std::fs::read(f.path("s1").join(&o.path)).unwrap(),
            std::fs::read(f.path("s2").join(&o.path)).unwrap(),
            "{}",
            o.path
        );
    }
    let second = RunManifest::read(&f.path("s2/manifest-simulate.json")).unwrap();
    assert_eq!(second.config_hash, manifest.config_hash);
}

#[test]
fn report_regenerates_charts() {
    let f = Fixture::new();
    let cfg = format!("{SMALL}\n");
    let cfg = cfg.replace("[simulate]\n", "[simulate]\nulcc = false\nuncertainty = false\n");
    std::fs::write(f.path("lean.toml"), cfg).unwrap();
    ok(&["simulate", "--config", &f.s("lean.toml"), "--out", &f.s("s")]);
    let before = std::fs::read(f.path("s/learning_curves.svg")).unwrap();
    std::fs::remove_file(f.path("s/learning_curves.svg")).unwrap();
    ok(&["report", "--results", &f.s("s")]);
    assert_eq!(std::fs::read(f.path("s/learning_curves.svg")).unwrap(), before);
    assert!(f.path("s/elasticity_curve.svg").exists());
    assert!(!f.path("s/ulcc_curves.svg").exists());
    let m = RunManifest::read(&f.path("s/manifest-report.json")).unwrap();
    let svgs = m.outputs.iter().filter(|o| o.path.ends_with(".svg")).count();
    assert_eq!(svgs, 2);

    std::fs::create_dir(f.path("empty")).unwrap();
    let out = dalloc(&["report", "--results", &f.s("empty")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no results"));
}

#[test]
fn replay_reports_batches_and_rejects_skewed_logs() {
    let f = Fixture::new();
    ok(&["gen-data", "--config", &f.s("small.toml"), "--out", &f.s("d")]);
    ok(&["replay", "--config", &f.s("small.toml"), "--log", &f.s("d/log.jsonl"), "--out", &f.s("r")]);
    let mut rdr = csv::Reader::from_path(f.path("r/replay_batches.csv")).unwrap();
    assert!(rdr.headers().unwrap().iter().any(|h| h == "retained_fraction"));
    assert_eq!(rdr.records().count(), 10);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("r/replay.json")).unwrap()).unwrap();
    assert_eq!(summary["n_events"], 3000);

    let text = std::fs::read_to_string(f.path("d/log.jsonl")).unwrap();
    let mut lines = text.lines();
    let mut header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let kept: Vec<&str> = lines.filter(|l| !l.contains("\"depth\":0.5")).collect();
    header["n_events"] = kept.len().into();
    std::fs::write(f.path("skewed.jsonl"), format!("{header}\n{}\n", kept.join("\n"))).unwrap();
    let out = dalloc(&["replay", "--config", &f.s("small.toml"), "--log", &f.s("skewed.jsonl"), "--out", &f.s("r2")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not uniformly randomised"));
}

#[test]
fn allocate_worked_example_and_validation() {
    let f = Fixture::new();
    std::fs::write(f.path("scores.csv"), "customer,0.2,0.4\n1,10,12\n2,8,11\n").unwrap();
    std::fs::write(f.path("c.json"), r#"{"w": 1.0, "engagement": [1.0, 1.0], "capacities": [1, 1]}"#).unwrap();
    let out = ok(&["allocate", "--scores", &f.s("scores.csv"), "--constraints", &f.s("c.json"), "--out", &f.s("a")]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("objective 8.2"));
    assert_eq!(std::fs::read_to_string(f.path("a/assignment.csv")).unwrap(), "customer,depth\n1,0.2\n2,0.4\n");

    std::fs::write(f.path("neg.json"), r#"{"w": 1.0, "engagement": [1.0, 1.0], "capacities": [-1, 2]}"#).unwrap();
    let out = dalloc(&["allocate", "--scores", &f.s("scores.csv"), "--constraints", &f.s("neg.json"), "--out", &f.s("b")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative"));

    std::fs::write(f.path("bad.csv"), "customer,0.2,1.7\n1,10,12\n").unwrap();
    let out = dalloc(&["allocate", "--scores", &f.s("bad.csv"), "--constraints", &f.s("c.json"), "--out", &f.s("b")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn allocate_respects_capacities() {
    let f = Fixture::new();
    let mut csv = String::from("customer,0.1,0.3,0.5\n");
    for i in 0..40u64 {
        let base = 5.0 + (i * 7 % 13) as f64;
        csv.push_str(&format!("{i},{},{},{}\n", base, base * 1.3, base * 1.5));
    }
    std::fs::write(f.path("scores.csv"), csv).unwrap();
    std::fs::write(f.path("c.json"), r#"{"w": 3.0, "engagement": [0.2, 0.3, 0.4], "capacities": [5, 10, 3]}"#).unwrap();
    ok(&["allocate", "--scores", &f.s("scores.csv"), "--constraints", &f.s("c.json"), "--out", &f.s("a")]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("a/allocation.json")).unwrap()).unwrap();
    let usage: Vec<u64> = summary["usage"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(usage, vec![5, 10, 3]);
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(dalloc(&["simulate", "--out", &f.s("x"), "--profile", "huge"]).status.code(), Some(2));
    std::fs::write(f.path("typo.toml"), "[experiment]\nbatchsize = 3\n").unwrap();
    assert_eq!(dalloc(&["gen-data", "--config", &f.s("typo.toml"), "--out", &f.s("x")]).status.code(), Some(2));
    assert_eq!(dalloc(&["gen-data", "--config", &f.s("missing.toml"), "--out", &f.s("x")]).status.code(), Some(2));
    assert_eq!(dalloc(&["gen-data", "--config", &f.s("small.toml"), "--workers", "0", "--out", &f.s("x")]).status.code(), Some(2));

    // An output "directory" that is a regular file is a runtime failure.
    std::fs::write(f.path("occupied"), "").unwrap();
    let out = dalloc(&["gen-data", "--config", &f.s("small.toml"), "--out", &f.s("occupied")]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(dalloc(&["--help"]).status.code(), Some(0));
}
