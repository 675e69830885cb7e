use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"{
  "seed": 3,
  "schedule": { "steps": 20, "beta_start": 0.001, "beta_end": 0.2 },
  "model": { "hidden": [16], "embed_width": 4, "activation": "tanh" },
  "setups": [
    {
      "id": "tiny",
      "member": { "family": "gaussian-field", "params": { "length_scale": 0.7 } },
      "nonmember": { "family": "gaussian-field", "params": { "length_scale": 0.7 }, "shift_delta": 0.3 },
      "n_train": 16,
      "n_eval_per_side": 6,
      "train": {
        "epochs": 3, "batch_size": 4, "learning_rate": 0.002,
        "optimizer": "adam", "lr_schedule": "cosine", "noise_draws": 1
      }
    }
  ],
  "classifier": { "boost": { "n_estimators": 10 } }
}
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_miabench"))
}

fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = bin();
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    out.sort();
    out
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.json"), TINY).unwrap();
        Fixture { dir }
    }
    fn config(&self) -> PathBuf {
        self.dir.path().join("tiny.json")
    }
    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }
    fn run(&self, args: &[&str]) -> Output {
        run(args, Some(&self.config()))
    }
    fn data_and_model(&self) -> (String, String) {
        let (data, ck) = (self.path("data"), self.path("model.ckpt"));
        ok(&self.run(&["gen-data", "--preset", "tiny", "--out", &data]));
        ok(&self.run(&["train", "--preset", "tiny", "--data", &data, "--out", &ck]));
        (data, ck)
    }
}

#[test]
fn gen_data_is_byte_identical() {
    let f = Fixture::new();
    let (a, b) = (f.path("a"), f.path("b"));
    ok(&f.run(&["gen-data", "--preset", "tiny", "--out", &a]));
    ok(&f.run(&["gen-data", "--preset", "tiny", "--out", &b]));
    assert_eq!(read_dir_bytes(Path::new(&a)), read_dir_bytes(Path::new(&b)));
    let c = f.path("c");
    ok(&f.run(&["--seed", "4", "gen-data", "--preset", "tiny", "--out", &c]));
    assert_ne!(read_dir_bytes(Path::new(&a)), read_dir_bytes(Path::new(&c)));
}

#[test]
fn attack_and_eval_pipeline() {
    let f = Fixture::new();
    let (data, ck) = f.data_and_model();
    assert!(Path::new(&f.path("model.log.csv")).exists());
    for method in ["secmi", "pia", "pfami", "gsa1", "blind"] {
        let (a, b) = (f.path(&format!("{method}.csv")), f.path(&format!("{method}2.csv")));
        ok(&f.run(&["attack", "--checkpoint", &ck, "--data", &data, "--method", method, "--out", &a]));
        ok(&f.run(&["attack", "--checkpoint", &ck, "--data", &data, "--method", method, "--out", &b]));
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 6, "{method}");
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{method}");

        let report = f.path(&format!("{method}.json"));
        ok(&f.run(&["eval", "--method", method, "--scores", &a, "--data", &data, "--setup", "tiny", "--out", &report]));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(v["method"], method);
        assert_eq!(v["setup"], "tiny");
    }
    let shift = f.path("shift.json");
    let emb = f.path("emb.csv");
    ok(&f.run(&["shift", "--data", &data, "--out", &shift, "--dump-embeddings", &emb]));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&shift).unwrap()).unwrap();
    let tpr = v["val"]["tpr"].as_f64().unwrap();
    assert!((tpr + v["val"]["fnr"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(std::fs::read_to_string(&emb).unwrap().lines().count(), 1 + 24);
}

#[test]
fn separable_scores_give_auc_one() {
    let f = Fixture::new();
    let (val, test, out) = (f.path("val.csv"), f.path("test.csv"), f.path("r.json"));
    let mut csv = String::from("sample_id,score,label\n");
    for i in 0..50 {
        csv.push_str(&format!("{i},{},1\n", i as f64 * 0.01));
        csv.push_str(&format!("{},{},0\n", 100 + i, 1.0 + i as f64 * 0.01));
    }
    std::fs::write(&val, &csv).unwrap();
    std::fs::write(&test, &csv).unwrap();
    let o = run(&["eval", "--method", "secmi", "--val", &val, "--test", &test, "--out", &out], None);
    ok(&o);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["val"]["auc"].as_f64(), Some(1.0));
    assert_eq!(v["val"]["tpr_at_1pct"].as_f64(), Some(1.0));
    assert_eq!(v["test"]["tpr_1pct"].as_f64(), Some(1.0));
}

#[test]
fn malformed_csv_exits_2_with_line() {
    let f = Fixture::new();
    let (val, out) = (f.path("bad.csv"), f.path("r.json"));
    std::fs::write(&val, "sample_id,score,label\n1,0.5,1\n2,oops,0\n").unwrap();
    let o = run(&["eval", "--method", "pia", "--val", &val, "--test", &val, "--out", &out], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    let o = run(&["eval", "--method", "nope", "--val", "a", "--test", "b", "--out", "c"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["gen-data", "--preset", "analog-z", "--out", "/tmp/never"], None);
    assert_eq!(o.status.code(), Some(1));
    let f = Fixture::new();
    std::fs::write(f.config(), r#"{ "sede": 1 }"#).unwrap();
    assert_eq!(f.run(&["config"]).status.code(), Some(1));
}

#[test]
fn config_output_is_canonical() {
    let f = Fixture::new();
    let a = f.run(&["config"]);
    ok(&a);
    let path = f.path("again.json");
    std::fs::write(&path, &a.stdout).unwrap();
    let b = run(&["config"], Some(Path::new(&path)));
    ok(&b);
    assert_eq!(a.stdout, b.stdout);
}
