//! End-to-end CLI behavior: output shapes, exit codes, and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_padic-prob"))
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("padic-prob-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is one JSON document")
}

const REMARK_SPACE: &str = r#"{
  "p": 5,
  "precision": 12,
  "outcomes": [
    {"id": "alpha", "prob": "1/2"},
    {"id": "beta", "prob": "1/4"},
    {"id": "gamma", "prob": "1/4"}
  ],
  "vars": {
    "X": {"alpha": "1", "beta": "0", "gamma": "0"},
    "C": {"alpha": "7", "beta": "7", "gamma": "7"}
  },
  "partitions": {
    "G": [["alpha", "beta"], ["gamma"]],
    "trivial": [["alpha", "beta", "gamma"]]
  }
}"#;

#[test]
fn expect_remark_fixture() {
    let space = write_temp("remark.json", REMARK_SPACE);
    let out = run(&["expect", space.to_str().unwrap(), "--var", "X"]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["center"], "0");
    assert_eq!(json["radius"], "5^0");
    assert_eq!(json["epsilon"], "5^0");
}

#[test]
fn expect_constant_is_point() {
    let space = write_temp("remark2.json", REMARK_SPACE);
    let out = run(&["expect", space.to_str().unwrap(), "--var", "C"]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["radius"], "0");
    assert_eq!(json["epsilon"], "0");
    assert_eq!(json["center"], "5^0*7");
}

#[test]
fn expect_rejects_bad_probability_sum() {
    let bad = write_temp(
        "bad.json",
        r#"{"p":5,"precision":12,"outcomes":[
            {"id":"a","prob":"1/2"},{"id":"b","prob":"1/3"}]}"#,
    );
    let out = run(&["expect", bad.to_str().unwrap(), "--var", "X"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn condexpect_remark_fixture() {
    let space = write_temp("remark3.json", REMARK_SPACE);
    let out = run(&[
        "condexpect",
        space.to_str().unwrap(),
        "--var",
        "X",
        "--partition",
        "G",
    ]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    let atoms = json["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 2);
    assert_eq!(atoms[0]["center"], "0");
    assert_eq!(atoms[0]["radius"], "5^0");
    assert_eq!(atoms[1]["center"], "0");
    assert_eq!(atoms[1]["radius"], "0");
}

#[test]
fn condexpect_trivial_matches_expect() {
    let space = write_temp("remark4.json", REMARK_SPACE);
    let cond = run(&[
        "condexpect",
        space.to_str().unwrap(),
        "--var",
        "X",
        "--partition",
        "trivial",
    ]);
    let whole = run(&["expect", space.to_str().unwrap(), "--var", "X"]);
    let cond = stdout_json(&cond);
    let whole = stdout_json(&whole);
    let atom = &cond["atoms"][0];
    assert_eq!(atom["center"], whole["center"]);
    assert_eq!(atom["radius"], whole["radius"]);
}

#[test]
fn condexpect_rejects_non_cover() {
    let bad = write_temp(
        "noncover.json",
        r#"{"p":5,"precision":12,
            "outcomes":[{"id":"a","prob":"1/2"},{"id":"b","prob":"1/2"}],
            "vars":{"X":{"a":"1","b":"0"}},
            "partitions":{"G":[["a"]]}}"#,
    );
    let out = run(&[
        "condexpect",
        bad.to_str().unwrap(),
        "--var",
        "X",
        "--partition",
        "G",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_is_deterministic_and_supported() {
    let args = ["sample", "--p", "5", "--k", "2", "--precision", "8", "--count", "5", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "same seed must give identical bytes");
    for line in String::from_utf8(a.stdout).unwrap().lines() {
        let json: serde_json::Value = serde_json::from_str(line).unwrap();
        if json["valuation"].is_null() {
            assert_eq!(json["value"], "0");
        } else {
            assert!(json["valuation"].as_i64().unwrap() >= 2);
        }
    }
}

#[test]
fn sample_count_zero_is_empty_success() {
    let out = run(&["sample", "--p", "5", "--k", "0", "--precision", "8", "--count", "0", "--seed", "7"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

const SUM_CONFIG: &str = r#"{
  "p": 5,
  "precision": 12,
  "factors": [
    {"outcomes": [{"id": "a0", "prob": "1/2"}, {"id": "b0", "prob": "1/2"}],
     "values": {"a0": "0", "b0": "1"}},
    {"outcomes": [{"id": "a1", "prob": "1/2"}, {"id": "b1", "prob": "1/2"}],
     "values": {"a1": "0", "b1": "5"}},
    {"outcomes": [{"id": "a2", "prob": "1/2"}, {"id": "b2", "prob": "1/2"}],
     "values": {"a2": "0", "b2": "25"}},
    {"outcomes": [{"id": "a3", "prob": "1/2"}, {"id": "b3", "prob": "1/2"}],
     "values": {"a3": "0", "b3": "125"}}
  ],
  "stopping": {"T": {"hit_abs_below": "5^-1"}}
}"#;

#[test]
fn mart_sum_trace_and_csv() {
    let config = write_temp("sum.json", SUM_CONFIG);
    let csv_path = std::env::temp_dir().join(format!("padic-prob-trace-{}.csv", std::process::id()));
    let out = run(&[
        "mart",
        "--kind",
        "sum",
        config.to_str().unwrap(),
        "--trace",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let norms: Vec<String> = (0..4)
        .map(|n| {
            let json: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
            assert_eq!(json["n"], n);
            json["norm"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(norms, ["5^-1", "5^-2", "5^-3", "0"]);
    let summary: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(summary["membership"], true);
    assert_eq!(summary["optional_sampling"][0]["holds"], true);

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv, "n,norm\n0,5^-1\n1,5^-2\n2,5^-3\n3,0\n");
}

#[test]
fn mart_prod_all_ones_has_zero_trace() {
    let config = write_temp(
        "ones.json",
        r#"{"p":5,"precision":12,"factors":[
          {"outcomes":[{"id":"a","prob":"1/2"},{"id":"b","prob":"1/2"}],
           "values":{"a":"1","b":"1"}},
          {"outcomes":[{"id":"c","prob":"1/2"},{"id":"d","prob":"1/2"}],
           "values":{"c":"1","d":"1"}}]}"#,
    );
    let out = run(&["mart", "--kind", "prod", config.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().take(2) {
        let json: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(json["norm"], "0");
    }
}

#[test]
fn mart_markov_non_harmonic_exits_4() {
    let config = write_temp(
        "markov-q2.json",
        r#"{"p":2,"precision":12,
            "chain":{"states":["s0","s1","s2"],
                     "P":[["1","0","0"],["1/2","0","1/2"],["0","0","1"]],
                     "initial":["0","1","0"]},
            "f":{"s0":"0","s1":"1","s2":"2"},
            "horizon":2}"#,
    );
    let out = run(&["mart", "--kind", "markov", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn mart_exact_cancellation_exits_3() {
    // both factor balls contain zero, but the partial sum 1 + (-1)
    // cancels every digit on one path
    let config = write_temp(
        "cancel.json",
        r#"{"p":5,"precision":12,"factors":[
          {"outcomes":[{"id":"a","prob":"1/2"},{"id":"b","prob":"1/2"}],
           "values":{"a":"1","b":"-1"}},
          {"outcomes":[{"id":"c","prob":"1/2"},{"id":"d","prob":"1/2"}],
           "values":{"c":"-1","d":"1"}}]}"#,
    );
    let out = run(&["mart", "--kind", "sum", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("precision underflow"), "stderr: {err}");
}

#[test]
fn mart_sum_with_nonzero_center_exits_4() {
    let config = write_temp(
        "offcenter.json",
        r#"{"p":5,"precision":12,"factors":[
          {"outcomes":[{"id":"a","prob":"1/2"},{"id":"b","prob":"1/2"}],
           "values":{"a":"1","b":"6"}}]}"#,
    );
    let out = run(&["mart", "--kind", "sum", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_zero_instances_exits_2() {
    let out = run(&["verify", "--instances", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_small_run_is_deterministic() {
    let args = ["verify", "--seed", "7", "--instances", "2", "--p-list", "3"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "identical invocations must match byte for byte");
    let report = stdout_json(&a);
    assert_eq!(report["failures"], 0);
    assert_eq!(report["seed"], 7);
}

#[test]
fn verify_unknown_mutation_exits_2() {
    let out = run(&["verify", "--instances", "1", "--mutate", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
