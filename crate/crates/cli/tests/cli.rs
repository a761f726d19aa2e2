use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcs")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gcs(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn error_kind(out: &Output) -> String {
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON error record");
    rec["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn gen_writes_count_files_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let d = d.display().to_string();
        ok(&["gen", "--family", "set_covering", "--n", "60", "--m", "30", "--count", "20", "--seed", "1", "--out-dir", &d]);
    }
    let (fa, fb) = (sorted_files(&a), sorted_files(&b));
    assert_eq!(fa.len(), 20);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
}

#[test]
fn solve_knapsack_fixture() {
    for sel in ["nocuts", "default", "random"] {
        let out = ok(&["solve", &fixture("knapsack.json"), "--selector", sel, "--no-wall"]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["incumbent"].as_f64(), Some(-5.0), "{sel}");
        assert_eq!(v["status"], "optimal");
    }
}

#[test]
fn failures_emit_error_records() {
    let out = gcs(&["solve", "/definitely/missing.json"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "io");

    let out = gcs(&["solve", &fixture("knapsack.json"), "--scope", "everywhere"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "invalid_config");

    let out = gcs(&["solve", &fixture("knapsack.json"), "--selector", "gcs"]);
    assert_eq!(error_kind(&out), "invalid_config");

    let out = gcs(&["frobnicate"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn eval_on_empty_test_split_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    let inst_s = inst.display().to_string();
    // round(0.8 * 1) = 1 training instance, 0 test instances
    ok(&["gen", "--family", "mis", "--p", "8", "--count", "1", "--out-dir", &inst_s]);
    let out_dir = tmp.path().join("out").display().to_string();
    let out = gcs(&["eval", &inst_s, "--split", "test", "--out-dir", &out_dir]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "validation");

    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = gcs(&["eval", &empty.display().to_string(), "--split", "all", "--out-dir", &out_dir]);
    assert_eq!(error_kind(&out), "validation");
}

#[test]
fn eval_and_compare_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst").display().to_string();
    ok(&["gen", "--family", "set_covering", "--n", "20", "--m", "15", "--count", "5", "--seed", "3", "--out-dir", &inst]);
    let res = tmp.path().join("res");
    let res_s = res.display().to_string();
    let summary = ok(&[
        "eval", &inst, "--split", "all", "--selector", "default,nocuts", "--scope", "root_only,all_nodes", "--no-wall",
        "--workers", "2", "--out-dir", &res_s,
    ]);
    assert_eq!(summary.lines().count(), 5);
    assert!(res.join("results.csv").exists());
    assert_eq!(sorted_files(&res.join("default_all_nodes")).len(), 5);

    let cmp = tmp.path().join("cmp");
    let table = ok(&["compare", &res_s, "--reference", "default", "--no-wall", "--out-dir", &cmp.display().to_string()]);
    assert!(table.contains("Im(pivots)"));
    let csv = std::fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,scope,instances,mean_pivots,mean_nodes,mean_wall_s,improvement_pivots,node_reduction"
    );
    let rows: Vec<&str> = lines.collect();
    // 4 groups plus one ablation row per method
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().any(|r| r.starts_with("default,all_nodes_vs_root_only,5,")));
    let reference = rows.iter().find(|r| r.starts_with("default,all_nodes,")).unwrap();
    assert!(reference.ends_with(",0.000000,0.000000"));
}

#[test]
fn compare_rejects_mismatched_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst").display().to_string();
    ok(&["gen", "--family", "knapsack", "--n", "6", "--m", "1", "--count", "3", "--out-dir", &inst]);
    let a = tmp.path().join("a").display().to_string();
    let b = tmp.path().join("b").display().to_string();
    ok(&["eval", &inst, "--split", "all", "--selector", "default", "--no-wall", "--out-dir", &a]);
    ok(&["eval", &inst, "--split", "train", "--selector", "nocuts", "--no-wall", "--out-dir", &b]);
    let out = gcs(&["compare", &a, &b]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "instance_mismatch");
}

#[test]
fn train_zero_iterations_keeps_initialization_and_gcs_selector_loads_it() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst").display().to_string();
    ok(&["gen", "--family", "set_covering", "--n", "12", "--m", "10", "--count", "5", "--seed", "2", "--out-dir", &inst]);
    let run = tmp.path().join("run");
    ok(&["train", &inst, "--iterations", "0", "--seed", "4", "--no-wall", "--out-dir", &run.display().to_string()]);
    let init = std::fs::read_to_string(run.join("init.json")).unwrap();
    let fin = std::fs::read_to_string(run.join("final.json")).unwrap();
    assert_eq!(init, fin);

    let ck = run.join("final.json").display().to_string();
    let first = sorted_files(Path::new(&inst))[0].display().to_string();
    let out = ok(&["solve", &first, "--selector", "gcs", "--checkpoint", &ck, "--no-wall"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["selector"], "gcs");
    assert_eq!(v["status"], "optimal");
}

#[test]
fn short_training_writes_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst").display().to_string();
    ok(&["gen", "--family", "set_covering", "--n", "12", "--m", "10", "--count", "5", "--seed", "2", "--out-dir", &inst]);
    let run = tmp.path().join("run");
    ok(&[
        "train", &inst, "--model", "sbp", "--iterations", "2", "--episodes", "2", "--eval-every", "1",
        "--checkpoint-every", "1", "--no-wall", "--out-dir", &run.display().to_string(),
    ]);
    let curve = std::fs::read_to_string(run.join("learning_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,mean_return,eval_nodes_mean,eval_pivots_mean,policy_loss,value_loss"
    );
    assert_eq!(lines.count(), 2);
    for f in ["iter_00001.json", "iter_00002.json", "best.json", "final.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
}
