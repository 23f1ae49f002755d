use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use veloxseg::io::{read_volume, write_volume};
use veloxseg::Tensor5;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veloxseg")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn plan_groups_reports_bounds() {
    let v = json(&["plan-groups", "--modalities", "2", "--alpha", "1.0"]);
    let raw: Vec<f64> = serde_json::from_value(v["raw_bounds"].clone()).unwrap();
    assert_eq!(raw.len(), 4);
    assert!((raw[0] - 128f64.ln()).abs() < 1e-9);
    assert_eq!(v["group_sizes"].as_array().unwrap().len(), 4);
}

#[test]
fn flops_reports_default_costs() {
    let v = json(&["flops", "--extent", "96"]);
    let params = v["params"].as_u64().unwrap();
    assert!((1_330_000..=2_000_000).contains(&params));
    let attention = v["attention"].as_array().unwrap();
    assert_eq!(attention.len(), 4);
    assert_eq!(attention[0]["n_win"], 4);
    let conv = json(&["flops", "--preset", "conv-only", "--extent", "96"]);
    assert!(conv["params"].as_u64().unwrap() < params);
    assert!(conv["attention"].as_array().unwrap().is_empty());
}

#[test]
fn synthetic_forward_and_analysis_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = path(dir.path(), "case");
    let g = json(&["gen-synthetic", "--extent", "32", "--seed", "4", "--out-prefix", &prefix, "--radius", "3"]);
    assert!(g["foreground_voxels"].as_u64().unwrap() > 0);
    let (m0, m1) = (format!("{prefix}_mod1.vxs"), format!("{prefix}_mod2.vxs"));
    assert!(Path::new(&m0).exists() && Path::new(&m1).exists());

    let logits = path(dir.path(), "logits.vxs");
    let f = json(&["forward", "--preset", "conv-only", "--input", &m0, &m1, "--output", &logits]);
    assert_eq!(f["output"], serde_json::json!([1, 2, 32, 32, 32]));
    let y = read_volume(Path::new(&logits)).unwrap();
    assert!(y.is_finite());

    let teacher = path(dir.path(), "teacher.vxs");
    let t = Tensor5::from_fn([1, 2, 8, 8, 8], |i| ((i[1] * 5 + i[2] + i[3] * 3 + i[4] * 7) % 11) as f32 / 11.0);
    write_volume(Path::new(&teacher), &t).unwrap();
    let grad = path(dir.path(), "grad.vxs");
    let s = json(&["sdkt-loss", "--seg", &logits, "--teacher", &format!("{teacher}:0.5"), "--teacher", &logits, "--grad", &grad]);
    assert!(s["loss"].as_f64().unwrap() > 0.0);
    assert!(!run(&["sdkt-loss", "--seg", &logits, "--teacher", &m0]).status.success());
    assert_eq!(read_volume(Path::new(&grad)).unwrap().dims(), y.dims());
}

#[test]
fn mad_reads_weight_volumes() {
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "w.vxs");
    // identity then uniform over a 1x1x2 grid
    let w = Tensor5::from_vec([1, 1, 1, 1, 8], vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5]).unwrap();
    write_volume(Path::new(&file), &w).unwrap();
    let v = json(&["mad", "--weights", &file, "--grid", "1x1x2"]);
    assert_eq!(v["mad"], serde_json::json!([0.0, 0.5]));
    let bad = run(&["mad", "--weights", &file, "--grid", "1x1x3"]);
    assert!(!bad.status.success());
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "bench.json");
    let v = json(&["bench", "--preset", "conv-only", "--extent", "32", "--iters", "2", "--report", &report]);
    assert_eq!(v["iters"], 2);
    assert!(v["patches_per_second"].as_f64().unwrap() > 0.0);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(saved["config_digest"], v["config_digest"]);
}

#[test]
fn errors_exit_nonzero_with_message() {
    for args in [
        &["flops", "--preset", "nope"][..],
        &["flops", "--extent", "64"][..],
        &["forward", "--input", "/nonexistent.vxs", "--output", "/tmp/never.vxs"][..],
        &["gen-synthetic", "--extent", "30", "--out-prefix", "/tmp/never"][..],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "), "{args:?}");
    }
}
