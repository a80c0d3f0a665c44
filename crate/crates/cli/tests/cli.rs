use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blochpaw"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn synth(dir: &Path, name: &str, mesh: &str, n_b: &str) -> PathBuf {
    let p = dir.join(name);
    let o = run(&[
        "synth", "--seed", "3", "--mesh", mesh, "--n-b", n_b, "--n-a", "2", "--n-pw", "3", "--out", p.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    p
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = synth(dir.path(), "good.json", "1,1,2", "2");
    let o = run(&["validate", "--dataset", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["ok"], true);

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    v["h_one_body"][1][0][1] = serde_json::json!([5.0, 0.0]);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["validate", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let r = json(&o);
    assert_eq!(r["ok"], false);
    assert!(r["diagnostics"].as_array().unwrap().iter().any(|d| d["path"] == "h_one_body[1]"), "{r}");

    let o = run(&["validate", "--dataset", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(json(&o)["diagnostics"][0]["message"].as_str().unwrap().starts_with("I/O error"));
}

#[test]
fn validate_reports_shape_path() {
    let dir = TempDir::new().unwrap();
    let good = synth(dir.path(), "good.json", "1,1,2", "2");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    v["density_fourier"][1][0].as_array_mut().unwrap().pop();
    let bad = dir.path().join("short.json");
    std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["validate", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("density_fourier[1][0]"), "{text}");
}

#[test]
fn estimate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let ds = synth(dir.path(), "tiny.json", "1,1,2", "2");
    let a = run(&["estimate", "--dataset", ds.to_str().unwrap()]);
    let b = run(&["estimate", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["system"], "tiny");
    assert!(r["qubits"].as_i64().unwrap() > 0);
    assert!(r["toffoli_total"].as_u64().unwrap() > 0);

    let csv = run(&["estimate", "--dataset", ds.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("system,N_k,N_a,N_b,lambda,qubits,toffoli_per_step,I,toffoli_total"));
    assert!(lines.next().unwrap().starts_with("tiny,2,1,2,"));
    assert!(lines.next().is_none());
}

#[test]
fn infinite_density_threshold_drops_soft_channels() {
    let dir = TempDir::new().unwrap();
    let ds = synth(dir.path(), "tiny.json", "1,1,1", "2");
    let o = run(&["estimate", "--dataset", ds.to_str().unwrap(), "--threshold-density", "inf"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["norm"]["lambda_soft"].as_f64().unwrap(), 0.0);
    assert!(r["norm"]["lambda_hard"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ds = synth(dir.path(), "tiny.json", "1,1,2", "2");
    let d = ds.to_str().unwrap();
    let o = run(&["verify", "--dataset", d]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["passed"], true);

    let fact = dir.path().join("fact.json");
    let o = run(&["factorize", "--dataset", d, "--threshold-density", "0", "--threshold-d", "0", "--threshold-c", "0",
        "--threshold-eig", "0", "--out", fact.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["verify", "--dataset", d, "--factorization", fact.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&fact).unwrap()).unwrap();
    let e = v["one_body"][0]["eigenvalues"][0].as_f64().unwrap();
    v["one_body"][0]["eigenvalues"][0] = serde_json::json!(e + 0.01);
    std::fs::write(&fact, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["verify", "--dataset", d, "--factorization", fact.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["equivalence_ok"], false);

    let big = synth(dir.path(), "big.json", "2,2,1", "2");
    let o = run(&["verify", "--dataset", big.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn bench_writes_series_and_fit() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["bench", "--axis", "nk", "--sizes", "1,8,27", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scaling_nk.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("size,lambda2,toffoli_per_query,qubits\n"));
    let fit: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("scaling_nk_fit.json")).unwrap()).unwrap();
    assert_eq!(fit["axis"], "nk");
}

#[test]
fn bench_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = run(&["--threads", "2", "bench", "--axis", "nb", "--sizes", "1,2,3", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["scaling_nb.csv", "scaling_nb_fit.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_axis_is_a_usage_error() {
    let o = run(&["bench", "--axis", "nz"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nz"));
}
