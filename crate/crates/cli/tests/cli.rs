use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn hypolab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypolab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HYPOLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Every file under `dir`, relative path and bytes, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn desk_operator() -> Value {
    json!({
        "type_symbol": "xi1^2",
        "split": {"n": 1, "m": 1},
        "compact_set": {"box": [[-2.0, 2.0], [-2.0, 2.0]]},
        "terms": [
            {"coeff_expr": "1 + 0.25*bump(x1/2)*bump(y1/2)", "symbol": "xi1^2"},
            {"coeff_expr": "0.5*bump(x1/2)*bump(y1/2)", "symbol": "xi1*eta1"}
        ]
    })
}

fn constant_operator() -> Value {
    json!({
        "type_symbol": "xi1^2",
        "split": {"n": 1, "m": 1},
        "compact_set": {"box": [[-4.0, 4.0], [-4.0, 4.0]]},
        "terms": [{"symbol": "xi1^2"}]
    })
}

#[test]
fn classify_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hypolab(&["classify", "--symbol", "xi1^2 + xi2^2"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("hypoelliptic         YES"));

    let o = hypolab(&["classify", "--symbol", "xi1^2 - xi2^2"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("hypoelliptic         NO") && s.contains("witness"), "{s}");

    let o = hypolab(&["classify", "--symbol", "xi1^2 + xi1*eta1", "--split", "1,1", "--json"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["hypoelliptic"]["verdict"], "NO");
    assert_eq!(v["partially_hypoelliptic"]["verdict"], "YES");
}

#[test]
fn classify_writes_report_and_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hypolab(&["classify", "--symbol", "xi1^4 + xi2^2", "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(tmp.path().join("r/classification.json"));
    assert_eq!(report["hypoelliptic"]["verdict"], "YES");
    let prov = read_json(tmp.path().join("r/provenance.json"));
    assert_eq!(prov["command"], "classify");
    assert!(prov["tolerances"]["classify"]["slope_tol"].is_number());
    assert!(prov["tool_version"].is_string());
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hypolab(&["classify", "--symbol", "xi1^^2"], tmp.path()).status.code(), Some(1));
    assert_eq!(hypolab(&["classify"], tmp.path()).status.code(), Some(1));
    let cfg = write_config(tmp.path(), "e.json", &json!({"command": "spectral", "symbol": "xi1^2", "lambdas": []}));
    let o = hypolab(&["spectral", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
    let cfg = write_config(tmp.path(), "u.json", &json!({"symbol": "xi1^2", "lambdas": [1.0], "bogus": 1}));
    assert_eq!(hypolab(&["spectral", "--config", cfg.to_str().unwrap()], tmp.path()).status.code(), Some(1));
    let cfg = write_config(tmp.path(), "w.json", &json!({"command": "levi", "symbol": "xi1^2"}));
    assert_eq!(hypolab(&["spectral", "--config", cfg.to_str().unwrap()], tmp.path()).status.code(), Some(1));
}

#[test]
fn levi_constant_coefficients_take_the_zero_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({
            "operator": constant_operator(),
            "grid": {"points": [64, 16], "half_width": [4.0, 4.0]},
            "lambdas": [-16.0, -32.0, -64.0, -128.0]
        }),
    );
    let o = hypolab(&["levi", "--config", cfg.to_str().unwrap(), "--out", "c"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("identically zero") && s.contains("PASS"), "{s}");
    let decay = read_json(tmp.path().join("c/decay.json"));
    assert_eq!(decay["exact_zero"], true);
}

#[test]
fn levi_short_sweep_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        &json!({
            "operator": desk_operator(),
            "grid": {"points": [64, 16], "half_width": [4.0, 4.0]},
            "lambdas": [-16.0, -32.0]
        }),
    );
    let o = hypolab(&["levi", "--config", cfg.to_str().unwrap(), "--out", "s"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn levi_truncated_series_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n.json",
        &json!({
            "operator": desk_operator(),
            "grid": {"points": [64, 16], "half_width": [4.0, 4.0]},
            "lambdas": [-16.0, -32.0, -64.0, -128.0],
            "point": [0.5, 0.25],
            "tolerances": {"levi": {"levi": {"n_max": 2}}}
        }),
    );
    let o = hypolab(&["levi", "--config", cfg.to_str().unwrap(), "--out", "n"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn levi_desk_run_fits_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "desk.json",
        &json!({
            "command": "levi",
            "operator": desk_operator(),
            "grid": {"points": [64, 16], "half_width": [4.0, 4.0]},
            "lambdas": [-16.0, -32.0, -64.0, -128.0],
            "point": [0.5, 0.25]
        }),
    );
    let o = hypolab(&["levi", "--config", cfg.to_str().unwrap(), "--out", "a", "--dump-kernels"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fits = fs::read_to_string(tmp.path().join("a/fits.csv")).unwrap();
    let c: f64 = fits
        .lines()
        .find(|l| l.starts_with("remainder,c,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(c > 0.0, "{fits}");
    assert!(tmp.path().join("a/kernels/g_003.csv").exists());
    let summary = fs::read_to_string(tmp.path().join("a/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);

    let o = hypolab(&["run", "--config", "a/provenance.json", "--out", "b", "--threads", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(snapshot(&tmp.path().join("a")), snapshot(&tmp.path().join("b")));
}

#[test]
fn spectral_weyl_fit_of_the_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "w.json",
        &json!({
            "symbol": "xi1^2 + xi2^2",
            "lambdas": [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            "spectral": {"mc_samples": 2000, "mc_half_width": 40.0},
            "seed": 7
        }),
    );
    let o = hypolab(&["spectral", "--config", cfg.to_str().unwrap(), "--out", "w"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fits = read_json(tmp.path().join("w/fits.json"));
    let a = fits[0]["fit"]["a"].as_f64().unwrap();
    assert!((a - 1.0).abs() < 0.02, "{fits}");
    assert!(tmp.path().join("w/diagonal.csv").exists());
    assert!(tmp.path().join("w/diagonal_mc.csv").exists());

    let o = hypolab(&["run", "--config", "w/provenance.json", "--out", "w2"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(snapshot(&tmp.path().join("w")), snapshot(&tmp.path().join("w2")));
}

#[test]
fn spectral_identical_pipelines_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        &json!({
            "operator": constant_operator(),
            "grid": {"points": [64, 16], "half_width": [4.0, 4.0]},
            "lambdas": [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]
        }),
    );
    let o = Command::new(env!("CARGO_BIN_EXE_hypolab"))
        .args(["spectral", "--config", cfg.to_str().unwrap(), "--out", "t"])
        .current_dir(tmp.path())
        .env("HYPOLAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_json(tmp.path().join("t/tauberian.json"));
    assert_eq!(t["verdict"], "PASS");
    for r in t["ratio"].as_array().unwrap() {
        assert!((r.as_f64().unwrap() - 1.0).abs() < 1e-10);
    }
}
