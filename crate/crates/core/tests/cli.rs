use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// The lemniscate constant; on the lemniscatic lattice with `omega1 = 1/2`, `e1 = -e3 = varpi^2`.
const VARPI: f64 = 2.622_057_554_292_119_8;

fn heun() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_heun"));
    c.env_remove("HEUN_OUT_DIR");
    c
}

fn descriptors() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/descriptors")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    heun().arg("--out-dir").arg(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn qes_lemniscatic_eigenvalue_is_three_e3() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["qes", "--l", "2,0,0,0", "--alpha", "-2,1,1,0", "--lattice", "lemniscatic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&tmp.path().join("qes.json"));
    assert_eq!(v["passed"], true);
    assert_eq!(v["result"]["d"], 0);
    let (re, im) = complex(&v["result"]["eigenvalues"][0]);
    assert!((re + 3.0 * VARPI * VARPI).abs() < 1e-12 && im.abs() < 1e-12, "{re} {im}");
}

#[test]
fn compare_writes_two_scans() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["compare", "--lA", "2,0,0,0", "--lB", "1,1,1,0", "--grid", "lin:0:8:16"]);
    assert_eq!(code(&o), 0);
    let v = read_json(&tmp.path().join("compare.json"));
    assert!(v["result"]["max_trace_difference"].as_f64().unwrap() <= 1e-6);
    for side in ["A", "B"] {
        let csv = fs::read_to_string(tmp.path().join(format!("compare_{side}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "E_re,E_im,trM_re,trM_im,detM_re,detM_im,k,basepoint,lattice_hash");
        assert_eq!(lines.count(), 16);
        assert!(!csv.contains(",-0.0"));
    }
}

#[test]
fn malformed_input_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    for text in [
        "not json",
        r#"{"command": "qes", "l": [2,0,0,0], "alpha": [-2,1,1,0], "typo": 1}"#,
        r#"{"command": "scan", "l": [2,0,0,0], "k": 2}"#,
        r#"{"command": "lattice", "lattice": {"omega1": [0.5, 0], "omega3": [0.5, 0]}}"#,
    ] {
        fs::write(&bad, text).unwrap();
        let o = run(tmp.path(), &["run", bad.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{text}");
    }
    let o = run(tmp.path(), &["compare", "--lA", "2,0,0,0", "--lB", "5,0,0,0"]);
    assert_eq!(code(&o), 2, "unrelated pair");
    let o = run(tmp.path(), &["qes", "--l", "2,0,0"]);
    assert_eq!(code(&o), 2, "short coupling vector");
    let o = run(tmp.path(), &["run", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(tmp.path(), &["--help"])), 0);
}

#[test]
fn tolerance_violation_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["qes", "--l", "4,0,0,0", "--alpha", "-4,1,1,0", "--tol", "1e-30"]);
    assert_eq!(code(&o), 1);
    assert_eq!(read_json(&tmp.path().join("qes.json"))["passed"], false);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn descriptor_and_flags_agree_byte_for_byte() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let d = descriptors().join("compare_lame2.json");
    assert_eq!(code(&run(a.path(), &["run", d.to_str().unwrap()])), 0);
    let o = run(
        b.path(),
        &["compare", "--lA", "2,0,0,0", "--lB", "1,1,1,0", "--grid", "lin:0:8:16", "--name", "compare_lame2"],
    );
    assert_eq!(code(&o), 0);
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.len(), 3);
    assert_eq!(sa, sb);
}

#[test]
fn worker_count_does_not_change_artifacts() {
    for args in [
        vec!["scan", "--l", "3,1,0,0", "--grid", "seg:-2,-1:6,1:12", "--k", "3"],
        vec!["finite-gap", "--l", "2,0,0,0", "--certify", "3"],
    ] {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let mut one = args.clone();
        one.extend(["--workers", "1"]);
        let mut four = args.clone();
        four.extend(["--workers", "4"]);
        assert_eq!(code(&run(a.path(), &one)), 0);
        assert_eq!(code(&run(b.path(), &four)), 0);
        assert_eq!(snapshot(a.path()), snapshot(b.path()), "{args:?}");
    }
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let o = heun()
        .env("HEUN_OUT_DIR", tmp.path())
        .args(["lattice", "--lattice", "rectangular", "--x", "0.1,0.05"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let v = read_json(&tmp.path().join("lattice.json"));
    assert_eq!(v["result"]["lattice"]["omega3"][1], 0.3);
    // the flag wins over the variable
    let other = TempDir::new().unwrap();
    let o = heun()
        .env("HEUN_OUT_DIR", tmp.path())
        .arg("--out-dir")
        .arg(other.path())
        .args(["lattice", "--name", "flagged"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(other.path().join("flagged.json").exists() && !tmp.path().join("flagged.json").exists());
}

#[test]
fn seeds() {
    let tmp = TempDir::new().unwrap();
    let d = descriptors().join("darboux_lame2.json");
    // the descriptor's own seed takes precedence over the flag
    assert_eq!(code(&run(tmp.path(), &["--seed", "9", "run", d.to_str().unwrap()])), 0);
    assert_eq!(read_json(&tmp.path().join("darboux_lame2.json"))["seed"], 7);
    let base = ["darboux", "--l", "4,0,0,0", "--alpha", "-4,1,1,0"];
    let points = |seed: &str, name: &str| {
        let mut args = base.to_vec();
        args.extend(["--seed", seed, "--name", name]);
        assert_eq!(code(&run(tmp.path(), &args)), 0);
        let v = read_json(&tmp.path().join(format!("{name}.json")));
        assert_eq!(v["seed"].as_u64().unwrap().to_string(), seed);
        v["result"]["report"]["sample_points"].clone()
    };
    assert_eq!(points("3", "a"), points("3", "b"));
    assert_ne!(points("3", "c"), points("4", "d"));
    // without any seed the default is 42
    assert_eq!(code(&run(tmp.path(), &["lattice"])), 0);
    assert_eq!(read_json(&tmp.path().join("lattice.json"))["seed"], 42);
}

#[test]
fn transform_request_inline_or_from_file() {
    let tmp = TempDir::new().unwrap();
    let dir = descriptors();
    let from_file = tmp.path().join("file");
    let o = run(&from_file, &["--name", "t", "transform", "--input", dir.join("transform_request.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut inline: Value = read_json(&dir.join("transform_request.json"));
    inline["command"] = "transform".into();
    let desc = tmp.path().join("t.json");
    fs::write(&desc, serde_json::to_string(&inline).unwrap()).unwrap();
    let inline_out = tmp.path().join("inline");
    assert_eq!(code(&run(&inline_out, &["run", desc.to_str().unwrap()])), 0);
    assert_eq!(snapshot(&from_file), snapshot(&inline_out));

    let v = read_json(&from_file.join("t.json"));
    let points = v["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 8);
    let passing = points.iter().filter(|p| p["residual"].as_f64().unwrap() <= 1e-7).count();
    assert!(passing >= 4);
}

#[test]
fn sample_descriptors_run() {
    let tmp = TempDir::new().unwrap();
    let mut count = 0;
    for entry in fs::read_dir(descriptors()).unwrap() {
        let p = entry.unwrap().path();
        let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
        if stem == "transform_request" {
            continue;
        }
        let o = run(tmp.path(), &["run", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{stem}: {}", String::from_utf8_lossy(&o.stderr));
        let v = read_json(&tmp.path().join(format!("{stem}.json")));
        assert_eq!(v["passed"], true, "{stem}");
        count += 1;
    }
    assert!(count >= 10);
    // the scan sidecar records the CSV digest
    let v = read_json(&tmp.path().join("scan_lame2.json"));
    assert_eq!(v["result"]["csv"], "scan_lame2.csv");
    assert_eq!(v["result"]["rows"], 64);
}
