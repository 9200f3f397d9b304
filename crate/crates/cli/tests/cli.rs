//! End-to-end runs of the `rfsquid` binary against the fixtures.
//!
//! Golden files live in `fixtures/golden/<case>/`; set `RFSQUID_BLESS=1` to
//! rewrite them after an intended output change.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn rfsquid(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfsquid"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .current_dir(fixtures())
        .env_remove("RFSQUID_THREADS")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = rfsquid(args, dir.path());
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn result(dir: &Path, file: &str) -> Value {
    let v: Value = serde_json::from_slice(&fs::read(dir.join(file)).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    v["result"].clone()
}

fn golden(case: &str, args: &[&str]) {
    let dir = run_ok(args);
    let expected = fixtures().join("golden").join(case);
    if std::env::var_os("RFSQUID_BLESS").is_some() {
        fs::create_dir_all(&expected).unwrap();
        for name in listing(dir.path()) {
            fs::copy(dir.path().join(&name), expected.join(&name)).unwrap();
        }
    }
    assert_eq!(listing(dir.path()), listing(&expected), "{case}: file set");
    for name in listing(&expected) {
        let got = fs::read(dir.path().join(&name)).unwrap();
        let want = fs::read(expected.join(&name)).unwrap();
        assert!(got == want, "{case}/{name} differs from golden");
    }
}

#[test]
fn golden_classify() {
    golden("classify", &["classify", "--all-presets"]);
}

#[test]
fn golden_spectrum_coupled() {
    golden("spectrum_coupled", &["spectrum", "-c", "spectrum_coupled.toml"]);
}

#[test]
fn golden_parasitic() {
    golden("parasitic", &["parasitic"]);
}

#[test]
fn golden_fit() {
    golden("fit", &["fit", "--dataset", "qubit_b.csv", "--preset", "B"]);
}

#[test]
fn golden_t1_fit() {
    golden(
        "t1_fit",
        &[
            "t1",
            "--preset",
            "E",
            "--temperature",
            "0.06",
            "--data",
            "t1_points.csv",
            "--flux-steps",
            "11",
        ],
    );
}

#[test]
fn golden_t2_fit() {
    golden("t2_fit", &["t2", "-c", "t2_fit.toml"]);
}

#[test]
fn golden_numbersplit() {
    golden(
        "numbersplit",
        &[
            "numbersplit",
            "--trace",
            "trace_1.csv",
            "--trace",
            "trace_2.csv",
            "--preset",
            "C",
            "--flux",
            "0.5",
        ],
    );
}

#[test]
fn golden_admittance_fit() {
    golden("admittance_fit", &["admittance-fit", "--input", "admittance.csv"]);
}

#[test]
fn repeated_runs_and_thread_counts_give_identical_bytes() {
    let args = ["fit", "--dataset", "qubit_b.csv", "--preset", "B"];
    let a = run_ok(&[&["--threads", "1"], &args[..]].concat());
    let b = run_ok(&[&["--threads", "3"], &args[..]].concat());
    let c = run_ok(&args);
    for name in listing(a.path()) {
        let x = fs::read(a.path().join(&name)).unwrap();
        assert!(x == fs::read(b.path().join(&name)).unwrap(), "{name}: 1 vs 3 threads");
        assert!(x == fs::read(c.path().join(&name)).unwrap(), "{name}: repeat");
    }
}

#[test]
fn fit_recovers_the_generating_energies() {
    let dir = run_ok(&[
        "fit",
        "--dataset",
        "qubit_b.csv",
        "--e-l",
        "0.7",
        "--e-c",
        "2.9",
        "--e-j",
        "6.5",
    ]);
    let r = result(dir.path(), "fit.json");
    let params = r["stages"][0]["params"].as_array().unwrap();
    for (p, truth) in params.iter().zip([0.62, 3.15, 5.92]) {
        let v = p["value"].as_f64().unwrap();
        assert!((v - truth).abs() / truth < 0.01, "{}: {v} vs {truth}", p["name"]);
    }
}

#[test]
fn classify_labels_match_the_devices() {
    let dir = run_ok(&["classify", "--all-presets"]);
    let r = result(dir.path(), "classify.json");
    let label = |name: &str| {
        r.as_array().unwrap().iter().find(|e| e["name"] == name).unwrap()["report"]["label"]
            .as_str()
            .unwrap()
            .to_owned()
    };
    assert_eq!(label("qubit-E"), "fluxonium");
    assert_eq!(label("qubit-F"), "quasi-charge");
    assert_eq!(label("qubit-G"), "flux");
    assert_eq!(label("qubit-H"), "flux");
}

#[test]
fn parasitic_mode_near_six_point_seven_ghz() {
    let dir = run_ok(&["parasitic"]);
    let f = result(dir.path(), "parasitic.json")["mode_frequency_ghz"]
        .as_f64()
        .unwrap();
    assert!((f - 6.74).abs() / 6.74 < 0.01, "{f}");
}

#[test]
fn t2_at_half_flux_is_the_sweet_spot_limit() {
    let dir = run_ok(&[
        "t2",
        "--preset",
        "F",
        "--a-phi-sqrt",
        "646",
        "--t-phi",
        "5",
        "--t1",
        "3",
        "--flux-steps",
        "5",
    ]);
    let r = result(dir.path(), "t2.json");
    let t2 = r["t2_at_half_us"].as_f64().unwrap();
    let limit = 1.0 / (1.0 / 6.0 + 1.0 / 5.0);
    assert!((t2 - limit).abs() / limit < 1e-6, "{t2} vs {limit}");
    assert!((r["sweet_spot_limit_us"].as_f64().unwrap() - limit).abs() < 1e-9);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfsquid(&["spectrum", "-c", "malformed.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flux_steps"));
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfsquid(&["spectrum", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_initial_guess_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfsquid(&["fit", "--dataset", "qubit_b.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn invalid_dataset_fails_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "phi_ext,freq_ghz,label,weight,kind\n0.1,-3,q:0-1,1,qubit-line\n").unwrap();
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    let out = rfsquid(&["fit", "--dataset", bad.to_str().unwrap(), "--preset", "B"], &out_dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(listing(&out_dir).is_empty());
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfsquid(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}
