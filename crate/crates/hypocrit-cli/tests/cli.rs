use std::path::PathBuf;
use std::process::{Command, Output};

use approx::assert_relative_eq;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypocrit"))
}

fn fixture_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("hypocrit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_fixture(name: &str, contents: &str) -> PathBuf {
    let p = fixture_dir().join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

const DISK: &str =
    r#"{"n":2,"m":2,"P":{"dim":2,"terms":[{"e":[2,0],"c":1.0},{"e":[0,2],"c":1.0}]}}"#;
const ODD_QUARTIC: &str = r#"{"n":1,"m":4,"P":{"dim":1,"terms":[{"e":[4],"c":1.0}]}}"#;
const X2X2: &str = r#"{"n":1,"m":2,"P":{"dim":1,"terms":[{"e":[2],"c":1.0}]},"Q":{"dim":1,"terms":[{"e":[2],"c":1.0}]}}"#;
const CROSS: &str = r#"{"n":2,"m":2,"P":{"dim":2,"terms":[{"e":[2,0],"c":1.0},{"e":[0,2],"c":1.0}]},"Q":{"dim":2,"terms":[{"e":[1,1],"c":1.0}]}}"#;
const W_LINEAR: &str = r#"{"n":1,"m":1,"P":{"dim":1,"terms":[{"e":[1],"c":1.0}]}}"#;

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn classify_disk_reports_closed_value() {
    let spec = write_fixture("disk-classify.json", DISK);
    let out = bin()
        .args(["classify", "--spec"])
        .arg(&spec)
        .args(["--k", "4", "--tol", "1e-6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_text(&out));
    let v = stdout_json(&out);
    assert_eq!(v["nonvanishing"], Value::Bool(true));
    assert_eq!(v["sign"], "negative");
    assert!(v["verdict"]
        .as_str()
        .unwrap()
        .contains("criterion satisfied"));
    assert!(!v["paperDiscrepancies"].as_array().unwrap().is_empty());
    let closed = v["routes"]["closedQ0"]["value"].as_f64().unwrap();
    assert_relative_eq!(
        closed,
        -2.0 * std::f64::consts::PI.powi(2) / 3.0,
        max_relative = 1e-9
    );
}

#[test]
fn criterion_runs_every_applicable_route() {
    let spec = write_fixture("odd-criterion.json", ODD_QUARTIC);
    let out = bin()
        .args(["criterion", "--spec"])
        .arg(&spec)
        .args(["--k", "3", "--tol", "1e-8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_text(&out));
    let v = stdout_json(&out);
    let routes = v["routes"].as_object().unwrap();
    assert!(routes.contains_key("semiNumeric"));
    assert!(routes.contains_key("directOracle"));
    assert!(v["routes"]["semiNumeric"]["value"].as_f64().unwrap().abs() <= 1e-8);
    assert_eq!(v["nonvanishing"], Value::Bool(false));
}

#[test]
fn threshold_violation_exits_2_with_reason() {
    let spec = write_fixture("disk-threshold.json", DISK);
    let out = bin()
        .args(["classify", "--spec"])
        .arg(&spec)
        .args(["--k", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_text(&out).contains("k below trace-class threshold 4"),
        "stderr: {}",
        stderr_text(&out)
    );
}

#[test]
fn check_reports_ellipticity_and_tau_diagnostics() {
    let spec = write_fixture("cross-check.json", CROSS);
    let out = bin().args(["check", "--spec"]).arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_text(&out));
    let v = stdout_json(&out);
    assert_eq!(v["n"], 2);
    assert_eq!(v["kMin"], 4);
    assert_eq!(v["ellipticityOk"], Value::Bool(true));
    assert!(v["ellipticityMargin"].as_f64().unwrap() > 0.0);
    assert_relative_eq!(
        v["tau1SqInf"]["value"].as_f64().unwrap(),
        0.8,
        epsilon = 1e-4
    );
    assert_eq!(v["lemmaClass"], "allAboveThreshold");
}

#[test]
fn schrodinger_harmonic_ground_state() {
    let spec = write_fixture("w-linear.json", W_LINEAR);
    let out = bin()
        .args(["schrodinger", "--spec"])
        .arg(&spec)
        .args(["--R", "10", "--N", "2000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_text(&out));
    let v = stdout_json(&out);
    assert_relative_eq!(
        v["lambda0"].as_f64().unwrap(),
        0.9999937562035641,
        max_relative = 1e-9
    );
}

#[test]
fn verify_accepts_config_file() {
    let dir = fixture_dir();
    std::fs::write(dir.join("x2x2-verify.json"), X2X2).unwrap();
    let cfg = dir.join("experiment.json");
    std::fs::write(
        &cfg,
        r#"{"spec":"x2x2-verify.json","k":3,"hGrid":{"min":0.2,"max":0.4,"points":4},"grid":{"R":6.0,"N":120},"jmax":1}"#,
    )
    .unwrap();

    let out = bin()
        .arg("verify")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_text(&out));
    let v = stdout_json(&out);
    assert_eq!(v["experiment"]["coefficients"].as_array().unwrap().len(), 2);
    let hs = v["experiment"]["hGrid"].as_array().unwrap();
    assert_eq!(hs.len(), 4);
    assert!(hs[0].as_f64().unwrap() > hs[3].as_f64().unwrap());
    assert!(v["eigenpairs"]["count"].as_u64().unwrap() > 0);
    assert!(v["eigenpairs"]["top"].as_array().unwrap().len() > 0);

    let csv_out = bin()
        .arg("verify")
        .arg("--config")
        .arg(&cfg)
        .args(["--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(csv_out.status.code(), Some(0));
    let text = String::from_utf8(csv_out.stdout).unwrap();
    assert!(text.starts_with("h,traceDk,scaledTrace\n"), "{text}");
    assert!(text.contains("\nj,Hj,stderr\n"));
}

#[test]
fn sweep_emits_deterministic_csv() {
    let spec = write_fixture("cross-sweep.json", CROSS);
    let run = || {
        bin()
            .args(["sweep", "--spec"])
            .arg(&spec)
            .args([
                "--k",
                "4",
                "--alpha-min",
                "0.1",
                "--alpha-max",
                "0.3",
                "--alpha-points",
                "2",
                "--tol",
                "1e-6",
            ])
            .env("HYPOCRIT_THREADS", "2")
            .output()
            .unwrap()
    };
    let a = run();
    assert_eq!(a.status.code(), Some(0), "{}", stderr_text(&a));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,H0,err,sign,nonvanishing,kMin,route"
    );
    assert_eq!(text.lines().count(), 3);

    let b = run();
    assert_eq!(a.stdout, b.stdout);

    let single = bin()
        .args(["sweep", "--spec"])
        .arg(&spec)
        .args([
            "--k",
            "4",
            "--alpha-min",
            "0.1",
            "--alpha-max",
            "0.3",
            "--alpha-points",
            "2",
            "--tol",
            "1e-6",
        ])
        .env("HYPOCRIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, single.stdout);
}

#[test]
fn output_file_is_written_atomically() {
    let spec = write_fixture("disk-out.json", DISK);
    let out_path = fixture_dir().join("report-out.json");
    let out = bin()
        .args(["classify", "--spec"])
        .arg(&spec)
        .args(["--k", "4", "--tol", "1e-6", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_text(&out));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["k"], 4);
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        assert!(!name.contains(".tmp-"), "leftover temp file {name}");
    }
}

#[test]
fn malformed_inputs_exit_2() {
    let bad = write_fixture("bad-spec.json", "{ not json");
    let out = bin()
        .args(["classify", "--spec"])
        .arg(&bad)
        .args(["--k", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).starts_with("error: input:"));

    let missing = fixture_dir().join("does-not-exist.json");
    let out = bin()
        .args(["check", "--spec"])
        .arg(&missing)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_rejected_outside_sweep_and_verify() {
    let spec = write_fixture("disk-csv.json", DISK);
    let out = bin()
        .args(["classify", "--spec"])
        .arg(&spec)
        .args(["--k", "4", "--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).contains("csv"));
}

#[test]
fn ill_conditioned_fit_exits_3() {
    let spec = write_fixture("x2x2-illcond.json", X2X2);
    let out = bin()
        .args(["verify", "--spec"])
        .arg(&spec)
        .args([
            "--k",
            "3",
            "--h-min",
            "0.299",
            "--h-max",
            "0.3",
            "--h-points",
            "8",
            "--jmax",
            "5",
            "--N",
            "80",
            "--R",
            "6",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr_text(&out));
    assert!(stderr_text(&out).contains("ill-conditioned"));
}

#[test]
fn classify_output_is_byte_deterministic() {
    let spec = write_fixture("disk-det.json", DISK);
    let run = || {
        bin()
            .args(["classify", "--spec"])
            .arg(&spec)
            .args(["--k", "4", "--tol", "1e-6"])
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
