use std::path::Path;
use std::process::{Command, Output};

use chainrand::qcore::{Behavior, Scenario};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainrand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn chsh_file() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/chsh.json")
        .display()
        .to_string()
}

fn field(text: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn verify_reference_passes() {
    for args in [
        vec!["verify"],
        vec!["verify", "--alpha", "2", "--beta", "0.5"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        let text = stdout(&o);
        assert!(text.contains("5.196152"));
        assert!(!text.contains("FAIL"));
    }
}

#[test]
fn verify_flags_a_rotated_povm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("povm.json");
    // The reference triad at 30°, 270°, 150° from the z axis, turned by 0.05 rad.
    let effects: Vec<serde_json::Value> = [30.0f64, 270.0, 150.0]
        .iter()
        .map(|deg| {
            let a = deg.to_radians() + 0.05;
            serde_json::json!({"weight": 1.0 / 3.0, "x": -a.sin() / 3.0, "y": 0.0, "z": -a.cos() / 3.0})
        })
        .collect();
    std::fs::write(
        &path,
        serde_json::json!({"party": "A", "effects": effects}).to_string(),
    )
    .unwrap();
    let o = run(&["verify", "--povm", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.starts_with("A4 antialignment residual"))
        .unwrap();
    assert!(line.ends_with("FAIL"), "{line}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("A4 antialignment residual"));
}

#[test]
fn verify_rejects_a_non_povm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"effects": [{"weight": 0.5, "x": 0, "y": 0, "z": 0}]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["verify", "--povm", path.to_str().unwrap()])), 4);
}

#[test]
fn certify_reference_behaviors() {
    let o = run(&["certify", "local", "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert!((field(&stdout(&o), "min_entropy_bits") - 1.584963).abs() < 1e-6);

    let o = run(&["certify", "global", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let g = field(&stdout(&o), "guessing_probability");
    assert!((g - (2.0 + 3f64.sqrt()) / 18.0).abs() < 1e-12);
    assert!((field(&stdout(&o), "min_entropy_bits") + g.log2()).abs() < 1e-12);
}

#[test]
fn uniform_behavior_is_not_certified() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uniform.json");
    let scenario = Scenario::new(vec![2, 2, 2, 3], vec![2, 2, 2]).unwrap();
    std::fs::write(&path, Behavior::uniform(scenario).to_json()).unwrap();
    let o = run(&[
        "certify",
        "local",
        "--behavior",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["certified"], false);
    assert_eq!(v["guessing_probability"], 1.0);
}

#[test]
fn classical_bounds() {
    assert_eq!(stdout(&run(&["classical-bound"])).trim(), "4");
    assert_eq!(
        stdout(&run(&["classical-bound", "--inequality", &chsh_file()])).trim(),
        "2"
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.json");
    let doc = r#"{"name": "zero", "scenario": {"alice_inputs": 2, "bob_inputs": 2, "alice_outcomes": [2, 2], "bob_outcomes": [2, 2]}, "terms": []}"#;
    std::fs::write(&path, doc).unwrap();
    assert_eq!(
        stdout(&run(&[
            "classical-bound",
            "--inequality",
            path.to_str().unwrap()
        ]))
        .trim(),
        "0"
    );
}

#[test]
fn quantum_bound_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let sdpa = dir.path().join("chsh.dat-s");
    let o = run(&[
        "quantum-bound",
        "--inequality",
        "chsh",
        "--export-sdpa",
        sdpa.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-5);
    let text = std::fs::read_to_string(&sdpa).unwrap();
    assert!(
        text.lines().any(|l| l.trim() == "11"),
        "block size of the CHSH moment matrix"
    );
}

#[test]
fn sweep_csv_and_json_agree() {
    let base = ["sweep", "--inequality", "chsh", "--grid", "0:1:6"];
    let csv = run(&base);
    assert_eq!(code(&csv), 0);
    let text = stdout(&csv);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,violation,guessing_probability,min_entropy_bits,solver_status"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 6);

    let json = run(&[&base[..], &["--format", "json"]].concat());
    let parsed: Vec<serde_json::Value> = serde_json::from_str(&stdout(&json)).unwrap();
    for (row, obj) in rows.iter().zip(&parsed) {
        for (k, key) in ["p", "violation", "guessing_probability", "min_entropy_bits"]
            .iter()
            .enumerate()
        {
            let a: f64 = row[k].parse().unwrap();
            let b = obj[key].as_f64().unwrap();
            assert!(
                (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                "{key}: {a} vs {b}"
            );
        }
        assert_eq!(row[4], obj["solver_status"].as_str().unwrap());
    }
    // Grid order, with nothing certified at p = 0 and something at p = 1.
    let ps: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(ps.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.0);
    assert!(rows[5][3].parse::<f64>().unwrap() > 1.0);
}

#[test]
fn sweep_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let sdpa = dir.path().join("last.dat-s");
    let o = run(&[
        "sweep",
        "--grid",
        "0.9:1:2",
        "--pair",
        "1,2",
        "--sequential",
        "--out",
        out.to_str().unwrap(),
        "--export-sdpa",
        sdpa.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let last = text.lines().last().unwrap();
    let bits: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!((bits - 2.0).abs() < 0.02, "{last}");
    assert!(std::fs::read_to_string(&sdpa)
        .unwrap()
        .starts_with("\"C3 p = 1 p(1,1|A1,B2)"));
}

#[test]
fn input_errors_exit_with_four() {
    for args in [
        vec!["sweep", "--grid", "0.7:1:1"],
        vec!["sweep", "--grid", "0.7:1.2:3"],
        vec!["sweep", "--pair", "4,1"],
        vec!["sweep", "--solver", "nope"],
        vec!["classical-bound", "--inequality", "missing.json"],
        vec!["certify", "local", "--tol", "0"],
        vec!["certify", "global", "--behavior", "missing.json"],
    ] {
        assert_eq!(code(&run(&args)), 4, "{args:?}");
    }
}
