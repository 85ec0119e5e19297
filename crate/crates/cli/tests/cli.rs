use std::path::Path;
use std::process::{Command, Output};

fn jetconvex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetconvex")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const PARABOLA: &str = r#"{"version":1,"dim":1,"points":[
  {"x":[-1],"f":1,"g":[-2]},{"x":[0],"f":0,"g":[0]},{"x":[1],"f":1,"g":[2]}]}"#;
const VIOLATES_C: &str = r#"{"version":1,"dim":1,"points":[{"x":[0],"f":0,"g":[1]},{"x":[1],"f":0,"g":[0]}]}"#;
const VIOLATES_CW1: &str = r#"{"version":1,"dim":1,"points":[{"x":[0],"f":0,"g":[0]},{"x":[1],"f":0,"g":[1]}]}"#;

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (text, expected) in [(PARABOLA, 0), (VIOLATES_C, 2), (VIOLATES_CW1, 3)] {
        let path = write(dir.path(), "jet.json", text);
        let out = jetconvex(&["validate", &path]);
        assert_eq!(code(&out), expected, "{}", String::from_utf8_lossy(&out.stdout));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(report["status"].is_string());
    }
}

#[test]
fn eps_c_tolerates_small_negative_slack() {
    let dir = tempfile::tempdir().unwrap();
    // slack -0.001 on pair (1, 0), data scale about 1
    let text = r#"{"version":1,"dim":1,"points":[{"x":[0],"f":0,"g":[-1]},{"x":[1],"f":-1.001,"g":[-1]}]}"#;
    let path = write(dir.path(), "jet.json", text);
    assert_eq!(code(&jetconvex(&["validate", &path])), 2);
    assert_eq!(code(&jetconvex(&["validate", &path, "--eps-c", "0.01"])), 0);
}

#[test]
fn malformed_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let truncated = write(dir.path(), "t.json", &PARABOLA[..40]);
    let out = jetconvex(&["validate", &truncated]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let unknown = write(dir.path(), "u.json", r#"{"version":1,"dim":1,"points":[{"x":[0],"f":0,"g":[0],"h":1}]}"#);
    assert_eq!(code(&jetconvex(&["validate", &unknown])), 1);
    let nan = write(dir.path(), "n.json", r#"{"version":1,"dim":2,"points":[{"x":[0],"f":0,"g":[0]}]}"#);
    assert_eq!(code(&jetconvex(&["validate", &nan])), 1);
    assert_eq!(code(&jetconvex(&["validate", "/nonexistent/jet.json"])), 1);
    assert_eq!(code(&jetconvex(&["frobnicate"])), 1);
    assert_eq!(code(&jetconvex(&["--help"])), 0);
}

#[test]
fn build_refuses_invalid_jets_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let jet = write(dir.path(), "jet.json", VIOLATES_CW1);
    let model = dir.path().join("m.json");
    let m = model.to_str().unwrap();
    let out = jetconvex(&["build", &jet, "-o", m]);
    assert_eq!(code(&out), 3);
    assert!(!model.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));

    let out = jetconvex(&["build", &jet, "-o", m, "--force"]);
    assert_eq!(code(&out), 0);
    let file: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(file["forced"], true);
    assert_eq!(file["validation"], "violates-CW1");
}

#[test]
fn box_must_contain_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let jet = write(dir.path(), "jet.json", PARABOLA);
    let m = dir.path().join("m.json");
    let out = jetconvex(&["build", &jet, "-o", m.to_str().unwrap(), "--box=0:2"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&jetconvex(&["build", &jet, "-o", m.to_str().unwrap(), "--box", "-3"])), 1);
    assert_eq!(code(&jetconvex(&["build", &jet, "-o", m.to_str().unwrap(), "--box=-3:3"])), 0);
}

#[test]
fn build_eval_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let jet = write(dir.path(), "jet.json", PARABOLA);
    let model = dir.path().join("m.json");
    let m = model.to_str().unwrap();
    assert_eq!(code(&jetconvex(&["build", &jet, "-o", m, "--box=-3:3"])), 0);

    let queries = write(dir.path(), "q.csv", "x0\n0.5\n0\n5\n");
    let out = jetconvex(&["eval", m, &queries, "--mode", "refined", "--grad"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["x0", "lower", "upper", "grad0", "status"]);
    // the extension of x^2 from {-1, 0, 1} is x^2 on [-1, 1]
    let upper: f64 = rows[1][2].parse().unwrap();
    let lower: f64 = rows[1][1].parse().unwrap();
    let grad: f64 = rows[1][3].parse().unwrap();
    assert!((upper - 0.25).abs() < 1e-9 && lower <= upper && upper - lower < 1e-6);
    assert!((grad - 1.0).abs() < 1e-4);
    assert_eq!(rows[2][1], rows[2][2]);
    assert_eq!(rows[2][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[3], ["5.0000000000000000e0", "", "", "", "outside-domain"]);

    let out = jetconvex(&["check", m, "--samples", "300", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(reports.as_array().unwrap().len() >= 8);
    assert_eq!(code(&jetconvex(&["check", m, "--suite", "nope"])), 1);
    assert_eq!(code(&jetconvex(&["check", m, "--suite", "sandwich", "--samples", "50"])), 0);
}

#[test]
fn single_point_model_is_affine() {
    let dir = tempfile::tempdir().unwrap();
    let jet = write(dir.path(), "jet.json", r#"{"version":1,"dim":2,"points":[{"x":[1,2],"f":3,"g":[1,-1]}]}"#);
    let model = dir.path().join("m.json");
    let m = model.to_str().unwrap();
    assert_eq!(code(&jetconvex(&["validate", &jet])), 0);
    assert_eq!(code(&jetconvex(&["build", &jet, "-o", m])), 0);
    let queries = write(dir.path(), "q.csv", "1,2\n1.5,2\n");
    let out = jetconvex(&["eval", m, &queries]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let at_data: (f64, f64) = (rows[0][2].parse().unwrap(), rows[0][3].parse().unwrap());
    assert_eq!(at_data, (3.0, 3.0));
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), 3.5);
    assert_eq!(rows[0][4], "degenerate-affine");
}

#[test]
fn modulus_table() {
    let dir = tempfile::tempdir().unwrap();
    let jet = write(dir.path(), "jet.json", PARABOLA);
    let out = jetconvex(&["modulus", &jet, "--tmin", "0.5", "--tmax", "4", "--steps", "7"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,omega0,envelope,omegahat,phihat"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r[1] <= r[2] + 1e-9 && r[2] <= r[3] + 1e-9, "{r:?}");
    }
    // t = 2 is on the grid; the envelope there is 2
    let two = rows.iter().find(|r| r[0] == 2.0).unwrap();
    assert!((two[2] - 2.0).abs() < 1e-9);
    assert_eq!(code(&jetconvex(&["modulus", &jet, "--steps", "0"])), 1);

    // a model file gives the same table
    let model = dir.path().join("m.json");
    assert_eq!(code(&jetconvex(&["build", &jet, "-o", model.to_str().unwrap()])), 0);
    let again = jetconvex(&["modulus", model.to_str().unwrap(), "--tmin", "0.5", "--tmax", "4", "--steps", "7"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let jet = write(dir.path(), "jet.json", PARABOLA);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let run = |out: &Path, seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_jetconvex"))
            .args(["build", &jet, "-o", out.to_str().unwrap(), "--enrichment", "5"])
            .env("JETCONVEX_SEED", seed)
            .status()
            .unwrap()
    };
    assert!(run(&a, "11").success());
    assert!(run(&b, "11").success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(run(&b, "12").success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
