use std::process::{Command, Output};

use serde_json::Value;

fn waylimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waylimit"))
        .args(args)
        .env_remove("WAYLIMIT_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn bounds_keys_are_frozen() {
    let v = json(&waylimit(&["bounds", "--theta", "3.14159265", "--psi", "0.78539816", "--sigma", "1"]));
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = vec![
        "theta", "psi", "sigma", "bound_main", "bound_alt", "bound_alt_simplified", "v_norm", "w_norm", "two_gamma",
    ];
    expected.sort_unstable();
    let mut got = keys.clone();
    got.sort_unstable();
    assert_eq!(got, expected);
    assert!((num(&v, "bound_main") - 0.125).abs() < 1e-9);
}

#[test]
fn bounds_examples() {
    let v = json(&waylimit(&["bounds", "--theta", "0", "--psi", "1", "--sigma", "5"]));
    for k in ["bound_main", "bound_alt", "bound_alt_simplified"] {
        assert_eq!(num(&v, k), 0.0);
    }
    let v = json(&waylimit(&["bounds", "--theta", "3.14159265", "--psi", "1.57079633", "--sigma", "1"]));
    assert!((num(&v, "bound_alt") - 0.171573).abs() < 1e-6);
}

#[test]
fn bounds_scale_flag_rescales_sigma() {
    let a = json(&waylimit(&["bounds", "--theta", "2", "--psi", "1", "--sigma", "4", "--c", "2"]));
    let b = json(&waylimit(&["bounds", "--theta", "2", "--psi", "1", "--sigma", "2"]));
    assert_eq!(a, b);
}

#[test]
fn out_of_range_flag_is_a_usage_error() {
    let out = waylimit(&["bounds", "--theta", "1", "--psi", "1", "--sigma", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));
    assert_eq!(waylimit(&["bounds", "--theta", "1"]).status.code(), Some(2));
    assert_eq!(waylimit(&["sweep", "--theta", "1", "--sigma", "1", "--points", "1"]).status.code(), Some(2));
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.split('\n');
    assert_eq!(lines.next(), Some("psi,bound_main,bound_alt,bound_alt_simplified"));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn sweep_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.csv");
    let out = waylimit(&["sweep", "--theta", "3.141592653589793", "--sigma", "1", "--points", "101", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 101);
    assert!((rows[50][1] - 0.125).abs() < 1e-12);
    assert!((rows[100][2] - 1.0 / (1.0 + 2f64.sqrt()).powi(2)).abs() < 1e-12);
    for row in &rows {
        assert!(row[3] <= row[2] + 1e-12);
    }
}

#[test]
fn sweep_main_dominates_at_quarter_turn() {
    let out = waylimit(&["sweep", "--theta", "1.5707963267948966", "--sigma", "10"]);
    for row in parse_csv(&String::from_utf8(out.stdout).unwrap()) {
        assert!(row[1] >= row[2]);
    }
}

#[test]
fn sweep_endpoints_and_precision() {
    let out = waylimit(&["sweep", "--theta", "2.5", "--sigma", "0.3", "--points", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[1][0] - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    // 12 significant digits, positional notation.
    let cell = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    assert!(!cell.contains('e'));
    assert_eq!(cell.chars().filter(|c| c.is_ascii_digit()).skip_while(|c| *c == '0').count(), 12);
}

#[test]
fn unwritable_output_is_io_error() {
    let out = waylimit(&["sweep", "--theta", "1", "--sigma", "1", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_suites() {
    let v = json(&waylimit(&["verify", "--suite", "normformula", "--samples", "200", "--seed", "7"]));
    assert_eq!(v["passed"], Value::Bool(true));
    assert!(v["properties"][0]["max_residual"].as_f64().unwrap() <= 1e-10);
    let v = json(&waylimit(&["verify", "--suite", "dominance", "--samples", "40", "--seed", "7"]));
    assert_eq!(v["passed"], Value::Bool(true));
    let v = json(&waylimit(&["verify", "--suite", "appendix", "--samples", "20", "--seed", "7"]));
    assert!(v["properties"][0]["max_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(waylimit(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn seed_env_fallback_and_determinism() {
    let a = waylimit(&["verify", "--suite", "robertson", "--samples", "8", "--seed", "11"]);
    let b = Command::new(env!("CARGO_BIN_EXE_waylimit"))
        .args(["verify", "--suite", "robertson", "--samples", "8"])
        .env("WAYLIMIT_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    let c = waylimit(&["verify", "--suite", "robertson", "--samples", "8", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn jc_fock_vacuum_not_gate() {
    let v = json(&waylimit(&["jc", "--gate", "X", "--alpha", "0", "--nmax", "8", "--delta", "0", "--g", "1", "--t", "1.5707963"]));
    assert_eq!(num(&v, "sigma_ancilla"), 0.0);
    assert!((num(&v, "bound_alt") - 0.25).abs() < 1e-12);
    assert!(num(&v, "infidelity") >= 0.25 - 1e-7);
    assert_eq!(v["bound_respected"], Value::Bool(true));
    assert!(num(&v, "conservation_residual") <= 1e-12);
}

#[test]
fn jc_coherent_field() {
    let v = json(&waylimit(&["jc", "--gate", "X", "--alpha", "2", "--nmax", "64", "--g", "1", "--t", "0.7"]));
    assert!((num(&v, "sigma_ancilla") - 4.0).abs() < 1e-8);
    assert_eq!(v["bound_respected"], Value::Bool(true));
    let v = json(&waylimit(&["jc", "--gate", "Z", "--alpha", "1", "--nmax", "40", "--t", "0.7"]));
    assert_eq!(num(&v, "bound_main"), 0.0);
    assert_eq!(num(&v, "bound_alt"), 0.0);
}

#[test]
fn jc_tail_violation_is_model_error() {
    let out = waylimit(&["jc", "--gate", "X", "--alpha", "5", "--nmax", "10", "--t", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nmax"));
}

#[test]
fn custom_gate_flags() {
    let v = json(&waylimit(&["jc", "--gate", "custom", "--theta", "3.141592653589793", "--ux", "2", "--t", "1"]));
    let axis = v["gate"]["axis"].as_array().unwrap();
    assert!((axis[0].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(waylimit(&["jc", "--gate", "custom", "--t", "1"]).status.code(), Some(2));
    assert_eq!(waylimit(&["jc", "--gate", "Q", "--t", "1"]).status.code(), Some(2));
}

#[test]
fn spin_respects_rotational_bound() {
    let v = json(&waylimit(&["spin", "--N", "1", "--gate", "X", "--restarts", "8", "--seed", "1"]));
    assert!(num(&v, "infidelity") >= 0.125 - 1e-7);
    assert_eq!(num(&v, "bound_rotational"), 0.125);
    let v = json(&waylimit(&["spin", "--N", "2", "--gate", "H", "--restarts", "8"]));
    assert!(num(&v, "infidelity") >= 0.05 - 1e-7);
}

#[test]
fn optimize_respects_bounds_and_is_deterministic() {
    let args = ["optimize", "--law", "z", "--gate", "H", "--adim", "2", "--restarts", "4", "--seed", "3", "--budget", "3000"];
    let a = waylimit(&args);
    let v = json(&a);
    assert!((num(&v, "psi") - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    assert!(num(&v, "infidelity") >= num(&v, "bound_main") - 1e-7);
    assert!(num(&v, "conservation_residual") <= 1e-10);
    assert_eq!(a.stdout, waylimit(&args).stdout);
    assert_eq!(waylimit(&["optimize", "--law", "w", "--adim", "2"]).status.code(), Some(2));
}
