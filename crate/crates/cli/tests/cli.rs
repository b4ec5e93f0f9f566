use std::process::Command;

use serde_json::Value;

fn wlab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wlab")).args(args).output().expect("run wlab");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("json on stdout")
}

#[test]
fn parse_errors_exit_with_config_code() {
    assert_eq!(wlab(&["bogus"]).0, 4);
    assert_eq!(wlab(&["cap", "--p", "1.8"]).0, 4);
    assert_eq!(wlab(&["--help"]).0, 0);
}

#[test]
fn invalid_exponent_is_a_config_error() {
    let (code, _) = wlab(&["cap", "--inner", "ball:0,0@0.25", "--window", "ball:0,0@0.5", "--p", "1.0"]);
    assert_eq!(code, 4);
}

#[test]
fn cap_of_an_annulus_is_close_to_the_radial_formula() {
    let (code, out) = wlab(&["cap", "--inner", "ball:0,0@0.25", "--window", "ball:0,0@0.5", "--p", "1.8", "--h", "0.015625"]);
    assert_eq!(code, 0);
    let v = json(&out)["value"].as_f64().unwrap();
    let e: f64 = (1.8 - 2.0) / 0.8;
    let exact = 2.0 * std::f64::consts::PI * e.abs().powf(0.8) / (0.5f64.powf(e) - 0.25f64.powf(e)).abs().powf(0.8);
    assert!((v - exact).abs() / exact < 0.06, "{v} vs {exact}");
}

#[test]
fn gamma_p_matches_the_slice_formula() {
    let (code, out) = wlab(&[
        "gamma-p", "--inner", "cube:0,0@0.125", "--window", "cube:0,0@0.25", "--p", "1.8", "--h", "0.0625", "--times", "0,0.5",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    let (a, b) = (v["value"].as_f64().unwrap(), v["slice_formula"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9 * b);
}

#[test]
fn selftest_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(wlab(&["--out", out, "selftest", "--traces", "40"]).0, 0);
    let ledger: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ledger.json")).unwrap()).unwrap();
    assert_eq!(ledger["pass"], true);
    assert_eq!(wlab(&["selftest", "--traces", "40", "--inject-fault"]).0, 2);
}

#[test]
fn wiener_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout) = wlab(&[
        "--out", out, "wiener", "--domain", "square_with_corner", "--h", "0.0625", "--p", "1.8", "--scales", "6",
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&stdout)["classification"], "wiener");
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("j,r_j,delta_j,A_j,omega_j,branch"));
    let omegas: Vec<f64> = lines.map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(omegas.len(), 6);
    assert!(omegas.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn solve_then_harnack_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("u.csv");
    let field = field.to_str().unwrap();
    let (code, out) = wlab(&[
        "solve", "--domain", "square_with_corner", "--h", "0.0625", "--p", "1.8", "--g-expr", "0.3", "--T", "0.1", "--dt",
        "0.05", "--field", field,
    ]);
    assert_eq!(code, 0, "{out}");
    let v = json(&out);
    assert!((v["max"].as_f64().unwrap() - 0.3).abs() < 1e-9);
    let (code, out) = wlab(&[
        "harnack", "--field", field, "--check", "l1", "--point", "0.5,0.5", "--rho", "0.03", "--s", "0", "--t", "0.1", "--p",
        "1.8",
    ]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(json(&out)["check"], "l1");
}

#[test]
fn verify_reads_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"boundary": {"kind": "expr", "expr": "0.25"},
            "bench": {"h": 0.0625, "half_extent": 1.0},
            "solver": {"dt": 0.05}, "t_o": 0.2, "r_o": 0.5, "scales": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let (code, stdout) = wlab(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "verify"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(out.join("scales.csv").exists());
    assert_eq!(json(&stdout)["pass"], true);
}
