use std::process::{Command, Output};

use hbvm::ButcherTableau;

fn hbvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbvm")).args(args).output().expect("spawn hbvm")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn tableau_json_matches_lobatto_iiia() {
    let out = hbvm(&["tableau", "--k", "2", "--s", "2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let tab = ButcherTableau::from_json(&stdout(&out)).unwrap();
    let oracle = ButcherTableau::lobatto_iiia(2).unwrap();
    assert!((tab.coeffs() - oracle.coeffs()).amax() <= 1e-13);
}

#[test]
fn tableau_json_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("hbvm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.json");
    let out = hbvm(&["tableau", "--k", "6", "--s", "3", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let tab = ButcherTableau::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(tab, ButcherTableau::hbvm(6, 3).unwrap());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn tableau_csv_header() {
    let out = hbvm(&["tableau", "--k", "3", "--s", "2"]);
    let text = stdout(&out);
    assert!(text.starts_with("i,t,b,C_0,C_1,C_2,C_3\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn converge_fhp_reaches_order_four() {
    let out = hbvm(&["converge", "--problem", "fhp", "--k", "6", "--s", "2", "--h0", "0.32", "--levels", "5", "--t-end", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("# horizon: 19.84"));
    let rows = data_rows(&text);
    assert_eq!(rows[0], "h,error,order");
    assert_eq!(rows.len(), 6);
    let last: f64 = rows[5].rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 4.0).abs() <= 0.2, "{last}");
}

#[test]
fn integrate_zero_steps_returns_initial_state() {
    let out = hbvm(&["integrate", "--problem", "harmonic", "--k", "1", "--s", "1", "--h", "0.1", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows = data_rows(&text);
    assert_eq!(rows, ["step,time,y_1,y_2,energy_error", "0,0,1.0000000000000000e0,0.0,0.000000e0"]);
}

#[test]
fn integrate_columns_follow_dimension() {
    let out = hbvm(&["integrate", "--problem", "fpu", "--k", "4", "--s", "2", "--h", "0.05", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("# solver: newton"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].split(',').count(), 2 + 12 + 1);
    assert!(rows[0].ends_with("y_12,energy_error"));
}

#[test]
fn drift_csv() {
    let out = hbvm(&["drift", "--problem", "fhp", "--k", "6", "--s", "2", "--h", "0.16", "--steps", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("# slope: "));
    let rows = data_rows(&text);
    assert_eq!(rows[0], "step,time,energy_error");
    assert_eq!(rows.len(), 102);
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["integrate", "--problem", "kepler", "--k", "1", "--s", "1", "--h", "0.1", "--steps", "1"][..],
        &["tableau", "--k", "2", "--s", "3"],
        &["tableau", "--k", "2", "--s", "2", "--format", "xml"],
        &["integrate", "--problem", "fhp", "--k", "1", "--s", "1", "--h", "0.1", "--steps", "1", "--y0", "1,2,3"],
        &["converge", "--problem", "fhp", "--k", "2", "--s", "2", "--h0", "0.1", "--levels", "1"],
        &["frobnicate"],
    ] {
        let out = hbvm(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn solver_failure_exits_with_two() {
    let out = hbvm(&["integrate", "--problem", "fhp", "--k", "6", "--s", "2", "--h", "10", "--steps", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_every_check() {
    let out = hbvm(&["validate", "--k", "4", "--s", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for check in ["symmetry_residual", "rank", "gradient_fhp", "gradient_fpu", "gradient_biot"] {
        assert!(text.contains(check), "{check}");
    }
}
