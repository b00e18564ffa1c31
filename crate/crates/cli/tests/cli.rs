use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kleinsplit_cli::{Dataset, Value};
use num_bigint::BigInt;

fn kleinsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kleinsplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_run(args: &[&str]) -> Dataset {
    let out = kleinsplit(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Dataset::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

fn error_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

fn real(v: &Value) -> f64 {
    match v {
        Value::Real(x) => *x,
        other => panic!("expected a real, got {other:?}"),
    }
}

fn int(v: &Value) -> i64 {
    match v {
        Value::Int(i) => i64::try_from(i).unwrap(),
        other => panic!("expected an integer, got {other:?}"),
    }
}

fn reals(v: &Value) -> &[f64] {
    match v {
        Value::Reals(x) => x,
        other => panic!("expected a vector, got {other:?}"),
    }
}

fn cell<'a>(ds: &'a Dataset, row: usize, col: &str) -> &'a Value {
    &ds.rows[row][ds.column(col).unwrap()]
}

const LOG_PHI: f64 = 0.962_423_650_119_206_9;

#[test]
fn split_cat2() {
    let ds = json_run(&["split", "--preset", "cat2"]);
    assert_eq!(ds.command, "split");
    assert_eq!(int(ds.get("n_s").unwrap()), 1);
    assert_eq!(int(ds.get("n_u").unwrap()), 1);
    assert_eq!(ds.rows.len(), 2);
    let mut eig: Vec<f64> = (0..2).map(|k| real(cell(&ds, k, "re"))).collect();
    eig.sort_by(f64::total_cmp);
    assert!((eig[0] + LOG_PHI).abs() < 1e-12 && (eig[1] - LOG_PHI).abs() < 1e-12, "{eig:?}");
    assert_eq!(
        ds.get("lattice"),
        Some(&Value::IntMatrix(vec![
            vec![BigInt::from(2), BigInt::from(1)],
            vec![BigInt::from(1), BigInt::from(1)]
        ]))
    );
    let Some(Value::Matrix(vs)) = ds.get("stable_basis") else { panic!() };
    let (x, y) = (vs[0][0], vs[1][0]);
    assert!(((x * x + y * y) - 1.0).abs() < 1e-12);
    // stable eigenvector of [[2,1],[1,1]] for (3 − √5)/2: y = (λ − 2)x
    let lambda = (3.0 - 5f64.sqrt()) / 2.0;
    assert!((y - (lambda - 2.0) * x).abs() < 1e-12);
}

#[test]
fn split_cat3_is_hyperbolic() {
    let ds = json_run(&["split", "--preset", "cat3"]);
    let (s, u) = (int(ds.get("n_s").unwrap()), int(ds.get("n_u").unwrap()));
    assert_eq!(s + u, 3);
    assert!(s >= 1 && u >= 1);
    assert!(real(ds.get("lattice_margin").unwrap()) > 0.1);
}

#[test]
fn classify_grid_axes_pattern() {
    let ds = json_run(&["classify-grid", "--preset", "cat2", "--plane", "ims0,imu0", "--res", "64"]);
    assert_eq!(ds.rows.len(), 64 * 64);
    for k in 0..ds.rows.len() {
        let (a, b) = (real(cell(&ds, k, "a")), real(cell(&ds, k, "b")));
        let Value::Text(label) = cell(&ds, k, "label") else { panic!() };
        let expected = match (a == 0.0, b == 0.0) {
            (true, true) => "LimitSetChart",
            (false, true) => "OmegaMinusOnly",
            (true, false) => "OmegaPlusOnly",
            (false, false) => "Both",
        };
        assert_eq!(label, expected, "a = {a}, b = {b}");
    }
    assert_eq!(int(ds.get("Both").unwrap()), 63 * 63);
    assert_eq!(int(ds.get("LimitSetChart").unwrap()), 1);
}

#[test]
fn real_plane_is_limit_set() {
    let ds = json_run(&["classify-grid", "--preset", "cat2", "--plane", "re0,re1", "--res", "16"]);
    assert_eq!(int(ds.get("LimitSetChart").unwrap()), 256);
}

#[test]
fn serial_and_parallel_agree() {
    let base = ["classify-grid", "--preset", "cat3", "--plane", "re0,imu0", "--res", "24"];
    let serial = kleinsplit(&[&base[..], &["--mode", "serial"]].concat());
    let parallel = kleinsplit(&[&base[..], &["--mode", "parallel"]].concat());
    assert!(serial.status.success());
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn orbit_covers_torus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("orbit.json");
    let run = kleinsplit(&[
        "orbit",
        "--preset",
        "cat2",
        "--x0",
        "generic",
        "--n",
        "100000",
        "--eps",
        "0.03125",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let ds = kleinsplit_cli::export::import(&out, kleinsplit_cli::Format::Json).unwrap();
    assert_eq!(real(ds.get("coverage").unwrap()), 1.0);
    assert_eq!(ds.rows.len(), 100_001);
    let x0 = reals(ds.get("x0").unwrap());
    assert_eq!(x0, [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0]);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|k| dir.path().join(format!("run{k}.csv"))).collect();
    for p in &paths {
        let run = kleinsplit(&["orbit", "--preset", "cat2", "--n", "2000", "-o", p.to_str().unwrap()]);
        assert!(run.status.success());
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    let summaries: Vec<_> = paths
        .iter()
        .map(|p| fs::read(kleinsplit_cli::export::summary_path(p)).unwrap())
        .collect();
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn single_fixed_point_row() {
    let out = kleinsplit(&["fixed-points", "--preset", "cat2", "--shift", "1,0", "--at-n", "1", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["b,n,x,residual", "[1;0],1,[0.0000000000000000e0;-1.0000000000000000e0],0.0000000000000000e0"]);
}

#[test]
fn fixed_point_sweep_reaches_target() {
    let ds = json_run(&["fixed-points", "--preset", "cat2", "--n", "25"]);
    assert_eq!(ds.get("bound_holds"), Some(&Value::Bool(true)));
    assert!(real(ds.get("best_distance").unwrap()) < 0.01);
    for k in 0..ds.rows.len() {
        let Value::Ints(b) = cell(&ds, k, "b") else { panic!() };
        let size: f64 = b.iter().map(|v| v.to_string().parse::<f64>().unwrap().powi(2)).sum::<f64>().sqrt();
        assert!(real(cell(&ds, k, "residual")) <= 1e-8 * (1.0 + size));
    }
}

#[test]
fn norm_scan_starts_at_golden_ratio() {
    let ds = json_run(&["norm-scan", "--preset", "cat2"]);
    assert_eq!(ds.rows.len(), 200);
    assert_eq!(int(cell(&ds, 0, "n")), 1);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((real(cell(&ds, 0, "value")) - phi).abs() < 1e-9);
    assert_eq!(ds.get("tail_stable"), Some(&Value::Bool(true)));
    assert!(real(ds.get("sup").unwrap()).is_finite());
}

#[test]
fn norm_scan_skips_zero() {
    let ds = json_run(&["norm-scan", "--preset", "cat2", "--n-min", "-3", "--n", "3"]);
    let ns: Vec<i64> = (0..ds.rows.len()).map(|k| int(cell(&ds, k, "n"))).collect();
    assert_eq!(ns, [-3, -2, -1, 1, 2, 3]);
}

#[test]
fn witness_decays_by_one_over_e() {
    let ds = json_run(&["witness", "--m=-1,0;0,1", "--n", "20"]);
    let d: Vec<f64> = (0..ds.rows.len()).map(|k| real(cell(&ds, k, "dist_w"))).collect();
    for pair in d.windows(2) {
        assert!((pair[1] / pair[0] - (-1f64).exp()).abs() < 1e-9);
    }
    assert_eq!(int(ds.get("n0").unwrap()), 1);
}

#[test]
fn psi_check_small_errors() {
    let ds = json_run(&["psi-check", "--preset", "cat2", "--samples", "100", "--seed", "3"]);
    assert!(int(ds.get("checked_minus").unwrap()) > 50);
    for key in ["max_roundtrip", "max_inverse_roundtrip"] {
        assert!(real(ds.get(key).unwrap()) < 1e-8, "{key}");
    }
    assert!(real(ds.get("max_equivariance").unwrap()) < 1e-9);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("scan.csv");
    fs::write(
        &cfg,
        format!(
            "b = [[2, 1], [1, 1]]\nmode = \"serial\"\nn_max = 10\n\n[tolerances]\nhyperbolic = 1e-9\n\n[output]\npath = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let run = kleinsplit(&["norm-scan", "--config", cfg.to_str().unwrap(), "--n", "5"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(run.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(Path::new(&kleinsplit_cli::export::summary_path(&out)).exists());
}

#[test]
fn two_matrix_sources_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "preset = \"cat2\"\nb = [[2, 1], [1, 1]]\n").unwrap();
    let out = kleinsplit(&["split", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "config");
}

#[test]
fn config_errors_exit_two() {
    for args in [
        &["split"][..],
        &["split", "--preset", "cat4"],
        &["split", "--preset", "cat2", "--hyperbolic-tol", "0"],
        &["classify-grid", "--preset", "cat2", "--region-tol", "-1e-9"],
        &["orbit", "--preset", "cat2", "--eps", "0.75"],
        &["orbit", "--m=-1,0;0,1"],
        &["classify-grid", "--preset", "cat2", "--plane", "ims0"],
        &["split", "--preset", "cat2", "--format", "xml"],
        &["split", "--no-such-flag"],
    ] {
        let out = kleinsplit(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = error_of(&out);
        assert_eq!(err["error"], "config", "{args:?}");
        assert_eq!(err["exit_code"], 2);
    }
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "preset = \"cat2\"\nepsilom = 0.1\n").unwrap();
    let out = kleinsplit(&["orbit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn not_hyperbolic_exits_three() {
    let out = kleinsplit(&["split", "--b", "1,1;0,1"]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_of(&out);
    assert_eq!(err["error"], "numeric");
    assert!(err["message"].as_str().unwrap().contains("not hyperbolic"));
}

#[test]
fn lattice_check_half_step_fails() {
    let ok = json_run(&["lattice-check", "--preset", "cat2"]);
    assert!(real(ok.get("residual").unwrap()) < 1e-9);
    let out = kleinsplit(&["lattice-check", "--preset", "cat2", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_of(&out);
    assert!(err["max_deviation"].as_f64().unwrap() > 0.1);
}

#[test]
fn io_errors_exit_one() {
    let missing = kleinsplit(&["split", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(error_of(&missing)["error"], "io");

    let unwritable = kleinsplit(&["split", "--preset", "cat2", "-o", "/nonexistent/dir/out.json"]);
    assert_eq!(unwritable.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = kleinsplit(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("classify-grid"));
}
