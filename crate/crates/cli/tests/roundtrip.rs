use std::fs;
use std::process::Command;

use kleinsplit_cli::export::{export, import, summary_path};
use kleinsplit_cli::{Dataset, Format, Value};
use num_bigint::BigInt;

fn orbit_file(dir: &std::path::Path, name: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = Command::new(env!("CARGO_BIN_EXE_kleinsplit"))
        .args(["orbit", "--preset", "cat2", "--n", "999", "-o", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn orbit_csv_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = orbit_file(dir.path(), "orbit.csv");
    let ds = import(&first, Format::Csv).unwrap();
    assert_eq!(ds.rows.len(), 1000);
    assert_eq!(ds.command, "orbit");

    let second = dir.path().join("again.csv");
    export(&ds, &second, Format::Csv).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_eq!(fs::read(summary_path(&first)).unwrap(), fs::read(summary_path(&second)).unwrap());
}

#[test]
fn orbit_json_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = orbit_file(dir.path(), "orbit.json");
    let ds = import(&first, Format::Json).unwrap();
    assert_eq!(ds.rows.len(), 1000);
    let second = dir.path().join("again.json");
    export(&ds, &second, Format::Json).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = import(&orbit_file(dir.path(), "o.csv"), Format::Csv).unwrap();
    let json = import(&orbit_file(dir.path(), "o.json"), Format::Json).unwrap();
    assert_eq!(csv, json);
}

fn mixed() -> Dataset {
    let mut ds = Dataset::new("mixed", &["int", "real", "flag", "text", "reals", "ints", "matrix", "ints2d"]);
    ds.set("big", Value::Int("123456789012345678901234567890".parse().unwrap()));
    ds.set("nan", f64::NAN);
    ds.set("neg_inf", f64::NEG_INFINITY);
    ds.set("tiny", 5e-324);
    ds.set("name", "with, comma \"quoted\"");
    let values = [0.1, -0.0, 1.0 / 3.0, f64::MAX, f64::MIN_POSITIVE, -2.5e-300, f64::INFINITY];
    for (k, &x) in values.iter().enumerate() {
        ds.push(vec![
            Value::Int(BigInt::from(k as i64 - 3)),
            x.into(),
            (k % 2 == 0).into(),
            format!("row {k}").into(),
            Value::Reals(vec![x, -x, 7.0]),
            Value::Ints(vec![BigInt::from(-1), BigInt::from(k)]),
            Value::Matrix(vec![vec![x, 1.0], vec![2.0, -x]]),
            Value::IntMatrix(vec![vec![BigInt::from(2), BigInt::from(1)], vec![BigInt::from(1), BigInt::from(1)]]),
        ]);
    }
    ds
}

fn same(a: &Dataset, b: &Dataset) -> bool {
    // NaN != NaN, so compare renderings
    a.to_json() == b.to_json()
}

#[test]
fn every_value_kind_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = mixed();
    for (name, format) in [("m.csv", Format::Csv), ("m.json", Format::Json)] {
        let path = dir.path().join(name);
        export(&ds, &path, format).unwrap();
        let back = import(&path, format).unwrap();
        assert!(same(&ds, &back), "{name}");
        let again = dir.path().join(format!("again-{name}"));
        export(&back, &again, format).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap(), "{name}");
    }
}

#[test]
fn seventeen_significant_digits() {
    let mut ds = Dataset::new("digits", &["x"]);
    ds.push(vec![std::f64::consts::PI.into()]);
    assert_eq!(ds.records_csv(), "x\n3.1415926535897931e0\n");
}

#[test]
fn empty_list_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset::new("fixed-points", &["b", "n", "x", "residual"]);
    let path = dir.path().join("empty.csv");
    export(&ds, &path, Format::Csv).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "b,n,x,residual\n");

    let back = import(&path, Format::Csv).unwrap();
    assert_eq!(back, ds);
    let json = dir.path().join("empty.json");
    export(&ds, &json, Format::Json).unwrap();
    assert_eq!(import(&json, Format::Json).unwrap(), ds);
}

#[test]
fn atomic_write_leaves_no_temp_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    export(&mixed(), &path, Format::Json).unwrap();
    export(&mixed(), &path, Format::Json).unwrap();
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["out.json"]);
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"command\": \"x\"}").unwrap();
    let err = import(&path, Format::Json).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
