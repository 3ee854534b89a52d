//! End-to-end checks of the `cuspec` binary: output formats, exit codes,
//! and bit-for-bit reproducibility of CSV artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cuspec");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_triangle(path: &Path) {
    let doc = r#"{
        "vertices": [
            {"id": "a", "m": 1.0},
            {"id": "b", "m": 1.0},
            {"id": "c", "m": 1.0}
        ],
        "edges": [
            {"u": "a", "v": "b", "weight": 1.0},
            {"u": "b", "v": "c", "weight": 1.0},
            {"u": "c", "v": "a", "weight": 1.0}
        ]
    }"#;
    fs::write(path, doc).unwrap();
}

#[test]
fn spectrum_of_flux_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("triangle.json");
    write_triangle(&graph);
    let out = run(&["spectrum", "--graph", graph.to_str().unwrap(), "--flux", "1/3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,eigenvalue");
    let vals: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let want = [0.4679111137620442, 1.6527036446661393, 3.8793852415718169];
    assert_eq!(vals.len(), 3);
    for (a, b) in vals.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn nu_reports_coupling_period() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("triangle.json");
    write_triangle(&graph);
    let out = run(&["nu", "--graph", graph.to_str().unwrap(), "--flux", "1/3"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "nu = 3");

    let out = run(&["nu", "--graph", graph.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("nu = trivial"));
}

#[test]
fn csv_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "asymptotics",
            "--depth",
            "12",
            "--fiber",
            "3",
            "--kappa",
            "1/1",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes_a = fs::read(&a).unwrap();
    let bytes_b = fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
    let text = String::from_utf8(bytes_a).unwrap();
    assert!(text.starts_with("n,lambda_model,lambda_full,ratio,sandwich_ok"));
    assert!(!text.contains('\r'));
}

#[test]
fn product_roundtrips_through_document() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("triangle.json");
    let prod = dir.path().join("product.json");
    write_triangle(&graph);
    let out = run(&[
        "product",
        "--g1",
        graph.to_str().unwrap(),
        "--g2",
        graph.to_str().unwrap(),
        "--cartesian",
        "--output",
        prod.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["spectrum", "--graph", prod.to_str().unwrap()]);
    assert!(out.status.success());
    // Cartesian square of the triangle: eigenvalues λ_i + λ_j, λ ∈ {0,3,3}
    let text = stdout(&out);
    let vals: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let mut want = vec![0.0, 3.0, 3.0, 3.0, 3.0, 6.0, 6.0, 6.0, 6.0];
    want.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(vals.len(), 9);
    for (a, b) in vals.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn exit_codes() {
    // usage error
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(64));
    let out = run(&["spectrum", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(64));

    // validation error: nonexistent input file
    let out = run(&["spectrum", "--graph", "/nonexistent/graph.json"]);
    assert_eq!(out.status.code(), Some(1));

    // validation error: invalid document (negative measure)
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"vertices": [{"id": "a", "m": -1.0}], "edges": []}"#,
    )
    .unwrap();
    let out = run(&["spectrum", "--graph", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // help and version are not errors
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));

    // success
    let out = run(&["keystone", "--depth", "10"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn threads_variable_is_validated() {
    let out = Command::new(BIN)
        .args(["falpha", "--alpha", "1.0"])
        .env("CUSPEC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(BIN)
        .args(["falpha", "--alpha", "1.0"])
        .env("CUSPEC_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let value: f64 = text.trim().strip_prefix("F(1) = ").unwrap().parse().unwrap();
    assert!((value - 2.0).abs() < 1e-9);
}

#[test]
fn evolve_deep_low_energy_sector() {
    let out = run(&[
        "evolve", "--depth", "800", "--kappa", "0/1", "--sector", "le", "--start", "10",
        "--window", "0..20", "--tmax", "20", "--steps", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("t,occupation,running_avg"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn girth_of_cusp_document() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("cusp.json");
    let out = run(&[
        "cusp-build", "--depth", "8", "--fiber", "3", "--kappa", "1/1",
        "--output", graph.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&["girth", "--graph", graph.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("girth = ")));
    assert!(text.lines().any(|l| l.starts_with("rad = ")));
}
