use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rfem(cmd: &str, config: &str, sets: &[&str], out: &Path) -> Output {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{}-config.json", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&cfg, config).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_rfem"));
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(out);
    for s in sets {
        c.arg("--set").arg(s);
    }
    c.output().expect("rfem runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstdout:\n{}\nstderr:\n{}", o.status, stdout(o), String::from_utf8_lossy(&o.stderr));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Parses the rate column of `norm` in the last row of a CSV written by `study`.
fn final_rate(csv: &str, norm: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == norm).unwrap();
    let dofs = header.iter().position(|h| *h == "dofs").unwrap();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
    // h_eff = dofs^{-1/2}
    (a[col] / b[col]).ln() / (0.5 * (b[dofs] / a[dofs]).ln())
}

#[test]
fn mesh_counts_match_fan_triangulation() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    let o = rfem("mesh", r#"{"problem": {"example": 2}, "mesh": {"kind": "voronoi", "n_cells": 256}}"#, &[], &out);
    assert_ok(&o);
    let text = std::fs::read_to_string(out.join("mesh.txt")).unwrap();
    assert!(text.starts_with("RFEM-MESH"));
    // Σ(n_v − 2) over the cells listed in the mesh file.
    let mesh = rfem_core::mesh::read_mesh(out.join("mesh.txt")).unwrap();
    let expected: usize = mesh.cells().iter().map(|c| c.len() - 2).sum();
    let line = stdout(&o);
    assert!(line.starts_with(&format!("256 cells, {expected} sub-triangles")), "{line}");
}

#[test]
fn mesh_single_cell_and_zero_cells() {
    let tmp = TempDir::new().unwrap();
    let o = rfem("mesh", r#"{"problem": {"example": 2}, "mesh": {"kind": "voronoi", "n_cells": 1}}"#, &[], &tmp.path().join("one"));
    assert_ok(&o);
    assert!(stdout(&o).starts_with("1 cells, 2 sub-triangles"), "{}", stdout(&o));

    let o = rfem("mesh", r#"{"problem": {"example": 2}, "mesh": {"kind": "voronoi", "n_cells": 0}}"#, &[], &tmp.path().join("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_cells"));
}

#[test]
fn solve_smoke_writes_report_and_vtk() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let cfg = r#"{"problem": {"example": 2}, "mesh": {"kind": "voronoi", "n_cells": 64}, "output": {"vtk": true}}"#;
    assert_ok(&rfem("solve", cfg, &[], &out));
    let report = read_json(&out.join("report.json"));
    for n in ["l2", "h1", "bnorm", "triple"] {
        let v = report["errors"][n].as_f64().unwrap();
        assert!(v.is_finite() && v > 0.0, "{n} = {v}");
    }
    let vtk = std::fs::read_to_string(out.join("solution.vtk")).unwrap();
    assert!(vtk.contains("SCALARS u_h") && vtk.contains("SCALARS recovered"));
}

#[test]
fn layer_problem_stays_bounded() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("layer");
    let cfg = r#"{"problem": {"example": 3, "epsilon": 0.01}, "mesh": {"kind": "voronoi", "n_cells": 1024}}"#;
    assert_ok(&rfem("solve", cfg, &[], &out));
    let report = read_json(&out.join("report.json"));
    assert!(report["errors"].is_null());
    for key in ["u_h", "recovered"] {
        let lo = report["range"][key][0].as_f64().unwrap();
        let hi = report["range"][key][1].as_f64().unwrap();
        assert!(lo >= -0.05 && hi <= 1.1, "{key} in [{lo}, {hi}]");
    }
}

#[test]
fn indefinite_diffusion_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"problem": {"custom": {"a": ["1", "2", "1"], "b": ["1", "0"], "c": "1", "f": "1", "g_d": "0"}},
                  "mesh": {"kind": "voronoi", "n_cells": 16}}"#;
    let o = rfem("solve", cfg, &[], &tmp.path().join("c"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_config_exits_with_2() {
    let tmp = TempDir::new().unwrap();
    let o = rfem("solve", "{ not json", &[], &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(2));
    let o = rfem("solve", r#"{"problem": {"example": 2}, "degree": "two"}"#, &[], &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degree"));
    let o = rfem("solve", r#"{"problem": {"example": 2}}"#, &["degree=9"], &tmp.path().join("c"));
    assert_eq!(o.status.code(), Some(2));
    let o = rfem("study", r#"{"problem": {"example": 3}, "mesh": {"kind": "voronoi", "n_cells": 16}}"#, &[], &tmp.path().join("d"));
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn solver_failure_exits_with_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"problem": {"example": 2}, "mesh": {"kind": "voronoi", "n_cells": 64},
                  "solver": {"mode": "iterative", "tol": 1e-14, "max_iter": 1, "restart": 1}}"#;
    let o = rfem("solve", cfg, &[], &tmp.path().join("f"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn effective_config_is_echoed_with_defaults() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("echo");
    assert_ok(&rfem("mesh", r#"{"problem": {"example": 4}}"#, &["degree=2"], &out));
    let echoed = read_json(&out.join("config.json"));
    assert_eq!(echoed["degree"], 2);
    assert_eq!(echoed["mesh"]["kind"], "aligned");
    assert_eq!(echoed["mesh"]["n"], 8);
    assert_eq!(echoed["penalty"]["c_sigma"], 10.0);

    // Re-running from the echo reproduces the same effective config.
    let again = tmp.path().join("echo2");
    assert_ok(&rfem("mesh", &std::fs::read_to_string(out.join("config.json")).unwrap(), &[], &again));
    assert_eq!(read_json(&again.join("config.json")), echoed);
}

#[test]
fn single_level_study_has_no_rates() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("one");
    let o = rfem("study", r#"{"problem": {"example": 2}, "mesh": {"kind": "voronoi", "n_cells": 64}, "levels": 1}"#, &[], &out);
    assert_ok(&o);
    assert!(!stdout(&o).contains("final rates"));
    assert_eq!(std::fs::read_to_string(out.join("eoc.csv")).unwrap().lines().count(), 2);
}

#[test]
fn study_csv_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"problem": {"example": 1}, "degree": 2, "mesh": {"kind": "voronoi", "n_cells": 16, "seed": 7}, "levels": 2}"#;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_ok(&rfem("study", cfg, &[], &a));
    assert_ok(&rfem("study", cfg, &[], &b));
    assert_eq!(std::fs::read(a.join("eoc.csv")).unwrap(), std::fs::read(b.join("eoc.csv")).unwrap());
}

#[test]
fn example2_linear_l2_rate() {
    // Starts at 1024 cells: coarser sequences are still pre-asymptotic for r = 1.
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ex2");
    let cfg = r#"{"problem": {"example": 2}, "degree": 1, "mesh": {"kind": "voronoi", "n_cells": 1024}, "levels": 4}"#;
    let o = rfem("study", cfg, &[], &out);
    assert_ok(&o);
    let rate = final_rate(&std::fs::read_to_string(out.join("eoc.csv")).unwrap(), "l2");
    assert!((1.8..=2.3).contains(&rate), "final l2 rate {rate}\n{}", stdout(&o));
}

#[test]
fn example1_linear_bnorm_rate() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ex1");
    let cfg = r#"{"problem": {"example": 1}, "degree": 1, "mesh": {"kind": "voronoi", "n_cells": 64}, "levels": 4}"#;
    let o = rfem("study", cfg, &[], &out);
    assert_ok(&o);
    let rate = final_rate(&std::fs::read_to_string(out.join("eoc.csv")).unwrap(), "bnorm");
    assert!(rate >= 1.4, "final b-norm rate {rate}\n{}", stdout(&o));
}
