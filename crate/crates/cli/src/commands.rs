use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

use rfem_core::analysis::{export_vtk, solution_range, EocTable, ErrorReport};
use rfem_core::mesh::write_mesh;
use rfem_core::pipeline::{run_study, solve_problem};
use rfem_core::problem::ProblemSpec;
use rfem_core::Error;

use crate::config::RunConfig;

/// Norms shown in the console table of a study.
const TABLE_NORMS: [&str; 5] = ["l2", "h1", "bnorm", "energy", "triple"];

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or problem definition (exit 2).
    Config(String),
    /// Mesh generation, assembly or solve failed (exit 3).
    Numerical(String),
    /// Could not write output (exit 1).
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Output(m) => write!(f, "output: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Expression { .. } | Error::Problem(_) | Error::MixedFace { .. } => {
                CliError::Config(e.to_string())
            }
            Error::Io(_) => CliError::Output(e.to_string()),
            Error::Solver { ref residuals, .. } => {
                let tail: Vec<String> = residuals.iter().rev().take(3).rev().map(|r| format!("{r:.3e}")).collect();
                CliError::Numerical(format!("{e} (last residuals: [{}])", tail.join(", ")))
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn output_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

/// Writes via a temporary file and a rename, so readers never see partial content.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| output_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| output_err(path, e))
}

/// Creates `out`, resolves the problem and echoes the effective config.
fn prepare(cfg: &RunConfig, out: &Path) -> Result<(ProblemSpec, RunConfig), CliError> {
    let spec = cfg.problem_spec()?;
    let effective = cfg.clone().with_defaults(spec.mesh_family);
    std::fs::create_dir_all(out).map_err(|e| output_err(out, e))?;
    let text = serde_json::to_string_pretty(&effective).expect("config serializes");
    write_atomic(&out.join("config.json"), format!("{text}\n").as_bytes())?;
    Ok((spec, effective))
}

fn errors_json(e: &ErrorReport) -> Value {
    let mut m = serde_json::Map::new();
    m.insert("h_max".into(), json!(e.h_max));
    m.insert("dofs".into(), json!(e.dofs));
    for n in ErrorReport::NORMS {
        m.insert(n.to_string(), json!(e.get(n)));
    }
    Value::Object(m)
}

pub fn mesh(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (spec, effective) = prepare(cfg, out)?;
    let mesh = effective.mesh_source(spec.mesh_family).build(spec.domain)?;
    let path = out.join(&cfg.output.mesh);
    write_mesh(&mesh, &path)?;
    println!(
        "{} cells, {} sub-triangles, {} faces ({} boundary)",
        mesh.n_cells(),
        mesh.subtriangles().len(),
        mesh.faces().len(),
        mesh.n_boundary_faces()
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (spec, effective) = prepare(cfg, out)?;
    let mesh = Arc::new(effective.mesh_source(spec.mesh_family).build(spec.domain)?);
    let opts = effective.run_options();
    let sol = solve_problem(&spec, mesh, &opts)?;
    let ((lo, hi), (rlo, rhi)) = solution_range(&sol.disc, sol.coefficients())?;

    let report = json!({
        "problem": spec.name,
        "cells": sol.disc.mesh.n_cells(),
        "degree": opts.degree,
        "dofs": sol.disc.dg.dim(),
        "solver": {
            "mode": format!("{:?}", sol.report.mode).to_lowercase(),
            "iterations": sol.report.iterations,
            "residual": sol.report.residual,
        },
        "range": { "u_h": [lo, hi], "recovered": [rlo, rhi] },
        "errors": sol.errors.as_ref().map(errors_json),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&out.join("report.json"), format!("{text}\n").as_bytes())?;

    println!(
        "{}: {} cells, r={}, {} dofs, residual {:.2e}",
        spec.name,
        sol.disc.mesh.n_cells(),
        opts.degree,
        sol.disc.dg.dim(),
        sol.report.residual
    );
    println!("u_h in [{lo:.6}, {hi:.6}], recovered in [{rlo:.6}, {rhi:.6}]");
    if let Some(e) = &sol.errors {
        for n in ErrorReport::NORMS {
            println!("  {n:<10} {:.6e}", e.get(n).unwrap_or(f64::NAN));
        }
    }
    if cfg.output.vtk {
        let path = out.join("solution.vtk");
        export_vtk(&sol.disc, sol.coefficients(), &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn study(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (spec, effective) = prepare(cfg, out)?;
    let base = effective.mesh_source(spec.mesh_family);
    let opts = effective.run_options();
    let csv_path = out.join(&cfg.output.csv);

    // Rows so far; flushed after every level so a failure leaves a partial table.
    let mut done: Vec<ErrorReport> = Vec::new();
    let mut flush_err = None;
    let result = run_study(&spec, &base, effective.levels, &opts, |level, e| {
        eprintln!("level {level}: {} dofs, l2 {:.4e}", e.dofs, e.l2);
        done.push(e.clone());
        let table = EocTable::new(done.clone()).expect("non-empty");
        if let Err(err) = write_atomic(&csv_path, table.to_csv().as_bytes()) {
            flush_err.get_or_insert(err);
        }
    });
    if let Some(err) = flush_err {
        return Err(err);
    }
    let table = result?;

    println!("{} (r={}, {} levels)", spec.name, opts.degree, table.rows.len());
    print!("{}", table.render(&TABLE_NORMS));
    if table.rows.len() > 1 {
        let finals: Vec<String> = TABLE_NORMS
            .iter()
            .map(|n| format!("{n} {}", table.final_rate(n).ok().flatten().map(|r| r.to_string()).unwrap_or_default()))
            .collect();
        println!("final rates: {}", finals.join(", "));
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}
