//! End-to-end drivers: mesh sources, single solves and refinement studies.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use crate::analysis::{compute_errors, lambda_parameter, EocTable, ErrorReport};
use crate::assembly::{assemble_system, Discretization, PenaltyConfig};
use crate::geometry::Rect;
use crate::mesh::{aligned_square_mesh, generate_voronoi_mesh, read_mesh, PolyMesh};
use crate::problem::{verify_positivity, validate_diffusion, ProblemSpec};
use crate::solver::{solve, SolveReport, SolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Voronoi { n_cells: usize, seed: u64, lloyd: usize },
    /// `n × n` axis-aligned squares.
    Aligned { n: usize },
    File(PathBuf),
}

impl MeshSource {
    /// Source of refinement level `level` (0 = self): Voronoi meshes are
    /// regenerated with 4× the cells, aligned meshes double `n`.
    pub fn refined(&self, level: u32) -> Result<MeshSource> {
        match self {
            MeshSource::Voronoi { n_cells, seed, lloyd } => {
                Ok(MeshSource::Voronoi { n_cells: n_cells * 4usize.pow(level), seed: *seed, lloyd: *lloyd })
            }
            MeshSource::Aligned { n } => Ok(MeshSource::Aligned { n: n * 2usize.pow(level) }),
            MeshSource::File(p) if level == 0 => Ok(MeshSource::File(p.clone())),
            MeshSource::File(p) => {
                Err(Error::Mesh(format!("mesh file {} cannot be refined; use a generated family", p.display())))
            }
        }
    }

    pub fn build(&self, domain: Rect) -> Result<PolyMesh> {
        match self {
            MeshSource::Voronoi { n_cells, seed, lloyd } => generate_voronoi_mesh(*n_cells, *seed, *lloyd, domain),
            MeshSource::Aligned { n } => aligned_square_mesh(*n, domain),
            MeshSource::File(p) => read_mesh(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub degree: usize,
    /// Quadrature exactness; `None` selects `2r + 4`.
    pub order: Option<usize>,
    pub penalty: PenaltyConfig,
    pub solver: SolverConfig,
}

impl RunOptions {
    pub fn new(degree: usize) -> Self {
        RunOptions { degree, order: None, penalty: PenaltyConfig::default(), solver: SolverConfig::default() }
    }
}

pub struct Solution {
    pub disc: Discretization,
    pub report: SolveReport,
    pub errors: Option<ErrorReport>,
}

impl Solution {
    pub fn coefficients(&self) -> &[f64] {
        &self.report.solution
    }
}

/// Assembles and solves on `mesh`; errors are computed when the exact solution is known.
pub fn solve_problem(spec: &ProblemSpec, mesh: Arc<PolyMesh>, opts: &RunOptions) -> Result<Solution> {
    let t0 = Instant::now();
    let disc = Discretization::new(spec, mesh, opts.degree, opts.order)?;
    validate_diffusion(spec, &disc.mesh, disc.order)?;
    verify_positivity(spec, &disc.mesh, disc.order)?;
    let system = assemble_system(spec, &disc, &opts.penalty)?;
    let t1 = Instant::now();
    let report = solve(&system.matrix, &system.rhs, &opts.solver)?;
    let t2 = Instant::now();
    log::info!(
        "{}: {} cells, r={}, {} dofs, nnz={}, assembly {:.2?}, solve {:.2?} (residual {:.1e})",
        spec.name,
        disc.mesh.n_cells(),
        opts.degree,
        disc.dg.dim(),
        system.matrix.nnz(),
        t1 - t0,
        t2 - t1,
        report.residual
    );
    if log::log_enabled!(log::Level::Debug) {
        lambda_parameter(spec, &disc, &opts.penalty)?;
    }
    let errors = match spec.exact {
        Some(_) => Some(compute_errors(spec, &disc, &opts.penalty, &report.solution)?),
        None => None,
    };
    Ok(Solution { disc, report, errors })
}

/// Runs `levels` refinements of `base`, calling `on_level` after each one
/// (used to flush partial output). Levels run in order.
pub fn run_study(
    spec: &ProblemSpec,
    base: &MeshSource,
    levels: u32,
    opts: &RunOptions,
    mut on_level: impl FnMut(u32, &ErrorReport),
) -> Result<EocTable> {
    if levels == 0 {
        return Err(Error::Analysis("a study needs at least one level".into()));
    }
    if spec.exact.is_none() {
        return Err(Error::Analysis(format!("problem '{}' has no exact solution; cannot run a study", spec.name)));
    }
    let mut rows = Vec::new();
    for level in 0..levels {
        let mesh = Arc::new(base.refined(level)?.build(spec.domain)?);
        let sol = solve_problem(spec, mesh, opts)?;
        let e = sol.errors.expect("exact solution checked above");
        on_level(level, &e);
        rows.push(e);
    }
    EocTable::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_example;

    #[test]
    fn refinement_sequences() {
        let v = MeshSource::Voronoi { n_cells: 64, seed: 1, lloyd: 10 };
        assert_eq!(v.refined(3).unwrap(), MeshSource::Voronoi { n_cells: 4096, seed: 1, lloyd: 10 });
        assert_eq!(MeshSource::Aligned { n: 8 }.refined(2).unwrap(), MeshSource::Aligned { n: 32 });
        assert!(MeshSource::File("m.txt".into()).refined(1).is_err());
    }

    #[test]
    fn example2_smoke() {
        let spec = builtin_example(2, None).unwrap();
        let mesh = Arc::new(MeshSource::Voronoi { n_cells: 64, seed: 1, lloyd: 20 }.build(spec.domain).unwrap());
        let sol = solve_problem(&spec, mesh, &RunOptions::new(1)).unwrap();
        let e = sol.errors.unwrap();
        assert!(e.l2.is_finite() && e.l2 < 0.1, "{e:?}");
    }

    #[test]
    fn study_without_exact_solution_is_refused() {
        let spec = builtin_example(3, None).unwrap();
        let base = MeshSource::Voronoi { n_cells: 16, seed: 1, lloyd: 0 };
        assert!(run_study(&spec, &base, 2, &RunOptions::new(1), |_, _| {}).is_err());
    }
}
