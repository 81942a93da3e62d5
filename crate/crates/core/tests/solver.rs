use std::sync::Arc;

use rfem_core::assembly::assemble_system;
use rfem_core::mesh::generate_voronoi_mesh;
use rfem_core::problem::builtin_example;
use rfem_core::solver::solve;
use rfem_core::{Discretization, PenaltyConfig, SolverConfig, SolverMode};

#[test]
fn direct_and_iterative_agree_on_example2() {
    let spec = builtin_example(2, None).unwrap();
    let mesh = Arc::new(generate_voronoi_mesh(256, 1, 100, spec.domain).unwrap());
    let d = Discretization::new(&spec, mesh, 2, None).unwrap();
    let sys = assemble_system(&spec, &d, &PenaltyConfig::default()).unwrap();

    let direct = solve(&sys.matrix, &sys.rhs, &SolverConfig { mode: SolverMode::Direct, ..Default::default() }).unwrap();
    let iterative =
        solve(&sys.matrix, &sys.rhs, &SolverConfig { mode: SolverMode::Iterative, ..Default::default() }).unwrap();
    assert_eq!(direct.mode, SolverMode::Direct);
    assert_eq!(iterative.mode, SolverMode::Iterative);
    assert!(iterative.iterations > 0);

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = direct.solution.iter().zip(&iterative.solution).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&direct.solution);
    assert!(rel <= 1e-8, "relative difference {rel:.3e}");
}
