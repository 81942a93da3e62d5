//! Benchmark fixtures shared by the criterion targets.

use std::sync::Arc;

use rfem_core::mesh::{generate_voronoi_mesh, PolyMesh};
use rfem_core::problem::{builtin_example, ProblemSpec};

/// Example 2 on a Lloyd-smoothed Voronoi mesh of `n_cells`.
pub fn example2_fixture(n_cells: usize) -> (ProblemSpec, Arc<PolyMesh>) {
    let spec = builtin_example(2, None).expect("built-in example");
    let mesh = generate_voronoi_mesh(n_cells, 1, 20, spec.domain).expect("mesh");
    (spec, Arc::new(mesh))
}
