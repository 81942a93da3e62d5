//! Recovered finite element method (R-FEM) on convex polygonal meshes.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod mesh;
pub mod pipeline;
pub mod problem;
pub mod quadrature;
pub mod recovery;
pub mod solver;
pub mod sparse;
pub mod spaces;

pub use analysis::{EocTable, ErrorReport, Rate};
pub use assembly::{Discretization, LinearSystem, PenaltyConfig};
pub use error::{Error, Result};
pub use geometry::{Point, Rect, Vector};
pub use mesh::PolyMesh;
pub use pipeline::{MeshSource, RunOptions, Solution};
pub use problem::{MeshFamily, PartitionRule, ProblemSpec};
pub use solver::{SolveReport, SolverConfig, SolverMode};
pub use sparse::CsrMatrix;
