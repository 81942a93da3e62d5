//! Coefficients, data and boundary classification for
//! `−∇·(a∇u) + b·∇u + cu = f` on a polygonal domain.

mod boundary;
mod builtin;
mod custom;

pub use boundary::{
    classify_boundary, classify_element_faces_flow, flow_tolerance, BoundaryKind, BoundaryLabel, FaceFlow,
};
pub use builtin::builtin_example;
pub use custom::{CustomProblem, ExprField};

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::geometry::{Point, Rect, Vector};
use crate::mesh::PolyMesh;
use crate::quadrature::triangle_rule;
use crate::spaces::cell_points;
use crate::{Error, Result};

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> Vector + Send + Sync>;
pub type TensorField = Arc<dyn Fn(&Point) -> Matrix2<f64> + Send + Sync>;
/// Marks boundary points (given with their outward normal) as Neumann.
pub type BoundaryPredicate = Arc<dyn Fn(&Point, &Vector) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
}

/// How the recovery is split into independent subdomains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionRule {
    #[default]
    None,
    /// `y > 0` and `y < 0`, with the interface on `y = 0`.
    SignY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshFamily {
    #[default]
    Voronoi,
    /// Square cells aligned with the partition interface.
    Aligned,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Rect,
    pub a: TensorField,
    pub b: VectorField,
    pub c: ScalarField,
    pub div_b: ScalarField,
    pub f: ScalarField,
    pub g_d: ScalarField,
    pub g_n: ScalarField,
    pub exact: Option<ExactSolution>,
    /// Elliptic boundary parts are Dirichlet unless this predicate holds.
    pub neumann: Option<BoundaryPredicate>,
    pub partition: PartitionRule,
    pub mesh_family: MeshFamily,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("has_exact", &self.exact.is_some())
            .field("partition", &self.partition)
            .field("mesh_family", &self.mesh_family)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// A problem with every field zero on `domain`; fill in with struct update syntax.
    pub fn zero(name: &str, domain: Rect) -> Self {
        let zero: ScalarField = Arc::new(|_| 0.0);
        ProblemSpec {
            name: name.to_string(),
            domain,
            a: Arc::new(|_| Matrix2::zeros()),
            b: Arc::new(|_| Vector::zeros()),
            c: zero.clone(),
            div_b: zero.clone(),
            f: zero.clone(),
            g_d: zero.clone(),
            g_n: zero,
            exact: None,
            neumann: None,
            partition: PartitionRule::None,
            mesh_family: MeshFamily::Voronoi,
        }
    }

    /// `c − ½∇·b`.
    pub fn c0(&self, p: &Point) -> f64 {
        (self.c)(p) - 0.5 * (self.div_b)(p)
    }

    /// Spectral norm of `a` at `p`.
    pub fn a_norm(&self, p: &Point) -> f64 {
        spectral_norm(&(self.a)(p))
    }
}

/// Largest absolute eigenvalue of the symmetric part of `m`.
pub fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    let (l0, l1) = sym_eigenvalues(m);
    l0.abs().max(l1.abs())
}

fn sym_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let (p, q, r) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    (mean - rad, mean + rad)
}

/// Minimum of `c − ½∇·b` over volume quadrature points. Logs a warning when
/// the value is not positive (the method still runs, e.g. pure convection with `c = 0`).
pub fn verify_positivity(spec: &ProblemSpec, mesh: &PolyMesh, order: usize) -> Result<f64> {
    let rule = triangle_rule(order)?;
    let mut gamma0 = f64::INFINITY;
    for cell in 0..mesh.n_cells() {
        for (p, _) in cell_points(mesh, cell, &rule) {
            gamma0 = gamma0.min(spec.c0(&p));
        }
    }
    if gamma0 <= 0.0 {
        log::warn!("{}: c - div(b)/2 has minimum {gamma0:.3e} <= 0; positivity assumption violated", spec.name);
    }
    Ok(gamma0)
}

/// Checks that `a` is symmetric positive semidefinite at all volume quadrature points.
pub fn validate_diffusion(spec: &ProblemSpec, mesh: &PolyMesh, order: usize) -> Result<()> {
    let rule = triangle_rule(order)?;
    for cell in 0..mesh.n_cells() {
        for (p, _) in cell_points(mesh, cell, &rule) {
            let a = (spec.a)(&p);
            let scale = spectral_norm(&a).max(1.0);
            if (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 * scale {
                return Err(Error::Problem(format!(
                    "diffusion tensor is not symmetric at ({:.6}, {:.6})",
                    p.x, p.y
                )));
            }
            let (lmin, _) = sym_eigenvalues(&a);
            if lmin < -1e-12 {
                return Err(Error::Problem(format!(
                    "diffusion tensor is not positive semidefinite at ({:.6}, {:.6}): eigenvalue {lmin:.3e}",
                    p.x, p.y
                )));
            }
        }
    }
    Ok(())
}
