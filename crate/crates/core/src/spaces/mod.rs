//! Discrete spaces: discontinuous scaled monomials on the polygonal cells and
//! continuous Lagrange elements on the sub-triangulation.

mod conforming;
mod dg;
mod projection;

pub use conforming::{partition_cells, sign_y_partition, ConformingSpace, LagrangeTriangle, TriangleMap};
pub use dg::DgSpace;
pub use projection::{cell_mass_matrix, l2_project};

use crate::geometry::Point;
use crate::mesh::PolyMesh;
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};

/// Physical quadrature points and weights on sub-triangle `tri`.
pub fn triangle_points(mesh: &PolyMesh, tri: usize, rule: &QuadratureRule) -> Vec<(Point, f64)> {
    let map = TriangleMap::new(mesh.triangle_points(tri));
    let jac = map.area2.abs();
    rule.points.iter().zip(&rule.weights).map(|(q, w)| (map.map(q[0], q[1]), w * jac)).collect()
}

/// Physical quadrature points and weights on polygonal cell `cell`.
pub fn cell_points(mesh: &PolyMesh, cell: usize, rule: &QuadratureRule) -> Vec<(Point, f64)> {
    mesh.cell_triangles(cell).flat_map(|t| triangle_points(mesh, t, rule)).collect()
}

/// Physical quadrature points and weights on a straight segment `a`-`b`.
pub fn segment_points(a: &Point, b: &Point, rule: &QuadratureRule) -> Vec<(Point, f64)> {
    let half = 0.5 * (b - a).norm();
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(q, w)| (Point::from((a.coords * (1.0 - q[0]) + b.coords * (1.0 + q[0])) * 0.5), w * half))
        .collect()
}

/// Values of the DG basis of `cell` at `p`, rejecting points outside the cell.
pub fn eval_basis(space: &DgSpace, cell: usize, p: &Point) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let tol = 1e-10 * mesh.cell_diameters()[cell];
    let poly = mesh.cell_polygon(cell);
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let e = b - a;
        let signed = (e.x * (p.y - a.y) - e.y * (p.x - a.x)) / e.norm();
        if signed < -tol {
            return Err(Error::Space(format!("point ({}, {}) lies outside cell {cell}", p.x, p.y)));
        }
    }
    let mut out = vec![0.0; space.local_dim()];
    space.values(cell, p, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::mesh::aligned_square_mesh;
    use std::sync::Arc;

    #[test]
    fn eval_basis_checks_membership() {
        let m = Arc::new(aligned_square_mesh(2, Rect::UNIT).unwrap());
        let s = DgSpace::new(m, 1).unwrap();
        assert!(eval_basis(&s, 0, &Point::new(0.25, 0.25)).is_ok());
        assert!(eval_basis(&s, 0, &Point::new(0.5, 0.5)).is_ok());
        assert!(eval_basis(&s, 0, &Point::new(0.75, 0.25)).is_err());
    }
}
