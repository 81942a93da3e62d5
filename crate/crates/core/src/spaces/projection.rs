use nalgebra::{DMatrix, DVector};

use super::{cell_points, DgSpace};
use crate::geometry::Point;
use crate::quadrature::triangle_rule;
use crate::{Error, Result};

/// Mass matrix of the DG basis on `cell`, integrated exactly for degree `2r`.
pub fn cell_mass_matrix(space: &DgSpace, cell: usize) -> Result<DMatrix<f64>> {
    let n = space.local_dim();
    let rule = triangle_rule(2 * space.degree())?;
    let mut m = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    for (p, w) in cell_points(space.mesh(), cell, &rule) {
        space.values(cell, &p, &mut v);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    Ok(m)
}

/// Element-wise `L^2` projection of `f` onto the DG space.
pub fn l2_project(space: &DgSpace, f: &dyn Fn(&Point) -> f64, order: usize) -> Result<Vec<f64>> {
    let n = space.local_dim();
    let rule = triangle_rule(order.max(2 * space.degree()))?;
    let mut out = vec![0.0; space.dim()];
    let mut v = vec![0.0; n];
    for cell in 0..space.mesh().n_cells() {
        let m = cell_mass_matrix(space, cell)?;
        let mut rhs = DVector::zeros(n);
        for (p, w) in cell_points(space.mesh(), cell, &rule) {
            space.values(cell, &p, &mut v);
            let fp = f(&p);
            for i in 0..n {
                rhs[i] += w * fp * v[i];
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Space(format!("mass matrix of cell {cell} is not positive definite")))?;
        let x = chol.solve(&rhs);
        out[space.cell_dofs(cell)].copy_from_slice(x.as_slice());
    }
    Ok(out)
}
