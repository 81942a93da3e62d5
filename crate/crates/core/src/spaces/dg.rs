use std::sync::Arc;

use crate::geometry::Point;
use crate::mesh::PolyMesh;
use crate::{Error, Result};

/// Element-wise discontinuous `P_r` on the polygonal cells.
///
/// The basis on cell `T` is `((x - x_T)/h_T)^i ((y - y_T)/h_T)^j`, `i + j <= r`, with
/// `x_T` the bounding-box center and `h_T` its half-diagonal.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Arc<PolyMesh>,
    degree: usize,
    exponents: Vec<(i32, i32)>,
    centers: Vec<Point>,
    scales: Vec<f64>,
}

impl DgSpace {
    pub fn new(mesh: Arc<PolyMesh>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Space("degree 0 is unsupported; the method requires r >= 1".into()));
        }
        let mut exponents = Vec::new();
        for total in 0..=degree as i32 {
            for j in 0..=total {
                exponents.push((total - j, j));
            }
        }
        let mut centers = Vec::with_capacity(mesh.n_cells());
        let mut scales = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let (lo, hi) = mesh.cell_bounding_box(c);
            centers.push(Point::from((lo.coords + hi.coords) * 0.5));
            scales.push(0.5 * (hi - lo).norm());
        }
        Ok(DgSpace { mesh, degree, exponents, centers, scales })
    }

    pub fn mesh(&self) -> &Arc<PolyMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(r+1)(r+2)/2`.
    pub fn local_dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn dim(&self) -> usize {
        self.local_dim() * self.mesh.n_cells()
    }

    /// Global index of local basis function `k` on `cell`.
    #[inline]
    pub fn dof(&self, cell: usize, k: usize) -> usize {
        cell * self.local_dim() + k
    }

    pub fn cell_dofs(&self, cell: usize) -> std::ops::Range<usize> {
        let n = self.local_dim();
        cell * n..(cell + 1) * n
    }

    pub fn exponents(&self) -> &[(i32, i32)] {
        &self.exponents
    }

    pub fn center(&self, cell: usize) -> Point {
        self.centers[cell]
    }

    pub fn scale(&self, cell: usize) -> f64 {
        self.scales[cell]
    }

    /// Values of the local basis of `cell` at `p`; `p` may lie anywhere.
    pub fn values(&self, cell: usize, p: &Point, out: &mut [f64]) {
        let (xi, eta) = self.local_coords(cell, p);
        let (px, py) = self.powers(xi, eta);
        for (o, &(i, j)) in out.iter_mut().zip(&self.exponents) {
            *o = px[i as usize] * py[j as usize];
        }
    }

    /// Values and gradients of the local basis of `cell` at `p`.
    pub fn values_and_gradients(&self, cell: usize, p: &Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let (xi, eta) = self.local_coords(cell, p);
        let inv_h = 1.0 / self.scales[cell];
        let (px, py) = self.powers(xi, eta);
        for (k, &(i, j)) in self.exponents.iter().enumerate() {
            let (i, j) = (i as usize, j as usize);
            vals[k] = px[i] * py[j];
            let dx = if i == 0 { 0.0 } else { i as f64 * px[i - 1] * py[j] * inv_h };
            let dy = if j == 0 { 0.0 } else { j as f64 * px[i] * py[j - 1] * inv_h };
            grads[k] = [dx, dy];
        }
    }

    /// Evaluates the DG function with global coefficients `coeffs` on `cell` at `p`.
    pub fn evaluate(&self, coeffs: &[f64], cell: usize, p: &Point) -> f64 {
        let mut v = vec![0.0; self.local_dim()];
        self.values(cell, p, &mut v);
        v.iter().zip(&coeffs[self.cell_dofs(cell)]).map(|(a, b)| a * b).sum()
    }

    #[inline]
    fn local_coords(&self, cell: usize, p: &Point) -> (f64, f64) {
        let c = self.centers[cell];
        let h = self.scales[cell];
        ((p.x - c.x) / h, (p.y - c.y) / h)
    }

    fn powers(&self, xi: f64, eta: f64) -> ([f64; 16], [f64; 16]) {
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for k in 1..=self.degree.min(15) {
            px[k] = px[k - 1] * xi;
            py[k] = py[k - 1] * eta;
        }
        (px, py)
    }
}
