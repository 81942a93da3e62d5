//! Nodal-averaging recovery from the DG space into the conforming space.
//!
//! The value at a Lagrange node is the plain average of the point values of
//! the cell polynomials of every polygonal cell whose closure contains the node.

use std::sync::Arc;

use crate::mesh::PolyMesh;
use crate::quadrature::{segment_rule, triangle_rule};
use crate::sparse::{CsrMatrix, Triplets};
use crate::spaces::{segment_points, triangle_points, ConformingSpace, DgSpace};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RecoveryOperator {
    matrix: CsrMatrix,
    partitioned: bool,
}

impl RecoveryOperator {
    /// Rows are conforming nodes, columns are DG dofs.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn is_partitioned(&self) -> bool {
        self.partitioned
    }

    pub fn apply(&self, dg: &[f64]) -> Vec<f64> {
        self.matrix.matvec(dg)
    }
}

pub fn build_recovery(dg: &DgSpace, conf: &ConformingSpace) -> Result<RecoveryOperator> {
    if !Arc::ptr_eq(dg.mesh(), conf.mesh()) {
        return Err(Error::Recovery("DG and conforming spaces live on different meshes".into()));
    }
    if dg.degree() != conf.degree() {
        return Err(Error::Recovery(format!(
            "degree mismatch: DG r = {}, conforming r = {}",
            dg.degree(),
            conf.degree()
        )));
    }
    let n_loc = dg.local_dim();
    let mut t = Triplets::new(conf.n_nodes(), dg.dim());
    let mut vals = vec![0.0; n_loc];
    for node in 0..conf.n_nodes() {
        let cells = conf.node_cells(node);
        let w = 1.0 / cells.len() as f64;
        let p = conf.node_coords()[node];
        for &c in cells {
            dg.values(c, &p, &mut vals);
            for (k, v) in vals.iter().enumerate() {
                t.push(node, dg.dof(c, k), w * v);
            }
        }
    }
    Ok(RecoveryOperator { matrix: t.to_csr(), partitioned: conf.partition().is_some() })
}

pub fn apply_recovery(r: &RecoveryOperator, dg: &[f64]) -> Result<Vec<f64>> {
    if dg.len() != r.matrix.ncols() {
        return Err(Error::Recovery(format!("vector has {} entries, expected {}", dg.len(), r.matrix.ncols())));
    }
    Ok(r.apply(dg))
}

/// `Σ_T |v − ℰv|²_{α,T} / ‖h^{1/2−α}[v]‖²_{Γ_int}` for `α ∈ {0, 1}`.
///
/// The face `h` is the mean of the two adjacent cell diameters.
pub fn kp_ratio(dg: &DgSpace, conf: &ConformingSpace, r: &RecoveryOperator, v: &[f64], alpha: u32) -> Result<f64> {
    if alpha > 1 {
        return Err(Error::Recovery(format!("seminorm order {alpha} not supported")));
    }
    let mesh: &PolyMesh = dg.mesh();
    let deg = dg.degree();
    let rec = apply_recovery(r, v)?;
    let vol_rule = triangle_rule(2 * deg + 2)?;
    let n_dg = dg.local_dim();
    let n_cf = conf.local_dim();
    let (mut dv, mut dg_grad) = (vec![0.0; n_dg], vec![[0.0; 2]; n_dg]);
    let (mut cv, mut cf_grad) = (vec![0.0; n_cf], vec![[0.0; 2]; n_cf]);
    let mut lhs = 0.0;
    for (ti, tri) in mesh.subtriangles().iter().enumerate() {
        let map = conf.triangle_map(ti);
        let coeffs = &v[dg.cell_dofs(tri.cell)];
        let nodes = conf.triangle_nodes(ti);
        for (p, w) in triangle_points(mesh, ti, &vol_rule) {
            dg.values_and_gradients(tri.cell, &p, &mut dv, &mut dg_grad);
            conf.values_and_gradients(&map, &p, &mut cv, &mut cf_grad);
            if alpha == 0 {
                let a: f64 = coeffs.iter().zip(&dv).map(|(c, b)| c * b).sum();
                let b: f64 = nodes.iter().zip(&cv).map(|(&n, b)| rec[n] * b).sum();
                lhs += w * (a - b).powi(2);
            } else {
                for d in 0..2 {
                    let a: f64 = coeffs.iter().zip(&dg_grad).map(|(c, g)| c * g[d]).sum();
                    let b: f64 = nodes.iter().zip(&cf_grad).map(|(&n, g)| rec[n] * g[d]).sum();
                    lhs += w * (a - b).powi(2);
                }
            }
        }
    }
    let face_rule = segment_rule(2 * deg + 2)?;
    let mut rhs = 0.0;
    for f in mesh.faces() {
        let Some(nb) = f.neighbor else { continue };
        let h = 0.5 * (mesh.cell_diameters()[f.owner] + mesh.cell_diameters()[nb]);
        let weight = h.powi(1 - 2 * alpha as i32);
        for se in &f.sub_edges {
            let [a, b] = se.vertices.map(|i| mesh.vertices()[i]);
            for (p, w) in segment_points(&a, &b, &face_rule) {
                let jump = dg.evaluate(v, f.owner, &p) - dg.evaluate(v, nb, &p);
                rhs += weight * w * jump * jump;
            }
        }
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    if rhs <= 1e-24 * scale * scale {
        return Err(Error::Recovery("ratio undefined: the function is continuous".into()));
    }
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::mesh::{aligned_square_mesh, generate_voronoi_mesh, structured_quad_mesh, agglomerate_mesh};
    use crate::spaces::{l2_project, sign_y_partition};

    fn spaces(mesh: PolyMesh, r: usize) -> (DgSpace, ConformingSpace, RecoveryOperator) {
        let m = Arc::new(mesh);
        let dg = DgSpace::new(m.clone(), r).unwrap();
        let cf = ConformingSpace::new(m, r, None).unwrap();
        let rec = build_recovery(&dg, &cf).unwrap();
        (dg, cf, rec)
    }

    #[test]
    fn rows_sum_to_one() {
        let (dg, _, rec) = spaces(generate_voronoi_mesh(50, 3, 10, Rect::UNIT).unwrap(), 2);
        // The averaging weights sit in the constant-monomial columns.
        let m = rec.matrix();
        for i in 0..m.nrows() {
            let (cols, vals) = m.row(i);
            let s: f64 = cols.iter().zip(vals).filter(|(&c, _)| c % dg.local_dim() == 0).map(|(_, v)| v).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        let ones: Vec<f64> = (0..m.ncols()).map(|k| if k % dg.local_dim() == 0 { 1.0 } else { 0.0 }).collect();
        assert!(rec.apply(&ones).iter().all(|x| (x - 1.0).abs() < 1e-13));
    }

    #[test]
    fn two_cell_average() {
        // Two unit squares side by side; piecewise constants 1 and 3.
        let fine = structured_quad_mesh(2, 1, Rect::new(0.0, 0.0, 2.0, 1.0));
        let (dg, cf, rec) = spaces(agglomerate_mesh(&fine, &[0, 1]).unwrap(), 1);
        let mut v = vec![0.0; dg.dim()];
        v[dg.dof(0, 0)] = 1.0;
        v[dg.dof(1, 0)] = 3.0;
        let u = rec.apply(&v);
        for (n, p) in cf.node_coords().iter().enumerate() {
            let expect = if (p.x - 1.0).abs() < 1e-14 { 2.0 } else if p.x < 1.0 { 1.0 } else { 3.0 };
            assert!((u[n] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn interior_node_is_a_point_evaluation() {
        let m = Arc::new(generate_voronoi_mesh(10, 1, 5, Rect::UNIT).unwrap());
        let dg = DgSpace::new(m.clone(), 3).unwrap();
        let cf = ConformingSpace::new(m, 3, None).unwrap();
        let rec = build_recovery(&dg, &cf).unwrap();
        let n = (0..cf.n_nodes()).find(|&n| cf.node_cells(n).len() == 1).unwrap();
        let c = cf.node_cells(n)[0];
        let (idx, vals) = rec.matrix().row(n);
        let mut expect = vec![0.0; dg.local_dim()];
        dg.values(c, &cf.node_coords()[n], &mut expect);
        assert_eq!(idx, dg.cell_dofs(c).collect::<Vec<_>>().as_slice());
        assert!(vals.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn reproduces_global_polynomials() {
        let (dg, cf, rec) = spaces(generate_voronoi_mesh(40, 8, 10, Rect::UNIT).unwrap(), 3);
        let f = |p: &Point| 1.0 + p.x * p.x * p.y - 2.0 * p.y.powi(3) + p.x;
        let v = l2_project(&dg, &f, 8).unwrap();
        let u = rec.apply(&v);
        for (n, p) in cf.node_coords().iter().enumerate() {
            assert!((u[n] - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn partitioned_recovery_keeps_interface_jump() {
        let m = Arc::new(aligned_square_mesh(4, Rect::new(-1.0, -1.0, 1.0, 1.0)).unwrap());
        let part = sign_y_partition(&m).unwrap();
        let dg = DgSpace::new(m.clone(), 1).unwrap();
        let cf = ConformingSpace::new(m, 1, Some(part)).unwrap();
        let rec = build_recovery(&dg, &cf).unwrap();
        assert!(rec.is_partitioned());
        let f = |p: &Point| if p.y > 0.0 { 2.0 } else { -1.0 };
        let v = l2_project(&dg, &f, 2).unwrap();
        let u = rec.apply(&v);
        let mut seen = std::collections::HashMap::new();
        for (n, p) in cf.node_coords().iter().enumerate() {
            if p.y.abs() < 1e-14 {
                seen.entry(format!("{:.6}", p.x)).or_insert_with(Vec::new).push(u[n]);
            }
        }
        assert_eq!(seen.len(), 5);
        for vals in seen.values() {
            let mut v = vals.clone();
            v.sort_by(f64::total_cmp);
            assert_eq!(v.len(), 2);
            assert!((v[0] + 1.0).abs() < 1e-13 && (v[1] - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn mismatched_degree_is_rejected() {
        let m = Arc::new(aligned_square_mesh(2, Rect::UNIT).unwrap());
        let dg = DgSpace::new(m.clone(), 1).unwrap();
        let cf = ConformingSpace::new(m.clone(), 2, None).unwrap();
        assert!(build_recovery(&dg, &cf).is_err());
        let other = Arc::new(aligned_square_mesh(2, Rect::UNIT).unwrap());
        let cf = ConformingSpace::new(other, 1, None).unwrap();
        assert!(build_recovery(&dg, &cf).is_err());
    }

    #[test]
    fn kp_ratio_on_two_cells_by_hand() {
        // Cells [0,1]x[0,1] and [1,2]x[0,1], v = 0 on the left, 1 on the right, r = 1.
        // ℰv is the P1 function with nodal values 0 (x=0), 1/2 (x=1), 1 (x=2): ℰv = x/2,
        // so v - ℰv = -x/2 on the left and 1 - x/2 on the right:
        // ∫ = 2 ∫_0^1 (x/2)^2 dx = 1/6. Face: h = √2, jump 1 on unit length: √2.
        let fine = structured_quad_mesh(2, 1, Rect::new(0.0, 0.0, 2.0, 1.0));
        let (dg, cf, rec) = spaces(agglomerate_mesh(&fine, &[0, 1]).unwrap(), 1);
        let mut v = vec![0.0; dg.dim()];
        v[dg.dof(1, 0)] = 1.0;
        let ratio = kp_ratio(&dg, &cf, &rec, &v, 0).unwrap();
        let expect = (1.0 / 6.0) / 2f64.sqrt();
        assert!((ratio - expect).abs() < 1e-13, "{ratio} vs {expect}");
        // α = 1: |∇(v - ℰv)|² = 1/4 on area 2 → 1/2; face weight 1/h.
        let ratio1 = kp_ratio(&dg, &cf, &rec, &v, 1).unwrap();
        let expect1 = 0.5 / (1.0 / 2f64.sqrt());
        assert!((ratio1 - expect1).abs() < 1e-13, "{ratio1} vs {expect1}");
    }

    #[test]
    fn kp_ratio_rejects_continuous_input() {
        let (dg, cf, rec) = spaces(aligned_square_mesh(3, Rect::UNIT).unwrap(), 1);
        let v = l2_project(&dg, &|p: &Point| p.x + 2.0 * p.y, 2).unwrap();
        assert!(kp_ratio(&dg, &cf, &rec, &v, 0).is_err());
    }
}
