use std::collections::HashMap;
use std::sync::Arc;

use crate::geometry::{orient, Point};
use crate::mesh::PolyMesh;
use crate::{Error, Result};

/// Lagrange `P_r` on one triangle with equispaced nodes.
///
/// Local node `k` sits at barycentric coordinates `multi_index[k] / r`.
#[derive(Debug, Clone)]
pub struct LagrangeTriangle {
    degree: usize,
    multi_index: Vec<[usize; 3]>,
}

impl LagrangeTriangle {
    pub fn new(degree: usize) -> Self {
        let mut multi_index = Vec::new();
        for a in (0..=degree).rev() {
            for b in (0..=degree - a).rev() {
                multi_index.push([a, b, degree - a - b]);
            }
        }
        LagrangeTriangle { degree, multi_index }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.multi_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multi_index.is_empty()
    }

    pub fn multi_index(&self) -> &[[usize; 3]] {
        &self.multi_index
    }

    /// Values and barycentric derivatives of every basis function at `lambda`.
    pub fn eval_barycentric(&self, lambda: [f64; 3], vals: &mut [f64], dlambda: &mut [[f64; 3]]) {
        let r = self.degree as f64;
        // f[m][a] = prod_{l<a} (r lambda_m - l)/(l+1) and its derivative.
        let mut f = [[1.0f64; 16]; 3];
        let mut df = [[0.0f64; 16]; 3];
        for m in 0..3 {
            for a in 1..=self.degree {
                let l = (a - 1) as f64;
                let factor = (r * lambda[m] - l) / (l + 1.0);
                f[m][a] = f[m][a - 1] * factor;
                df[m][a] = df[m][a - 1] * factor + f[m][a - 1] * r / (l + 1.0);
            }
        }
        for (k, alpha) in self.multi_index.iter().enumerate() {
            let (f0, f1, f2) = (f[0][alpha[0]], f[1][alpha[1]], f[2][alpha[2]]);
            vals[k] = f0 * f1 * f2;
            dlambda[k] = [df[0][alpha[0]] * f1 * f2, f0 * df[1][alpha[1]] * f2, f0 * f1 * df[2][alpha[2]]];
        }
    }
}

/// Affine data of one sub-triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleMap {
    pub vertices: [Point; 3],
    /// Twice the signed area.
    pub area2: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl TriangleMap {
    pub fn new(p: [Point; 3]) -> Self {
        let area2 = orient(&p[0], &p[1], &p[2]);
        let g = |a: &Point, b: &Point| [(a.y - b.y) / area2, (b.x - a.x) / area2];
        TriangleMap { vertices: p, area2, grad_lambda: [g(&p[1], &p[2]), g(&p[2], &p[0]), g(&p[0], &p[1])] }
    }

    /// Physical point for reference coordinates `(s, t)`.
    pub fn map(&self, s: f64, t: f64) -> Point {
        let [a, b, c] = self.vertices;
        a + (b - a) * s + (c - a) * t
    }

    pub fn barycentric(&self, p: &Point) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let l1 = orient(&a, p, &c) / self.area2;
        let l2 = orient(&a, &b, p) / self.area2;
        [1.0 - l1 - l2, l1, l2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NodeKey {
    Vertex(usize),
    Edge(usize, usize, usize),
    Interior(usize, usize),
}

/// Continuous Lagrange `P_r` on the sub-triangulation.
///
/// With a cell partition, nodes on the interface between two subdomains are
/// duplicated (one copy per side), so functions may jump across the interface.
#[derive(Debug, Clone)]
pub struct ConformingSpace {
    mesh: Arc<PolyMesh>,
    element: LagrangeTriangle,
    triangle_nodes: Vec<usize>,
    node_coords: Vec<Point>,
    node_cells: Vec<Vec<usize>>,
    node_subdomain: Vec<usize>,
    partition: Option<Vec<usize>>,
}

impl ConformingSpace {
    pub fn new(mesh: Arc<PolyMesh>, degree: usize, partition: Option<Vec<usize>>) -> Result<Self> {
        if degree == 0 || degree > 15 {
            return Err(Error::Space(format!("unsupported conforming degree {degree}")));
        }
        if let Some(p) = &partition {
            if p.len() != mesh.n_cells() {
                return Err(Error::Space(format!("partition has {} entries for {} cells", p.len(), mesh.n_cells())));
            }
        }
        let element = LagrangeTriangle::new(degree);
        let n_loc = element.len();
        let mut ids: HashMap<(NodeKey, usize), usize> = HashMap::new();
        let mut triangle_nodes = Vec::with_capacity(mesh.subtriangles().len() * n_loc);
        let mut node_coords = Vec::new();
        let mut node_cells: Vec<Vec<usize>> = Vec::new();
        let mut node_subdomain = Vec::new();

        for (ti, t) in mesh.subtriangles().iter().enumerate() {
            let sub = partition.as_ref().map_or(0, |p| p[t.cell]);
            let pts = t.vertices.map(|v| mesh.vertices()[v]);
            for (k, alpha) in element.multi_index().iter().enumerate() {
                let nonzero: Vec<usize> = (0..3).filter(|&m| alpha[m] > 0).collect();
                let key = match nonzero.len() {
                    1 => NodeKey::Vertex(t.vertices[nonzero[0]]),
                    2 => {
                        let (va, vb) = (t.vertices[nonzero[0]], t.vertices[nonzero[1]]);
                        let count_at_max = if va > vb { alpha[nonzero[0]] } else { alpha[nonzero[1]] };
                        NodeKey::Edge(va.min(vb), va.max(vb), count_at_max)
                    }
                    _ => NodeKey::Interior(ti, k),
                };
                let id = *ids.entry((key, sub)).or_insert_with(|| {
                    let r = degree as f64;
                    let c = (pts[0].coords * alpha[0] as f64 + pts[1].coords * alpha[1] as f64 + pts[2].coords * alpha[2] as f64) / r;
                    node_coords.push(Point::from(c));
                    node_cells.push(Vec::new());
                    node_subdomain.push(sub);
                    node_coords.len() - 1
                });
                if !node_cells[id].contains(&t.cell) {
                    node_cells[id].push(t.cell);
                }
                triangle_nodes.push(id);
            }
        }
        for c in node_cells.iter_mut() {
            c.sort_unstable();
        }
        Ok(ConformingSpace { mesh, element, triangle_nodes, node_coords, node_cells, node_subdomain, partition })
    }

    pub fn mesh(&self) -> &Arc<PolyMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &LagrangeTriangle {
        &self.element
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn local_dim(&self) -> usize {
        self.element.len()
    }

    /// Global node ids of the local nodes of sub-triangle `tri`.
    pub fn triangle_nodes(&self, tri: usize) -> &[usize] {
        let n = self.element.len();
        &self.triangle_nodes[tri * n..(tri + 1) * n]
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    /// Polygonal cells whose closure contains the node (restricted to the node's subdomain).
    pub fn node_cells(&self, node: usize) -> &[usize] {
        &self.node_cells[node]
    }

    pub fn node_subdomain(&self, node: usize) -> usize {
        self.node_subdomain[node]
    }

    pub fn partition(&self) -> Option<&[usize]> {
        self.partition.as_deref()
    }

    /// Values and physical gradients of the local basis of `tri` at `p`.
    pub fn values_and_gradients(&self, map: &TriangleMap, p: &Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let lambda = map.barycentric(p);
        let mut dl = vec![[0.0; 3]; self.element.len()];
        self.element.eval_barycentric(lambda, vals, &mut dl);
        for (g, d) in grads.iter_mut().zip(&dl) {
            let gl = &map.grad_lambda;
            *g = [
                d[0] * gl[0][0] + d[1] * gl[1][0] + d[2] * gl[2][0],
                d[0] * gl[0][1] + d[1] * gl[1][1] + d[2] * gl[2][1],
            ];
        }
    }

    pub fn triangle_map(&self, tri: usize) -> TriangleMap {
        TriangleMap::new(self.mesh.triangle_points(tri))
    }

    /// Evaluates the conforming function with nodal values `u` on `tri` at `p`.
    pub fn evaluate(&self, u: &[f64], tri: usize, p: &Point) -> f64 {
        let map = self.triangle_map(tri);
        let n = self.element.len();
        let mut v = vec![0.0; n];
        let mut dl = vec![[0.0; 3]; n];
        self.element.eval_barycentric(map.barycentric(p), &mut v, &mut dl);
        self.triangle_nodes(tri).iter().zip(&v).map(|(&i, w)| u[i] * w).sum()
    }
}

/// Labels every cell by `classify` applied to its vertices and centroid.
///
/// `classify` returns `None` for points on an interface. A cell whose points
/// receive two different labels is split by the interface, which is an error.
pub fn partition_cells(mesh: &PolyMesh, classify: impl Fn(&Point) -> Option<usize>) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let poly = mesh.cell_polygon(c);
        let centroid = crate::geometry::polygon_centroid(&poly);
        let mut label = None;
        for p in poly.iter().chain(std::iter::once(&centroid)) {
            if let Some(l) = classify(p) {
                match label {
                    None => label = Some(l),
                    Some(prev) if prev != l => {
                        return Err(Error::Space(format!("partition splits polygonal cell {c}")));
                    }
                    _ => {}
                }
            }
        }
        out.push(label.ok_or_else(|| Error::Space(format!("cell {c} lies entirely on the interface")))?);
    }
    Ok(out)
}

/// Subdomain 1 for `y > 0`, 0 for `y < 0`; points with `|y| <= tol` are on the interface.
pub fn sign_y_partition(mesh: &PolyMesh) -> Result<Vec<usize>> {
    let tol = 1e-12 * mesh.cell_diameters().iter().copied().fold(0.0, f64::max);
    partition_cells(mesh, |p| {
        if p.y > tol {
            Some(1)
        } else if p.y < -tol {
            Some(0)
        } else {
            None
        }
    })
}
