//! Convex polygonal meshes with a conforming simplicial sub-triangulation.
//!
//! A [`PolyMesh`] stores the polygonal cells, the triangles that partition each
//! cell, and the face skeleton of the polygonal mesh. Faces of agglomerated
//! meshes may be polylines; they keep their constituent sub-edges so that
//! face integrals can be evaluated segment by segment.

mod agglomerate;
mod io;
mod voronoi;

pub use agglomerate::{agglomerate_mesh, aligned_square_mesh, structured_quad_mesh, FineMesh};
pub use io::{format_mesh, parse_mesh, read_mesh, write_mesh};
pub use voronoi::{generate_voronoi_mesh, generate_with_options, mesh_from_generators, voronoi_cells, VoronoiOptions};

use std::collections::HashMap;
use std::ops::Range;

use crate::geometry::{diameter, orient, outward_normal, polygon_signed_area, Point, Vector};
use crate::{Error, Result};

/// Relative tolerance used by the geometric predicates.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubTriangle {
    /// Vertex indices in counterclockwise order.
    pub vertices: [usize; 3],
    /// Parent polygonal cell.
    pub cell: usize,
}

/// One straight segment of a [`PolyFace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubEdge {
    /// Endpoints, traversed counterclockwise with respect to the owner cell.
    pub vertices: [usize; 2],
    pub owner_triangle: usize,
    pub neighbor_triangle: Option<usize>,
    /// Unit normal pointing out of the owner cell.
    pub normal: Vector,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFace {
    pub sub_edges: Vec<SubEdge>,
    pub owner: usize,
    /// `None` on the domain boundary.
    pub neighbor: Option<usize>,
    /// Length-weighted mean normal of the sub-edges; exact for straight faces.
    pub unit_normal: Vector,
    pub measure: f64,
}

impl PolyFace {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    /// The cell on the other side of `cell`, if any.
    pub fn other(&self, cell: usize) -> Option<usize> {
        if cell == self.owner {
            self.neighbor
        } else {
            Some(self.owner)
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    subtriangles: Vec<SubTriangle>,
    cell_triangles: Vec<Range<usize>>,
    faces: Vec<PolyFace>,
    cell_faces: Vec<Vec<usize>>,
    cell_diameters: Vec<f64>,
    cell_areas: Vec<f64>,
    groups: Option<Vec<usize>>,
    c_delta: f64,
}

impl PolyMesh {
    /// Builds a mesh from convex counterclockwise cells, fan-triangulating every cell.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>, groups: Option<Vec<usize>>) -> Result<Self> {
        validate_cells(&vertices, &cells)?;
        let subtriangles = subtriangulate(&vertices, &cells)?;
        Self::with_subtriangulation(vertices, cells, subtriangles, groups)
    }

    /// Builds a mesh with an explicitly provided sub-triangulation.
    pub fn with_subtriangulation(
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        mut subtriangles: Vec<SubTriangle>,
        groups: Option<Vec<usize>>,
    ) -> Result<Self> {
        validate_cells(&vertices, &cells)?;
        if let Some(g) = &groups {
            if g.len() != cells.len() {
                return Err(Error::Mesh(format!(
                    "group list has {} entries for {} cells",
                    g.len(),
                    cells.len()
                )));
            }
        }

        let polygons: Vec<Vec<Point>> = cells
            .iter()
            .map(|c| c.iter().map(|&v| vertices[v]).collect())
            .collect();
        let cell_areas: Vec<f64> = polygons.iter().map(|p| polygon_signed_area(p)).collect();
        let cell_diameters: Vec<f64> = polygons.iter().map(|p| diameter(p)).collect();

        for t in subtriangles.iter_mut() {
            if t.cell >= cells.len() {
                return Err(Error::Mesh(format!("sub-triangle references missing cell {}", t.cell)));
            }
            if t.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh("vertex index out of range".into()));
            }
            let [a, b, c] = t.vertices.map(|v| vertices[v]);
            if orient(&a, &b, &c) < 0.0 {
                t.vertices.swap(1, 2);
            }
        }
        subtriangles.sort_by_key(|t| t.cell);

        let mut cell_triangles = vec![0..0; cells.len()];
        let mut start = 0;
        while start < subtriangles.len() {
            let cell = subtriangles[start].cell;
            let mut end = start;
            while end < subtriangles.len() && subtriangles[end].cell == cell {
                end += 1;
            }
            cell_triangles[cell] = start..end;
            start = end;
        }

        let mut c_delta: f64 = 1.0;
        for (ci, range) in cell_triangles.iter().enumerate() {
            if range.is_empty() {
                return Err(Error::Mesh(format!("cell {ci} has no sub-triangles")));
            }
            let h = cell_diameters[ci];
            let tol = GEOMETRY_TOL * h * h;
            let mut sum = 0.0;
            // Orientation tests lose absolute accuracy with distance from the origin.
            let mut reach: f64 = 0.0;
            for t in &subtriangles[range.clone()] {
                let p = t.vertices.map(|v| vertices[v]);
                reach = p.iter().fold(reach, |m, q| m.max(q.x.abs()).max(q.y.abs()));
                let a2 = orient(&p[0], &p[1], &p[2]);
                if a2 <= tol {
                    return Err(Error::Mesh(format!("cell {ci} has a degenerate sub-triangle")));
                }
                sum += 0.5 * a2;
                let ht = diameter(&p);
                c_delta = c_delta.max(h / ht).max(ht / h);
            }
            if (sum - cell_areas[ci]).abs() > GEOMETRY_TOL * (10.0 * cell_areas[ci] + h * reach) {
                return Err(Error::Mesh(format!(
                    "sub-triangles of cell {ci} cover area {sum} but the cell has area {}",
                    cell_areas[ci]
                )));
            }
        }

        let mut mesh = PolyMesh {
            vertices,
            cells,
            subtriangles,
            cell_triangles,
            faces: Vec::new(),
            cell_faces: Vec::new(),
            cell_diameters,
            cell_areas,
            groups,
            c_delta,
        };
        mesh.faces = build_face_topology(&mesh)?;
        let mut cell_faces = vec![Vec::new(); mesh.cells.len()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            cell_faces[f.owner].push(fi);
            if let Some(n) = f.neighbor {
                cell_faces[n].push(fi);
            }
        }
        mesh.cell_faces = cell_faces;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn subtriangles(&self) -> &[SubTriangle] {
        &self.subtriangles
    }

    /// Indices into [`Self::subtriangles`] of the triangles partitioning `cell`.
    pub fn cell_triangles(&self, cell: usize) -> Range<usize> {
        self.cell_triangles[cell].clone()
    }

    pub fn faces(&self) -> &[PolyFace] {
        &self.faces
    }

    pub fn cell_faces(&self, cell: usize) -> &[usize] {
        &self.cell_faces[cell]
    }

    pub fn cell_diameters(&self) -> &[f64] {
        &self.cell_diameters
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.cell_areas
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.groups.as_deref()
    }

    /// Mesh comparability constant: `h_T / c <= h_tau <= c h_T` for every sub-triangle.
    pub fn c_delta(&self) -> f64 {
        self.c_delta
    }

    pub fn triangle_points(&self, tri: usize) -> [Point; 3] {
        self.subtriangles[tri].vertices.map(|v| self.vertices[v])
    }

    pub fn cell_polygon(&self, cell: usize) -> Vec<Point> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    /// Axis-aligned bounding box of the cell as `(min, max)`.
    pub fn cell_bounding_box(&self, cell: usize) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &v in &self.cells[cell] {
            let p = self.vertices[v];
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.faces.len() - self.n_boundary_faces()
    }

    /// Returns a copy carrying the given cell groups (subdomain labels).
    pub fn with_groups(mut self, groups: Option<Vec<usize>>) -> Result<Self> {
        if let Some(g) = &groups {
            if g.len() != self.cells.len() {
                return Err(Error::Mesh("group list length does not match cell count".into()));
            }
        }
        self.groups = groups;
        Ok(self)
    }
}

/// `(h_max, per-cell diameters)`.
pub fn mesh_size(mesh: &PolyMesh) -> (f64, Vec<f64>) {
    let d = mesh.cell_diameters.clone();
    let h = d.iter().copied().fold(0.0, f64::max);
    (h, d)
}

fn validate_cells(vertices: &[Point], cells: &[Vec<usize>]) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::Mesh("mesh has no cells".into()));
    }
    for (ci, c) in cells.iter().enumerate() {
        if c.len() < 3 {
            return Err(Error::Mesh(format!("cell {ci} has fewer than 3 vertices")));
        }
        if c.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::Mesh(format!("cell {ci}: vertex index out of range")));
        }
        for i in 0..c.len() {
            if c[i] == c[(i + 1) % c.len()] {
                return Err(Error::Mesh(format!("cell {ci} repeats vertex {}", c[i])));
            }
        }
        let pts: Vec<Point> = c.iter().map(|&v| vertices[v]).collect();
        if polygon_signed_area(&pts) <= 0.0 {
            return Err(Error::Mesh(format!("cell {ci} is not counterclockwise")));
        }
        check_convex(ci, &pts)?;
    }
    Ok(())
}

fn check_convex(ci: usize, pts: &[Point]) -> Result<()> {
    let h = diameter(pts);
    let tol = GEOMETRY_TOL * h * h;
    let n = pts.len();
    for i in 0..n {
        let turn = orient(&pts[(i + n - 1) % n], &pts[i], &pts[(i + 1) % n]);
        if turn < -tol {
            return Err(Error::Mesh(format!("cell {ci} has a reflex vertex at position {i}")));
        }
    }
    Ok(())
}

/// Fan triangulation of every convex cell from its vertex 0.
///
/// Cells with collinear vertices (agglomerated squares) make some fans degenerate; for
/// those the first vertex that yields a proper fan is used as apex. No points are added.
pub fn subtriangulate(vertices: &[Point], cells: &[Vec<usize>]) -> Result<Vec<SubTriangle>> {
    let mut out = Vec::new();
    for (ci, c) in cells.iter().enumerate() {
        let pts: Vec<Point> = c.iter().map(|&v| vertices[v]).collect();
        check_convex(ci, &pts)?;
        let h = diameter(&pts);
        let tol = GEOMETRY_TOL * h * h;
        let n = c.len();
        let apex = (0..n)
            .find(|&a| {
                (1..n - 1).all(|k| orient(&pts[a], &pts[(a + k) % n], &pts[(a + k + 1) % n]) > tol)
            })
            .ok_or_else(|| Error::Mesh(format!("cell {ci} admits no non-degenerate fan triangulation")))?;
        for k in 1..n - 1 {
            out.push(SubTriangle {
                vertices: [c[apex], c[(apex + k) % n], c[(apex + k + 1) % n]],
                cell: ci,
            });
        }
    }
    Ok(out)
}

struct EdgeUse {
    tri: usize,
    from: usize,
    to: usize,
}

/// Assigns every sub-triangle edge on a cell boundary to exactly one polygonal face.
///
/// Interior faces collect all sub-edges shared by the same pair of cells. Boundary
/// faces are maximal collinear chains of boundary sub-edges of one cell.
pub fn build_face_topology(mesh: &PolyMesh) -> Result<Vec<PolyFace>> {
    let tris = &mesh.subtriangles;
    let verts = &mesh.vertices;
    let mut edges: HashMap<(usize, usize), Vec<EdgeUse>> = HashMap::new();
    for (ti, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(EdgeUse { tri: ti, from: a, to: b });
        }
    }

    let make_sub_edge = |tri: usize, from: usize, to: usize, neighbor_triangle: Option<usize>| {
        let (p, q) = (verts[from], verts[to]);
        SubEdge {
            vertices: [from, to],
            owner_triangle: tri,
            neighbor_triangle,
            normal: outward_normal(&p, &q),
            length: (q - p).norm(),
        }
    };

    let mut faces: Vec<PolyFace> = Vec::new();
    let mut pair_face: HashMap<(usize, usize), usize> = HashMap::new();
    let mut boundary_pieces: Vec<Vec<SubEdge>> = vec![Vec::new(); mesh.cells.len()];
    let mut seen: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();

    for (ti, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                continue;
            }
            let uses = &edges[&key];
            match uses.len() {
                1 => boundary_pieces[t.cell].push(make_sub_edge(ti, a, b, None)),
                2 => {
                    let (u0, u1) = (&uses[0], &uses[1]);
                    if u0.from != u1.to || u0.to != u1.from {
                        return Err(Error::Mesh(format!(
                            "sub-triangles {} and {} traverse edge ({a}, {b}) in the same direction",
                            u0.tri, u1.tri
                        )));
                    }
                    let (c0, c1) = (tris[u0.tri].cell, tris[u1.tri].cell);
                    if c0 == c1 {
                        continue;
                    }
                    let (own, nb) = if c0 < c1 { (u0, u1) } else { (u1, u0) };
                    let owner = tris[own.tri].cell;
                    let neighbor = tris[nb.tri].cell;
                    let se = make_sub_edge(own.tri, own.from, own.to, Some(nb.tri));
                    match pair_face.get(&(owner, neighbor)) {
                        Some(&fi) => faces[fi].sub_edges.push(se),
                        None => {
                            pair_face.insert((owner, neighbor), faces.len());
                            faces.push(PolyFace {
                                sub_edges: vec![se],
                                owner,
                                neighbor: Some(neighbor),
                                unit_normal: Vector::zeros(),
                                measure: 0.0,
                            });
                        }
                    }
                }
                _ => {
                    return Err(Error::Mesh(format!(
                        "edge ({a}, {b}) is shared by {} sub-triangles",
                        uses.len()
                    )))
                }
            }
        }
    }

    check_boundary_pieces(mesh, &boundary_pieces)?;

    for (cell, pieces) in boundary_pieces.into_iter().enumerate() {
        for chain in collinear_chains(pieces) {
            faces.push(PolyFace {
                sub_edges: chain,
                owner: cell,
                neighbor: None,
                unit_normal: Vector::zeros(),
                measure: 0.0,
            });
        }
    }

    for f in faces.iter_mut() {
        f.measure = f.sub_edges.iter().map(|s| s.length).sum();
        let n: Vector = f.sub_edges.iter().map(|s| s.normal * s.length).sum();
        f.unit_normal = n.normalize();
    }
    Ok(faces)
}

/// Groups the boundary sub-edges of one cell into collinear chains, preserving encounter order.
fn collinear_chains(pieces: Vec<SubEdge>) -> Vec<Vec<SubEdge>> {
    let n = pieces.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&pieces[i], &pieces[j]);
            let joined = a.vertices[1] == b.vertices[0] || b.vertices[1] == a.vertices[0];
            if joined && (a.normal - b.normal).norm() < 1e-10 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut chains: Vec<Vec<SubEdge>> = Vec::new();
    let mut root_chain: HashMap<usize, usize> = HashMap::new();
    for (i, piece) in pieces.into_iter().enumerate() {
        let r = find(&mut parent, i);
        let idx = *root_chain.entry(r).or_insert_with(|| {
            chains.push(Vec::new());
            chains.len() - 1
        });
        chains[idx].push(piece);
    }
    chains
}

/// A boundary sub-edge whose outside lies inside another cell is a T-junction.
fn check_boundary_pieces(mesh: &PolyMesh, pieces: &[Vec<SubEdge>]) -> Result<()> {
    let n_cells = mesh.cells.len();
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &mesh.vertices {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let nb = ((n_cells as f64).sqrt().ceil() as usize).max(1);
    let (wx, wy) = ((hi.x - lo.x).max(1e-300) / nb as f64, (hi.y - lo.y).max(1e-300) / nb as f64);
    let bin = |p: &Point| {
        let i = (((p.x - lo.x) / wx) as isize).clamp(0, nb as isize - 1) as usize;
        let j = (((p.y - lo.y) / wy) as isize).clamp(0, nb as isize - 1) as usize;
        (i, j)
    };
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); nb * nb];
    for c in 0..n_cells {
        let (a, b) = mesh.cell_bounding_box(c);
        let (i0, j0) = bin(&a);
        let (i1, j1) = bin(&b);
        for i in i0..=i1 {
            for j in j0..=j1 {
                grid[j * nb + i].push(c);
            }
        }
    }
    for (cell, list) in pieces.iter().enumerate() {
        for se in list {
            let (p, q) = (mesh.vertices[se.vertices[0]], mesh.vertices[se.vertices[1]]);
            let probe = Point::from((p.coords + q.coords) * 0.5) + se.normal * (1e-6 * se.length);
            let (i, j) = bin(&probe);
            for &other in &grid[j * nb + i] {
                if other == cell {
                    continue;
                }
                let poly = mesh.cell_polygon(other);
                let h = mesh.cell_diameters[other];
                let tol = GEOMETRY_TOL * h * h;
                let inside = (0..poly.len()).all(|k| orient(&poly[k], &poly[(k + 1) % poly.len()], &probe) > tol);
                if inside {
                    return Err(Error::Mesh(format!(
                        "unmatched interior edge ({}, {}) of cell {cell} lies against cell {other} (T-junction)",
                        se.vertices[0], se.vertices[1]
                    )));
                }
            }
        }
    }
    Ok(())
}
