//! Polygonal meshes obtained by merging groups of fine triangles or quadrilaterals.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{PolyMesh, SubTriangle};
use crate::geometry::{polygon_signed_area, Point, Rect};
use crate::{Error, Result};

/// A fine mesh of triangles and/or quadrilaterals.
#[derive(Debug, Clone, PartialEq)]
pub struct FineMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex loops with 3 or 4 entries.
    pub elements: Vec<Vec<usize>>,
}

/// `nx` by `ny` axis-aligned quadrilaterals covering `rect`.
pub fn structured_quad_mesh(nx: usize, ny: usize, rect: Rect) -> FineMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Pin the last row/column to the rectangle edges exactly.
        let y = if j == ny { rect.y1 } else { rect.y0 + rect.height() * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { rect.x1 } else { rect.x0 + rect.width() * i as f64 / nx as f64 };
            vertices.push(Point::new(x, y));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    FineMesh { vertices, elements }
}

/// `n x n` squares, each its own polygonal cell.
pub fn aligned_square_mesh(n: usize, rect: Rect) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::Mesh("aligned mesh needs n >= 1".into()));
    }
    let fine = structured_quad_mesh(n, n, rect);
    let partition: Vec<usize> = (0..fine.elements.len()).collect();
    agglomerate_mesh(&fine, &partition)
}

fn split_element(e: &[usize]) -> Vec<[usize; 3]> {
    match e.len() {
        3 => vec![[e[0], e[1], e[2]]],
        _ => vec![[e[0], e[1], e[2]], [e[0], e[2], e[3]]],
    }
}

/// Merges the fine elements of each group into one polygonal cell.
///
/// Cells are numbered by increasing group id. The fine elements become the
/// sub-triangulation (quadrilaterals are split along their 0-2 diagonal).
pub fn agglomerate_mesh(fine: &FineMesh, partition: &[usize]) -> Result<PolyMesh> {
    if partition.len() != fine.elements.len() {
        return Err(Error::Mesh(format!(
            "partition has {} entries for {} fine elements",
            partition.len(),
            fine.elements.len()
        )));
    }
    let mut elements = fine.elements.clone();
    for (k, e) in elements.iter_mut().enumerate() {
        if !(3..=4).contains(&e.len()) || e.iter().any(|&v| v >= fine.vertices.len()) {
            return Err(Error::Mesh(format!("fine element {k} is not a valid triangle or quadrilateral")));
        }
        let pts: Vec<Point> = e.iter().map(|&v| fine.vertices[v]).collect();
        if polygon_signed_area(&pts) < 0.0 {
            e.reverse();
        }
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &g) in partition.iter().enumerate() {
        members.entry(g).or_default().push(k);
    }

    let mut cells = Vec::with_capacity(members.len());
    let mut subtriangles = Vec::new();
    for (cell, (&group, elems)) in members.iter().enumerate() {
        cells.push(group_boundary_loop(group, elems, &elements)?);
        for &k in elems {
            for t in split_element(&elements[k]) {
                subtriangles.push(SubTriangle { vertices: t, cell });
            }
        }
    }
    PolyMesh::with_subtriangulation(fine.vertices.clone(), cells, subtriangles, None)
}

fn group_boundary_loop(group: usize, elems: &[usize], elements: &[Vec<usize>]) -> Result<Vec<usize>> {
    let err = |message: &str| Error::Agglomeration { group, message: message.to_string() };
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (local, &k) in elems.iter().enumerate() {
        let e = &elements[k];
        for i in 0..e.len() {
            if directed.insert((e[i], e[(i + 1) % e.len()]), local).is_some() {
                return Err(err("overlapping elements"));
            }
        }
    }

    // Connectivity through shared edges.
    let mut parent: Vec<usize> = (0..elems.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut boundary: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n_boundary = 0;
    for (&(a, b), &local) in &directed {
        match directed.get(&(b, a)) {
            Some(&other) => {
                let (ra, rb) = (find(&mut parent, local), find(&mut parent, other));
                parent[ra.max(rb)] = ra.min(rb);
            }
            None => {
                n_boundary += 1;
                if boundary.insert(a, b).is_some() {
                    return Err(err("group is not simply connected (pinched boundary)"));
                }
            }
        }
    }
    let roots: HashSet<usize> = (0..elems.len()).map(|i| find(&mut parent, i)).collect();
    if roots.len() != 1 {
        return Err(err("group is disconnected"));
    }

    let (&start, _) = boundary.iter().next().ok_or_else(|| err("group has no boundary"))?;
    let mut lp = vec![start];
    let mut cur = boundary[&start];
    while cur != start {
        lp.push(cur);
        cur = *boundary.get(&cur).ok_or_else(|| err("open boundary"))?;
        if lp.len() > n_boundary {
            return Err(err("boundary does not close"));
        }
    }
    if lp.len() != n_boundary {
        return Err(err("group is not simply connected (several boundary loops)"));
    }
    Ok(lp)
}
