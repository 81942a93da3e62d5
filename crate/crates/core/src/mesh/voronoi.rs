//! Lloyd-relaxed Voronoi meshes clipped to a rectangle.
//!
//! Every cell is obtained by clipping the domain rectangle against the bisector
//! half-planes of nearby generators, found through a uniform bucket grid. The
//! cells are then stitched into a shared vertex list, very short Voronoi edges
//! are collapsed (they would produce needle sub-triangles), and each cell's
//! vertex loop is rotated so that its fan triangulation from vertex 0 has the
//! best minimum triangle quality.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PolyMesh;
use crate::geometry::{diameter, orient, polygon_centroid, polygon_signed_area, Point, Rect};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiOptions {
    pub n_cells: usize,
    pub seed: u64,
    pub lloyd_iterations: usize,
    pub domain: Rect,
    /// Edges shorter than this fraction of `sqrt(|domain| / n_cells)` are collapsed.
    pub collapse_ratio: f64,
}

impl VoronoiOptions {
    pub fn new(n_cells: usize, seed: u64, lloyd_iterations: usize, domain: Rect) -> Self {
        VoronoiOptions { n_cells, seed, lloyd_iterations, domain, collapse_ratio: 0.1 }
    }
}

/// Generates `n_cells` Lloyd-relaxed Voronoi cells clipped to `domain`.
pub fn generate_voronoi_mesh(n_cells: usize, seed: u64, lloyd_iterations: usize, domain: Rect) -> Result<PolyMesh> {
    generate_with_options(&VoronoiOptions::new(n_cells, seed, lloyd_iterations, domain))
}

pub fn generate_with_options(opts: &VoronoiOptions) -> Result<PolyMesh> {
    if opts.n_cells == 0 {
        return Err(Error::Mesh("n_cells must be at least 1".into()));
    }
    if opts.domain.is_degenerate() {
        return Err(Error::Mesh("degenerate domain rectangle".into()));
    }
    let d = opts.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut gens: Vec<Point> = (0..opts.n_cells)
        .map(|_| Point::new(d.x0 + d.width() * rng.gen::<f64>(), d.y0 + d.height() * rng.gen::<f64>()))
        .collect();
    for _ in 0..opts.lloyd_iterations {
        let cells = voronoi_cells(&gens, d)?;
        gens = cells.iter().map(|c| polygon_centroid(c)).collect();
    }
    mesh_from_generators_with(&gens, d, opts.collapse_ratio)
}

/// Voronoi mesh of explicitly given generators (no relaxation).
pub fn mesh_from_generators(generators: &[Point], domain: Rect) -> Result<PolyMesh> {
    mesh_from_generators_with(generators, domain, 0.1)
}

fn mesh_from_generators_with(generators: &[Point], domain: Rect, collapse_ratio: f64) -> Result<PolyMesh> {
    let polys = voronoi_cells(generators, domain)?;
    let diam = domain.diameter();
    let (mut verts, mut loops) = stitch(&polys, 1e-9 * diam);
    let threshold = collapse_ratio * (domain.area() / generators.len() as f64).sqrt();
    collapse_short_edges(&mut verts, &mut loops, domain, threshold);
    let (verts, mut loops) = compact(&verts, &loops);
    for l in loops.iter_mut() {
        rotate_to_best_apex(&verts, l);
    }
    PolyMesh::new(verts, loops, None)
}

/// Clipped Voronoi polygon (counterclockwise) of every generator.
pub fn voronoi_cells(generators: &[Point], domain: Rect) -> Result<Vec<Vec<Point>>> {
    let n = generators.len();
    if n == 0 {
        return Err(Error::Mesh("no generators".into()));
    }
    let diam = domain.diameter();
    let nb = ((n as f64).sqrt().ceil() as usize).max(1);
    let (wx, wy) = (domain.width() / nb as f64, domain.height() / nb as f64);
    let bin_of = |p: &Point| {
        let i = (((p.x - domain.x0) / wx).floor() as isize).clamp(0, nb as isize - 1);
        let j = (((p.y - domain.y0) / wy).floor() as isize).clamp(0, nb as isize - 1);
        (i, j)
    };
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); nb * nb];
    for (k, g) in generators.iter().enumerate() {
        if !domain.contains(g, 0.0) {
            return Err(Error::Mesh(format!("generator {k} lies outside the domain")));
        }
        let (i, j) = bin_of(g);
        grid[j as usize * nb + i as usize].push(k);
    }
    let w = wx.min(wy);

    let mut out = Vec::with_capacity(n);
    for (gi, g) in generators.iter().enumerate() {
        let mut poly: Vec<Point> = domain.corners().to_vec();
        let (bi, bj) = bin_of(g);
        let mut ring = 0isize;
        loop {
            let reach = poly.iter().map(|p| (p - g).norm()).fold(0.0, f64::max);
            if ring as f64 - 1.0 > 0.0 && (ring as f64 - 1.0) * w > 2.0 * reach {
                break;
            }
            if ring > nb as isize {
                break;
            }
            for j in bj - ring..=bj + ring {
                for i in bi - ring..=bi + ring {
                    if (i - bi).abs() != ring && (j - bj).abs() != ring {
                        continue;
                    }
                    if i < 0 || j < 0 || i >= nb as isize || j >= nb as isize {
                        continue;
                    }
                    for &gj in &grid[j as usize * nb + i as usize] {
                        if gj == gi {
                            continue;
                        }
                        let other = generators[gj];
                        if (other - g).norm() < 1e-12 * diam {
                            return Err(Error::Mesh(format!(
                                "degenerate generator configuration: generators {gi} and {gj} coincide"
                            )));
                        }
                        poly = clip_bisector(&poly, g, &other);
                    }
                }
            }
            ring += 1;
        }
        if poly.len() < 3 {
            return Err(Error::Mesh(format!("Voronoi cell {gi} is empty")));
        }
        out.push(poly);
    }
    Ok(out)
}

/// Keeps the part of `poly` closer to `g` than to `other`.
fn clip_bisector(poly: &[Point], g: &Point, other: &Point) -> Vec<Point> {
    let d = other - g;
    let m = Point::from((g.coords + other.coords) * 0.5);
    let side = |p: &Point| (p - m).dot(&d);
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        let p = poly[k];
        let q = poly[(k + 1) % n];
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Merges coincident polygon corners into a shared vertex list.
fn stitch(polys: &[Vec<Point>], tol: f64) -> (Vec<Point>, Vec<Vec<usize>>) {
    let cell = 8.0 * tol;
    let key = |p: &Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut verts: Vec<Point> = Vec::new();
    let mut loops = Vec::with_capacity(polys.len());
    for poly in polys {
        let mut l: Vec<usize> = Vec::with_capacity(poly.len());
        for p in poly {
            let (ki, kj) = key(p);
            let mut found = None;
            'search: for dj in -1..=1 {
                for di in -1..=1 {
                    if let Some(list) = buckets.get(&(ki + di, kj + dj)) {
                        for &v in list {
                            if (verts[v] - p).norm() <= tol {
                                found = Some(v);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let v = found.unwrap_or_else(|| {
                verts.push(*p);
                buckets.entry((ki, kj)).or_default().push(verts.len() - 1);
                verts.len() - 1
            });
            if l.last() != Some(&v) {
                l.push(v);
            }
        }
        while l.len() > 1 && l.first() == l.last() {
            l.pop();
        }
        loops.push(l);
    }
    (verts, loops)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Placement {
    Corner,
    Side(u8),
    Interior,
}

fn placement(p: &Point, d: &Rect, tol: f64) -> Placement {
    let on = [
        (p.y - d.y0).abs() <= tol,
        (p.x - d.x1).abs() <= tol,
        (p.y - d.y1).abs() <= tol,
        (p.x - d.x0).abs() <= tol,
    ];
    match on.iter().filter(|&&b| b).count() {
        0 => Placement::Interior,
        1 => Placement::Side(on.iter().position(|&b| b).unwrap() as u8),
        _ => Placement::Corner,
    }
}

fn loop_is_valid(verts: &[Point], l: &[usize], moved: usize, pos: &Point) -> bool {
    if l.len() < 3 {
        return false;
    }
    let pts: Vec<Point> = l.iter().map(|&v| if v == moved { *pos } else { verts[v] }).collect();
    let h = diameter(&pts);
    let tol = 1e-10 * h * h;
    let n = pts.len();
    polygon_signed_area(&pts) > 0.0
        && (0..n).all(|i| orient(&pts[(i + n - 1) % n], &pts[i], &pts[(i + 1) % n]) > -tol)
}

fn collapse_short_edges(verts: &mut [Point], loops: &mut [Vec<usize>], domain: Rect, threshold: f64) {
    let tol = 1e-9 * domain.diameter();
    let mut vertex_cells: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for (c, l) in loops.iter().enumerate() {
        for &v in l {
            vertex_cells[v].push(c);
        }
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for l in loops.iter() {
        for k in 0..l.len() {
            let (a, b) = (l[k], l[(k + 1) % l.len()]);
            let len = (verts[a] - verts[b]).norm();
            if a < b && len < threshold {
                candidates.push((len, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.dedup();

    let mut removed = vec![false; verts.len()];
    for (_, a, b) in candidates {
        if removed[a] || removed[b] {
            continue;
        }
        let (pa, pb) = (placement(&verts[a], &domain, tol), placement(&verts[b], &domain, tol));
        let (keep, drop, target) = match (pa, pb) {
            (Placement::Corner, Placement::Corner) => continue,
            (Placement::Corner, _) => (a, b, verts[a]),
            (_, Placement::Corner) => (b, a, verts[b]),
            (Placement::Side(s), Placement::Side(t)) if s == t => {
                (a, b, Point::from((verts[a].coords + verts[b].coords) * 0.5))
            }
            (Placement::Side(_), Placement::Side(_)) => continue,
            (Placement::Side(_), Placement::Interior) => (a, b, verts[a]),
            (Placement::Interior, Placement::Side(_)) => (b, a, verts[b]),
            (Placement::Interior, Placement::Interior) => {
                (a, b, Point::from((verts[a].coords + verts[b].coords) * 0.5))
            }
        };
        let mut affected: Vec<usize> = vertex_cells[keep].iter().chain(&vertex_cells[drop]).copied().collect();
        affected.sort_unstable();
        affected.dedup();
        let mut updated = Vec::with_capacity(affected.len());
        let mut ok = true;
        for &c in &affected {
            let mut l: Vec<usize> = Vec::with_capacity(loops[c].len());
            for &v in &loops[c] {
                let v = if v == drop { keep } else { v };
                if l.last() != Some(&v) {
                    l.push(v);
                }
            }
            while l.len() > 1 && l.first() == l.last() {
                l.pop();
            }
            if !loop_is_valid(verts, &l, keep, &target) {
                ok = false;
                break;
            }
            updated.push((c, l));
        }
        if !ok {
            continue;
        }
        verts[keep] = target;
        for (c, l) in updated {
            loops[c] = l;
        }
        let moved = std::mem::take(&mut vertex_cells[drop]);
        vertex_cells[keep].extend(moved);
        vertex_cells[keep].sort_unstable();
        vertex_cells[keep].dedup();
        removed[drop] = true;
    }
}

/// Drops unreferenced vertices, numbering the rest by first appearance.
fn compact(verts: &[Point], loops: &[Vec<usize>]) -> (Vec<Point>, Vec<Vec<usize>>) {
    let mut map = vec![usize::MAX; verts.len()];
    let mut out = Vec::new();
    let loops = loops
        .iter()
        .map(|l| {
            l.iter()
                .map(|&v| {
                    if map[v] == usize::MAX {
                        map[v] = out.len();
                        out.push(verts[v]);
                    }
                    map[v]
                })
                .collect()
        })
        .collect();
    (out, loops)
}

/// Shape quality of a triangle in `[0, 1]`, 1 for equilateral.
fn triangle_quality(a: &Point, b: &Point, c: &Point) -> f64 {
    let s = (b - a).norm_squared() + (c - b).norm_squared() + (a - c).norm_squared();
    if s == 0.0 {
        return 0.0;
    }
    2.0 * 3f64.sqrt() * orient(a, b, c) / s
}

fn rotate_to_best_apex(verts: &[Point], l: &mut Vec<usize>) {
    let n = l.len();
    let mut best = (f64::NEG_INFINITY, 0);
    for a in 0..n {
        let q = (1..n - 1)
            .map(|k| triangle_quality(&verts[l[a]], &verts[l[(a + k) % n]], &verts[l[(a + k + 1) % n]]))
            .fold(f64::INFINITY, f64::min);
        if q > best.0 {
            best = (q, a);
        }
    }
    l.rotate_left(best.1);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_generator_is_the_domain() {
        let m = generate_voronoi_mesh(1, 7, 0, Rect::UNIT).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.cells()[0].len(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lattice_generators_give_squares() {
        let g = [
            Point::new(0.25, 0.25),
            Point::new(0.75, 0.25),
            Point::new(0.25, 0.75),
            Point::new(0.75, 0.75),
        ];
        let m = mesh_from_generators(&g, Rect::UNIT).unwrap();
        assert_eq!(m.n_cells(), 4);
        for c in 0..4 {
            assert_eq!(m.cells()[c].len(), 4);
            assert!((m.cell_areas()[c] - 0.25).abs() < 1e-15);
            assert!((m.cell_diameters()[c] - 2f64.sqrt() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn coincident_generators_are_rejected() {
        let g = [Point::new(0.5, 0.5), Point::new(0.5, 0.5)];
        assert!(voronoi_cells(&g, Rect::UNIT).is_err());
    }

    #[test]
    fn zero_cells_is_an_error() {
        assert!(generate_voronoi_mesh(0, 1, 0, Rect::UNIT).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_voronoi_mesh(64, 3, 10, Rect::UNIT).unwrap();
        let b = generate_voronoi_mesh(64, 3, 10, Rect::UNIT).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.cells(), b.cells());
    }
}
