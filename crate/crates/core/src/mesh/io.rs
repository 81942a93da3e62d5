//! Plain-text mesh files.
//!
//! ```text
//! RFEM-MESH 1
//! VERTICES n
//! x y            (n lines)
//! CELLS m
//! k v1 ... vk    (m lines, counterclockwise)
//! GROUPS m       (optional)
//! g              (m lines)
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::PolyMesh;
use crate::geometry::Point;
use crate::{Error, Result};

const HEADER: &str = "RFEM-MESH 1";

pub fn format_mesh(mesh: &PolyMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "VERTICES {}", mesh.vertices().len());
    for p in mesh.vertices() {
        // Display for f64 prints the shortest representation that round-trips.
        let _ = writeln!(s, "{} {}", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {}", mesh.n_cells());
    for c in mesh.cells() {
        let _ = write!(s, "{}", c.len());
        for v in c {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    if let Some(groups) = mesh.groups() {
        let _ = writeln!(s, "GROUPS {}", groups.len());
        for g in groups {
            let _ = writeln!(s, "{g}");
        }
    }
    s
}

pub fn write_mesh(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<PolyMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-empty line with comments stripped, as `(line number, tokens)`.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = content.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("cannot parse '{tok}'")))
}

fn section_count(lines: &mut Lines, name: &str, last_line: usize) -> Result<(usize, usize)> {
    let (ln, toks) = lines.next_tokens().ok_or_else(|| perr(last_line, format!("missing {name} section")))?;
    if toks.len() != 2 || toks[0] != name {
        return Err(perr(ln, format!("expected '{name} <count>'")));
    }
    Ok((ln, parse_num(ln, toks[1])?))
}

pub fn parse_mesh(text: &str) -> Result<PolyMesh> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (ln, toks) = lines.next_tokens().ok_or_else(|| perr(1, "empty mesh file"))?;
    if toks.join(" ") != HEADER {
        return Err(perr(ln, format!("expected header '{HEADER}'")));
    }

    let (mut ln, nv) = section_count(&mut lines, "VERTICES", ln)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, toks) = lines.next_tokens().ok_or_else(|| perr(ln, "unexpected end of file in VERTICES"))?;
        ln = l;
        if toks.len() != 2 {
            return Err(perr(ln, "vertex line must hold two coordinates"));
        }
        vertices.push(Point::new(parse_num(ln, toks[0])?, parse_num(ln, toks[1])?));
    }

    let (l, nc) = section_count(&mut lines, "CELLS", ln)?;
    ln = l;
    if nc == 0 {
        return Err(perr(ln, "mesh has no cells"));
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (l, toks) = lines.next_tokens().ok_or_else(|| perr(ln, "unexpected end of file in CELLS"))?;
        ln = l;
        let k: usize = parse_num(ln, toks[0])?;
        if toks.len() != k + 1 {
            return Err(perr(ln, format!("cell declares {k} vertices but lists {}", toks.len() - 1)));
        }
        let mut cell = Vec::with_capacity(k);
        for t in &toks[1..] {
            let v: usize = parse_num(ln, t)?;
            if v >= nv {
                return Err(perr(ln, format!("vertex index out of range: {v}")));
            }
            cell.push(v);
        }
        cells.push(cell);
    }

    let mut groups = None;
    if let Some((l, toks)) = lines.next_tokens() {
        ln = l;
        if toks.len() != 2 || toks[0] != "GROUPS" {
            return Err(perr(ln, "expected 'GROUPS <count>' or end of file"));
        }
        let ng: usize = parse_num(ln, toks[1])?;
        if ng != nc {
            return Err(perr(ln, format!("GROUPS lists {ng} entries for {nc} cells")));
        }
        let mut g = Vec::with_capacity(ng);
        for _ in 0..ng {
            let (l, toks) = lines.next_tokens().ok_or_else(|| perr(ln, "unexpected end of file in GROUPS"))?;
            ln = l;
            if toks.len() != 1 {
                return Err(perr(ln, "group line must hold one integer"));
            }
            g.push(parse_num(ln, toks[0])?);
        }
        groups = Some(g);
        if let Some((l, _)) = lines.next_tokens() {
            return Err(perr(l, "trailing content after GROUPS"));
        }
    }
    PolyMesh::new(vertices, cells, groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::mesh::{aligned_square_mesh, generate_voronoi_mesh};

    #[test]
    fn aligned_mesh_round_trip() {
        let m = aligned_square_mesh(8, Rect::new(-1.0, -1.0, 1.0, 1.0)).unwrap();
        let groups: Vec<usize> = (0..64).map(|c| usize::from(c >= 32)).collect();
        let m = m.with_groups(Some(groups)).unwrap();
        let back = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.groups(), m.groups());
        assert_eq!(back.subtriangles().len(), 128);
    }

    #[test]
    fn voronoi_round_trip_is_exact() {
        let m = generate_voronoi_mesh(50, 11, 5, Rect::UNIT).unwrap();
        let back = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.subtriangles(), m.subtriangles());
    }

    #[test]
    fn missing_vertex_reports_line() {
        let text = "RFEM-MESH 1\nVERTICES 3\n0 0\n1 0\n0 1\nCELLS 1\n3 0 1 7\n";
        match parse_mesh(text).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("vertex index out of range"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_cell_list() {
        let text = "RFEM-MESH 1\nVERTICES 1\n0 0\nCELLS 0\n";
        let err = parse_mesh(text).unwrap_err();
        assert!(err.to_string().contains("mesh has no cells"));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# a triangle\nRFEM-MESH 1\n\nVERTICES 3 # count\n0 0\n1 0\n0 1\nCELLS 1\n3 0 1 2\n";
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.n_cells(), 1);
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "RFEM-MESH 1\nVERTICES 1\n0 abc\n";
        assert!(matches!(parse_mesh(text), Err(Error::Parse { line: 3, .. })));
    }
}
