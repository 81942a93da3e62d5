use super::{ProblemSpec, VectorField};
use crate::geometry::{Point, Vector};
use crate::mesh::{PolyFace, PolyMesh};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::spaces::{cell_points, segment_points};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Elliptic part (`nᵀan > 0`) with Dirichlet data.
    Dirichlet,
    /// Elliptic part with Neumann data.
    Neumann,
    /// Hyperbolic part with `b·n < 0`.
    Inflow,
    /// Hyperbolic part with `b·n >= 0`.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryLabel {
    pub kind: BoundaryKind,
    /// The face meets `{b·n < 0}`, i.e. lies (at least partly) in `Γ_D^−`.
    pub inflow: bool,
}

/// Direction of `b` across an interior face, seen from the owner cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceFlow {
    /// `b·n_owner < 0`: the face is inflow for the owner and outflow for the neighbour.
    OwnerInflow,
    OwnerOutflow,
    Characteristic,
}

fn face_points(mesh: &PolyMesh, face: &PolyFace, order: usize) -> Result<Vec<(Point, Vector)>> {
    let rule = segment_rule(order)?;
    let mut out = Vec::new();
    for se in &face.sub_edges {
        let [a, b] = se.vertices.map(|v| mesh.vertices()[v]);
        out.extend(segment_points(&a, &b, &rule).into_iter().map(|(p, _)| (p, se.normal)));
    }
    Ok(out)
}

/// `1e-10·(sup|b| + 1)`, with the supremum sampled at volume and boundary quadrature points.
pub fn flow_tolerance(mesh: &PolyMesh, b: &VectorField, order: usize) -> Result<f64> {
    let rule = triangle_rule(order)?;
    let mut sup = 0.0f64;
    for cell in 0..mesh.n_cells() {
        for (p, _) in cell_points(mesh, cell, &rule) {
            sup = sup.max(b(&p).norm());
        }
    }
    for f in mesh.faces().iter().filter(|f| f.is_boundary()) {
        for (p, _) in face_points(mesh, f, order)? {
            sup = sup.max(b(&p).norm());
        }
    }
    Ok(1e-10 * (sup + 1.0))
}

fn sign_class(values: &[f64], tol: f64) -> Option<i8> {
    let neg = values.iter().any(|&v| v < -tol);
    let pos = values.iter().any(|&v| v > tol);
    match (neg, pos) {
        (true, true) => None,
        (true, false) => Some(-1),
        (false, true) => Some(1),
        (false, false) => Some(0),
    }
}

/// Labels every boundary face (`None` for interior faces).
///
/// A face is elliptic when `nᵀan > tol_a` at all its quadrature points and
/// hyperbolic when it holds at none; anything else is an error, as is a
/// hyperbolic face on which `b·n` changes sign.
pub fn classify_boundary(mesh: &PolyMesh, spec: &ProblemSpec, order: usize) -> Result<Vec<Option<BoundaryLabel>>> {
    let tol_b = flow_tolerance(mesh, &spec.b, order)?;
    let mut labels = vec![None; mesh.faces().len()];
    let mut any_elliptic = false;
    let mut any_dirichlet = false;
    for (fi, face) in mesh.faces().iter().enumerate() {
        if !face.is_boundary() {
            continue;
        }
        let pts = face_points(mesh, face, order)?;
        let mut n_elliptic = 0;
        let mut flux = Vec::with_capacity(pts.len());
        for (p, n) in &pts {
            let a = (spec.a)(p);
            let ana = n.dot(&(a * n));
            if ana > 1e-12 * (super::spectral_norm(&a) + 1.0) {
                n_elliptic += 1;
            }
            flux.push((spec.b)(p).dot(n));
        }
        let inflow = flux.iter().any(|&v| v < -tol_b);
        let kind = if n_elliptic == pts.len() {
            any_elliptic = true;
            let mid = &pts[pts.len() / 2];
            if spec.neumann.as_ref().is_some_and(|is_n| is_n(&mid.0, &mid.1)) {
                BoundaryKind::Neumann
            } else {
                any_dirichlet = true;
                BoundaryKind::Dirichlet
            }
        } else if n_elliptic == 0 {
            match sign_class(&flux, tol_b) {
                None => {
                    return Err(Error::MixedFace {
                        face: fi,
                        message: "b·n changes sign along a hyperbolic boundary face; refine or align the mesh".into(),
                    })
                }
                Some(-1) => BoundaryKind::Inflow,
                Some(_) => BoundaryKind::Outflow,
            }
        } else {
            return Err(Error::MixedFace {
                face: fi,
                message: "boundary face is partly elliptic and partly hyperbolic; align the mesh".into(),
            });
        };
        labels[fi] = Some(BoundaryLabel { kind, inflow });
    }
    if any_elliptic && !any_dirichlet {
        return Err(Error::Problem("the elliptic boundary has no Dirichlet part".into()));
    }
    Ok(labels)
}

/// Flow direction across every interior face (`None` for boundary faces).
pub fn classify_element_faces_flow(mesh: &PolyMesh, b: &VectorField, order: usize) -> Result<Vec<Option<FaceFlow>>> {
    let tol_b = flow_tolerance(mesh, b, order)?;
    let mut out = vec![None; mesh.faces().len()];
    for (fi, face) in mesh.faces().iter().enumerate() {
        if face.is_boundary() {
            continue;
        }
        let flux: Vec<f64> = face_points(mesh, face, order)?.iter().map(|(p, n)| b(p).dot(n)).collect();
        out[fi] = Some(match sign_class(&flux, tol_b) {
            None => {
                return Err(Error::MixedFace { face: fi, message: "b·n changes sign along an interior face".into() })
            }
            Some(-1) => FaceFlow::OwnerInflow,
            Some(1) => FaceFlow::OwnerOutflow,
            Some(_) => FaceFlow::Characteristic,
        });
    }
    Ok(out)
}
