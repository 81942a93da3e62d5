//! Error norms against exact solutions, convergence tables and VTK output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::assembly::{nitsche_penalty, Discretization, PenaltyConfig};
use crate::geometry::{Point, Vector};
use crate::problem::{BoundaryKind, ExactSolution, ProblemSpec};
use crate::spaces::triangle_points;
use crate::{Error, Result};

/// Error components. DG components measure `u − u_h`; `l2_rec`, `h1_rec`,
/// `energy` and `nitsche` measure `e = u − ℰ(u_h)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorReport {
    pub l2: f64,
    /// Broken over the polygonal cells.
    pub h1: f64,
    pub bnorm: f64,
    /// The interior-face part `(½‖√|b·n| ⌊u − u_h⌋‖²)^{1/2}` of `bnorm`.
    pub bnorm_jump: f64,
    /// `‖√h (b·∇_h(u − u_h))‖`, cell diameter `h`, `δ = 1`.
    pub streamline: f64,
    pub stab_ac: f64,
    pub stab_b: f64,
    /// `‖√σ_D e‖` on the elliptic Dirichlet boundary.
    pub nitsche: f64,
    pub l2_rec: f64,
    pub h1_rec: f64,
    /// `‖√a ∇e‖`.
    pub energy: f64,
    /// Square root of the sum of squares of energy, nitsche, bnorm,
    /// streamline, stab_ac and stab_b: the left-hand side of the a priori bound.
    pub triple: f64,
    pub h_max: f64,
    pub dofs: usize,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "h,dofs,l2,h1,bnorm,streamline,stab_ac,stab_b,nitsche,l2_rec,h1_rec,energy,triple";
    pub const NORMS: [&'static str; 11] =
        ["l2", "h1", "bnorm", "streamline", "stab_ac", "stab_b", "nitsche", "l2_rec", "h1_rec", "energy", "triple"];

    pub fn get(&self, norm: &str) -> Option<f64> {
        Some(match norm {
            "l2" => self.l2,
            "h1" => self.h1,
            "bnorm" => self.bnorm,
            "streamline" => self.streamline,
            "stab_ac" => self.stab_ac,
            "stab_b" => self.stab_b,
            "nitsche" => self.nitsche,
            "l2_rec" => self.l2_rec,
            "h1_rec" => self.h1_rec,
            "energy" => self.energy,
            "triple" => self.triple,
            _ => return None,
        })
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!("{:.12e},{}", self.h_max, self.dofs);
        for n in Self::NORMS {
            write!(s, ",{:.12e}", self.get(n).unwrap()).unwrap();
        }
        s
    }
}

/// Squared contributions, summed in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    l2: f64,
    h1: f64,
    c0: f64,
    jump: f64,
    boundary: f64,
    streamline: f64,
    stab_ac: f64,
    stab_b: f64,
    nitsche: f64,
    l2_rec: f64,
    h1_rec: f64,
    energy: f64,
}

impl Sums {
    fn add(mut self, o: &Sums) -> Sums {
        self.l2 += o.l2;
        self.h1 += o.h1;
        self.c0 += o.c0;
        self.jump += o.jump;
        self.boundary += o.boundary;
        self.streamline += o.streamline;
        self.stab_ac += o.stab_ac;
        self.stab_b += o.stab_b;
        self.nitsche += o.nitsche;
        self.l2_rec += o.l2_rec;
        self.h1_rec += o.h1_rec;
        self.energy += o.energy;
        self
    }
}

/// Value and gradient of the DG function on `cell` at `p`.
fn dg_eval(d: &Discretization, u_h: &[f64], cell: usize, p: &Point, vals: &mut [f64], grads: &mut [[f64; 2]]) -> (f64, Vector) {
    d.dg.values_and_gradients(cell, p, vals, grads);
    let coeffs = &u_h[d.dg.cell_dofs(cell)];
    let (mut v, mut g) = (0.0, Vector::zeros());
    for k in 0..coeffs.len() {
        v += coeffs[k] * vals[k];
        g += Vector::new(grads[k][0], grads[k][1]) * coeffs[k];
    }
    (v, g)
}

fn centroid(d: &Discretization, cell: usize) -> Point {
    let poly = d.mesh.cell_polygon(cell);
    let s = poly.iter().fold(Vector::zeros(), |acc, p| acc + p.coords);
    Point::from(s / poly.len() as f64)
}

/// Trace of the exact solution from inside `cell`: the point is pulled a
/// relative `1e-12` towards the centroid, so that solutions with a jump
/// along a face are evaluated on the correct side.
fn exact_trace(ex: &ExactSolution, d: &Discretization, cell: usize, p: &Point) -> (f64, Vector) {
    let c = centroid(d, cell);
    let q = p + (c - p) * 1e-12;
    ((ex.u)(&q), (ex.grad)(&q))
}

/// Error components of `u_h` (DG coefficients) against the exact solution of `spec`.
pub fn compute_errors(spec: &ProblemSpec, d: &Discretization, penalty: &PenaltyConfig, u_h: &[f64]) -> Result<ErrorReport> {
    let ex = spec
        .exact
        .as_ref()
        .ok_or_else(|| Error::Analysis(format!("problem '{}' has no exact solution", spec.name)))?;
    if u_h.len() != d.dg.dim() {
        return Err(Error::Analysis(format!("solution has {} entries, space has {}", u_h.len(), d.dg.dim())));
    }
    let mesh = &d.mesh;
    let rec = d.recovery.apply(u_h);
    let vrule = d.volume_rule()?;
    let frule = d.face_rule()?;
    let (nc, nd) = (d.conf.local_dim(), d.dg.local_dim());
    let diam = mesh.cell_diameters();

    let volume: Vec<Sums> = (0..mesh.subtriangles().len())
        .into_par_iter()
        .map(|ti| {
            let cell = mesh.subtriangles()[ti].cell;
            let map = d.conf.triangle_map(ti);
            let nodes = d.conf.triangle_nodes(ti);
            let (mut dv, mut dg) = (vec![0.0; nd], vec![[0.0; 2]; nd]);
            let (mut cv, mut cg) = (vec![0.0; nc], vec![[0.0; 2]; nc]);
            let mut s = Sums::default();
            for (p, w) in triangle_points(mesh, ti, &vrule) {
                let (u, gu) = ((ex.u)(&p), (ex.grad)(&p));
                let (uh, guh) = dg_eval(d, u_h, cell, &p, &mut dv, &mut dg);
                d.conf.values_and_gradients(&map, &p, &mut cv, &mut cg);
                let (mut ur, mut gur) = (0.0, Vector::zeros());
                for j in 0..nc {
                    ur += rec[nodes[j]] * cv[j];
                    gur += Vector::new(cg[j][0], cg[j][1]) * rec[nodes[j]];
                }
                let (e, ge) = (u - uh, gu - guh);
                let (er, ger) = (u - ur, gu - gur);
                let b = (spec.b)(&p);
                let a = (spec.a)(&p);
                s.l2 += w * e * e;
                s.h1 += w * ge.norm_squared();
                s.c0 += w * spec.c0(&p) * e * e;
                s.streamline += w * diam[cell] * b.dot(&ge).powi(2);
                s.l2_rec += w * er * er;
                s.h1_rec += w * ger.norm_squared();
                s.energy += w * ger.dot(&(a * ger));
            }
            s
        })
        .collect();

    let faces: Vec<Result<Sums>> = (0..mesh.faces().len())
        .into_par_iter()
        .map(|fi| {
            let face = &mesh.faces()[fi];
            let (mut dv, mut dg) = (vec![0.0; nd], vec![[0.0; 2]; nd]);
            let mut s = Sums::default();
            match face.neighbor {
                Some(nb) => {
                    let interface = d.is_interface(fi);
                    let hf = d.face_h(fi);
                    for se in &face.sub_edges {
                        for (p, w) in d.sub_edge_points(se, &frule) {
                            let b = (spec.b)(&p);
                            let (uo, guo) = exact_trace(ex, d, face.owner, &p);
                            let (un, gun) = exact_trace(ex, d, nb, &p);
                            let (vo, gvo) = dg_eval(d, u_h, face.owner, &p, &mut dv, &mut dg);
                            let (vn, gvn) = dg_eval(d, u_h, nb, &p, &mut dv, &mut dg);
                            let jump = (uo - vo) - (un - vn);
                            s.jump += w * b.dot(&se.normal).abs() * jump * jump;
                            if !interface {
                                let sjump = b.dot(&(guo - gvo)) - b.dot(&(gun - gvn));
                                s.stab_ac += w * penalty.sigma_ac * jump * jump;
                                s.stab_b += w * (penalty.sigma_b1 * jump * jump + penalty.sigma_b2 * hf * hf * sjump * sjump);
                            }
                        }
                    }
                }
                None => {
                    let label = d.labels[fi].expect("boundary faces are labelled");
                    let sigma = if label.kind == BoundaryKind::Dirichlet { Some(d.sigma_d(spec, penalty, fi)?) } else { None };
                    let outflow_part = matches!(label.kind, BoundaryKind::Neumann | BoundaryKind::Outflow);
                    for se in &face.sub_edges {
                        let ti = se.owner_triangle;
                        for (p, w) in d.sub_edge_points(se, &frule) {
                            let (u, _) = exact_trace(ex, d, face.owner, &p);
                            let (v, _) = dg_eval(d, u_h, face.owner, &p, &mut dv, &mut dg);
                            let bn = (spec.b)(&p).dot(&se.normal);
                            if bn < 0.0 || (bn > 0.0 && outflow_part) {
                                s.boundary += w * bn.abs() * (u - v).powi(2);
                            }
                            if let Some(sigma) = sigma {
                                let er = u - d.conf.evaluate(&rec, ti, &p);
                                s.nitsche += w * sigma * er * er;
                            }
                        }
                    }
                }
            }
            Ok(s)
        })
        .collect();

    let mut s = volume.iter().fold(Sums::default(), |acc, x| acc.add(x));
    for f in faces {
        s = s.add(&f?);
    }
    let bnorm2 = s.c0 + 0.5 * (s.jump + s.boundary);
    let triple2 = s.energy + s.nitsche + bnorm2 + s.streamline + s.stab_ac + s.stab_b;
    Ok(ErrorReport {
        l2: s.l2.sqrt(),
        h1: s.h1.sqrt(),
        bnorm: bnorm2.max(0.0).sqrt(),
        bnorm_jump: (0.5 * s.jump).sqrt(),
        streamline: s.streamline.sqrt(),
        stab_ac: s.stab_ac.sqrt(),
        stab_b: s.stab_b.sqrt(),
        nitsche: s.nitsche.sqrt(),
        l2_rec: s.l2_rec.sqrt(),
        h1_rec: s.h1_rec.sqrt(),
        energy: s.energy.max(0.0).sqrt(),
        triple: triple2.max(0.0).sqrt(),
        h_max: diam.iter().cloned().fold(0.0, f64::max),
        dofs: d.dg.dim(),
    })
}

/// Per-cell `λ_T = min{β_T⁻¹, σ̃_D,T⁻¹} h_T` with `β_T = max|b|` and
/// `σ̃_D,T = C_σ α_T r² / h_T` over the cell's quadrature points. Diagnostic only.
pub fn lambda_parameter(spec: &ProblemSpec, d: &Discretization, penalty: &PenaltyConfig) -> Result<Vec<f64>> {
    let rule = d.volume_rule()?;
    let mesh = &d.mesh;
    let diam = mesh.cell_diameters();
    let out: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let (mut beta, mut alpha) = (0.0f64, 0.0f64);
            for ti in mesh.cell_triangles(cell) {
                for (p, _) in triangle_points(mesh, ti, &rule) {
                    beta = beta.max((spec.b)(&p).norm());
                    alpha = alpha.max(spec.a_norm(&p));
                }
            }
            let sigma = nitsche_penalty(penalty.c_sigma, alpha, d.degree(), diam[cell]);
            let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
            inv(beta).min(inv(sigma)) * diam[cell]
        })
        .collect();
    let (lo, hi) = out.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    log::debug!("lambda per cell in [{lo:.3e}, {hi:.3e}]");
    Ok(out)
}

/// Extremes of `u_h` and `ℰ(u_h)` over the volume quadrature points:
/// `((min u_h, max u_h), (min ℰu_h, max ℰu_h))`.
pub fn solution_range(d: &Discretization, u_h: &[f64]) -> Result<((f64, f64), (f64, f64))> {
    let rule = d.volume_rule()?;
    let rec = d.recovery.apply(u_h);
    let mesh = &d.mesh;
    let parts: Vec<[f64; 4]> = (0..mesh.subtriangles().len())
        .into_par_iter()
        .map(|ti| {
            let cell = mesh.subtriangles()[ti].cell;
            let mut m = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
            for (p, _) in triangle_points(mesh, ti, &rule) {
                let v = d.dg.evaluate(u_h, cell, &p);
                let r = d.conf.evaluate(&rec, ti, &p);
                m = [m[0].min(v), m[1].max(v), m[2].min(r), m[3].max(r)];
            }
            m
        })
        .collect();
    let m = parts.iter().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |a, m| {
        [a[0].min(m[0]), a[1].max(m[1]), a[2].min(m[2]), a[3].max(m[3])]
    });
    Ok(((m[0], m[1]), (m[2], m[3])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Value(f64),
    /// One of the two errors is exactly zero.
    Exact,
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Value(v) => write!(f, "{v:.2}"),
            Rate::Exact => write!(f, "EXACT"),
        }
    }
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn rate(e: (f64, f64), h: (f64, f64)) -> Rate {
    if e.0 == 0.0 || e.1 == 0.0 {
        Rate::Exact
    } else {
        Rate::Value((e.0 / e.1).ln() / (h.0 / h.1).ln())
    }
}

/// Convergence table. Rates use the effective mesh size `dofs^{-1/2}`,
/// which is smoother than `h_max` over independently generated meshes.
#[derive(Debug, Clone, Default)]
pub struct EocTable {
    pub rows: Vec<ErrorReport>,
}

impl EocTable {
    pub fn new(mut rows: Vec<ErrorReport>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Analysis("convergence table needs at least one row".into()));
        }
        rows.sort_by_key(|r| r.dofs);
        Ok(EocTable { rows })
    }

    fn h_eff(r: &ErrorReport) -> f64 {
        (r.dofs as f64).powf(-0.5)
    }

    /// Rates between consecutive rows for one norm.
    pub fn rates(&self, norm: &str) -> Result<Vec<Rate>> {
        if ErrorReport::NORMS.iter().all(|n| *n != norm) {
            return Err(Error::Analysis(format!("unknown norm '{norm}'")));
        }
        Ok(self
            .rows
            .windows(2)
            .map(|w| {
                let e = (w[0].get(norm).unwrap(), w[1].get(norm).unwrap());
                rate(e, (Self::h_eff(&w[0]), Self::h_eff(&w[1])))
            })
            .collect())
    }

    /// Rate of the last segment, if there are at least two rows.
    pub fn final_rate(&self, norm: &str) -> Result<Option<Rate>> {
        Ok(self.rates(norm)?.last().copied())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(ErrorReport::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Console table of errors with rates of the preceding segment.
    pub fn render(&self, norms: &[&str]) -> String {
        let mut s = format!("{:>10} {:>8}", "h_max", "dofs");
        for n in norms {
            write!(s, " {n:>11} {:>6}", "rate").unwrap();
        }
        s.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            write!(s, "{:>10.4e} {:>8}", r.h_max, r.dofs).unwrap();
            for n in norms {
                let e = r.get(n).unwrap_or(f64::NAN);
                let rt = if i == 0 {
                    "-".to_string()
                } else {
                    self.rates(n).map(|v| v[i - 1].to_string()).unwrap_or_default()
                };
                write!(s, " {e:>11.4e} {rt:>6}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Legacy ASCII VTK over the sub-triangles. Points are duplicated per
/// triangle corner so that `u_h` can be discontinuous; `recovered` is `ℰ(u_h)`.
pub fn export_vtk(d: &Discretization, u_h: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mesh = &d.mesh;
    let rec = d.recovery.apply(u_h);
    let nt = mesh.subtriangles().len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nR-FEM solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", 3 * nt).unwrap();
    let mut uv = Vec::with_capacity(3 * nt);
    let mut rv = Vec::with_capacity(3 * nt);
    for ti in 0..nt {
        let cell = mesh.subtriangles()[ti].cell;
        for p in mesh.triangle_points(ti) {
            writeln!(s, "{:.16e} {:.16e} 0", p.x, p.y).unwrap();
            uv.push(d.dg.evaluate(u_h, cell, &p));
            rv.push(d.conf.evaluate(&rec, ti, &p));
        }
    }
    writeln!(s, "CELLS {} {}", nt, 4 * nt).unwrap();
    for ti in 0..nt {
        writeln!(s, "3 {} {} {}", 3 * ti, 3 * ti + 1, 3 * ti + 2).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    writeln!(s, "CELL_DATA {nt}\nSCALARS cell int 1\nLOOKUP_TABLE default").unwrap();
    for ti in 0..nt {
        writeln!(s, "{}", mesh.subtriangles()[ti].cell).unwrap();
    }
    writeln!(s, "POINT_DATA {}", 3 * nt).unwrap();
    for (name, vals) in [("u_h", &uv), ("recovered", &rv)] {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for v in vals.iter() {
            writeln!(s, "{v:.16e}").unwrap();
        }
    }
    let mut f = std::fs::File::create(path.as_ref())?;
    f.write_all(s.as_bytes())?;
    Ok(())
}
