//! Assembly of the recovered bilinear form and load vector.
//!
//! Every occurrence of `ℰ` is realised through the recovery matrix `R`:
//! forms with recovered trial and test functions are assembled on the
//! conforming space and folded as `Rᵀ K R`; forms with a DG trial and a
//! recovered test function are assembled as conforming × DG blocks and
//! folded once as `Rᵀ K`. Jump stabilisations act directly on DG dofs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::geometry::Point;
use crate::mesh::{PolyMesh, SubEdge};
use crate::problem::{classify_boundary, BoundaryKind, BoundaryLabel, PartitionRule, ProblemSpec};
use crate::quadrature::{segment_rule, triangle_rule, QuadratureRule};
use crate::recovery::{build_recovery, RecoveryOperator};
use crate::sparse::CsrMatrix;
use crate::spaces::{segment_points, sign_y_partition, triangle_points, ConformingSpace, DgSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// Nitsche constant in `σ_D = C_σ α r² / h`.
    pub c_sigma: f64,
    pub sigma_ac: f64,
    pub sigma_b1: f64,
    pub sigma_b2: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { c_sigma: 10.0, sigma_ac: 10.0, sigma_b1: 10.0, sigma_b2: 10.0 }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_sigma", self.c_sigma),
            ("sigma_ac", self.sigma_ac),
            ("sigma_b1", self.sigma_b1),
            ("sigma_b2", self.sigma_b2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Assembly(format!("penalty {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `C_σ α r² / h`.
pub fn nitsche_penalty(c_sigma: f64, alpha: f64, degree: usize, h: f64) -> f64 {
    c_sigma * alpha * (degree * degree) as f64 / h
}

/// Spaces, recovery and boundary labels for one mesh and degree.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<PolyMesh>,
    pub dg: DgSpace,
    pub conf: ConformingSpace,
    pub recovery: RecoveryOperator,
    pub labels: Vec<Option<BoundaryLabel>>,
    /// Exactness order of the volume and face rules.
    pub order: usize,
    /// Cell subdomains of a partitioned recovery.
    pub subdomains: Option<Vec<usize>>,
}

impl Discretization {
    /// `order = None` selects `2r + 4`.
    pub fn new(spec: &ProblemSpec, mesh: Arc<PolyMesh>, degree: usize, order: Option<usize>) -> Result<Self> {
        let order = order.unwrap_or(2 * degree + 4);
        if order < 2 * degree {
            return Err(Error::Assembly(format!(
                "quadrature order {order} is below 2r = {}; refusing to under-integrate",
                2 * degree
            )));
        }
        let subdomains = match spec.partition {
            PartitionRule::None => None,
            PartitionRule::SignY => Some(sign_y_partition(&mesh)?),
        };
        let dg = DgSpace::new(mesh.clone(), degree)?;
        let conf = ConformingSpace::new(mesh.clone(), degree, subdomains.clone())?;
        let recovery = build_recovery(&dg, &conf)?;
        let labels = classify_boundary(&mesh, spec, order)?;
        Ok(Discretization { mesh, dg, conf, recovery, labels, order, subdomains })
    }

    pub fn degree(&self) -> usize {
        self.dg.degree()
    }

    /// Interior face separating two subdomains of a partitioned recovery.
    pub fn is_interface(&self, face: usize) -> bool {
        let f = &self.mesh.faces()[face];
        match (&self.subdomains, f.neighbor) {
            (Some(s), Some(nb)) => s[f.owner] != s[nb],
            _ => false,
        }
    }

    /// Owner diameter on the boundary, mean of the two diameters inside.
    pub fn face_h(&self, face: usize) -> f64 {
        let f = &self.mesh.faces()[face];
        let d = self.mesh.cell_diameters();
        match f.neighbor {
            Some(nb) => 0.5 * (d[f.owner] + d[nb]),
            None => d[f.owner],
        }
    }

    pub fn volume_rule(&self) -> Result<QuadratureRule> {
        triangle_rule(self.order)
    }

    pub fn face_rule(&self) -> Result<QuadratureRule> {
        segment_rule(self.order)
    }

    pub fn sub_edge_points(&self, se: &SubEdge, rule: &QuadratureRule) -> Vec<(Point, f64)> {
        let [a, b] = se.vertices.map(|v| self.mesh.vertices()[v]);
        segment_points(&a, &b, rule)
    }

    /// Face-local `α`: largest spectral norm of `a` over the face quadrature points.
    pub fn face_alpha(&self, spec: &ProblemSpec, face: usize) -> Result<f64> {
        let rule = self.face_rule()?;
        let mut alpha = 0.0f64;
        for se in &self.mesh.faces()[face].sub_edges {
            for (p, _) in self.sub_edge_points(se, &rule) {
                alpha = alpha.max(spec.a_norm(&p));
            }
        }
        Ok(alpha)
    }

    /// `σ_D` on a Dirichlet face.
    pub fn sigma_d(&self, spec: &ProblemSpec, penalty: &PenaltyConfig, face: usize) -> Result<f64> {
        let alpha = self.face_alpha(spec, face)?;
        let s = nitsche_penalty(penalty.c_sigma, alpha, self.degree(), self.face_h(face));
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::Assembly(format!("non-positive Nitsche penalty {s} on elliptic face {face}")));
        }
        Ok(s)
    }

    fn dirichlet_faces(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.filter(|l| l.kind == BoundaryKind::Dirichlet).map(|_| i))
            .collect()
    }

    fn interior_faces(&self) -> Vec<usize> {
        (0..self.mesh.faces().len()).filter(|&f| !self.mesh.faces()[f].is_boundary()).collect()
    }
}

/// Evaluation buffers for one quadrature point.
struct Basis {
    cv: Vec<f64>,
    cg: Vec<[f64; 2]>,
    dv: Vec<f64>,
    dgr: Vec<[f64; 2]>,
}

impl Basis {
    fn new(d: &Discretization) -> Self {
        let (nc, nd) = (d.conf.local_dim(), d.dg.local_dim());
        Basis { cv: vec![0.0; nc], cg: vec![[0.0; 2]; nc], dv: vec![0.0; nd], dgr: vec![[0.0; 2]; nd] }
    }
}

fn collect(nrows: usize, ncols: usize, parts: Vec<Vec<(usize, usize, f64)>>) -> CsrMatrix {
    let entries: Vec<(usize, usize, f64)> = parts.into_iter().flatten().collect();
    CsrMatrix::from_triplets(nrows, ncols, &entries)
}

fn sum_into(n: usize, parts: Vec<Vec<(usize, f64)>>) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for part in parts {
        for (i, v) in part {
            out[i] += v;
        }
    }
    out
}

/// Volume terms. Returns the conforming × conforming block of `a∇·∇ + c`,
/// the conforming × DG block of `(b·∇_h u) ψ`, and the conforming load `∫ f ψ`.
pub fn assemble_volume(spec: &ProblemSpec, d: &Discretization) -> Result<(CsrMatrix, CsrMatrix, Vec<f64>)> {
    let rule = d.volume_rule()?;
    let mesh = &d.mesh;
    let (nc, nd) = (d.conf.local_dim(), d.dg.local_dim());
    let parts: Vec<_> = (0..mesh.subtriangles().len())
        .into_par_iter()
        .map(|ti| {
            let cell = mesh.subtriangles()[ti].cell;
            let map = d.conf.triangle_map(ti);
            let nodes = d.conf.triangle_nodes(ti);
            let mut bs = Basis::new(d);
            let mut a_loc = vec![0.0; nc * nc];
            let mut c_loc = vec![0.0; nc * nd];
            let mut f_loc = vec![0.0; nc];
            for (p, w) in triangle_points(mesh, ti, &rule) {
                d.conf.values_and_gradients(&map, &p, &mut bs.cv, &mut bs.cg);
                d.dg.values_and_gradients(cell, &p, &mut bs.dv, &mut bs.dgr);
                let a = (spec.a)(&p);
                let b = (spec.b)(&p);
                let c = (spec.c)(&p);
                let f = (spec.f)(&p);
                for j in 0..nc {
                    let (gj, vj) = (bs.cg[j], bs.cv[j]);
                    let agj = [a[(0, 0)] * gj[0] + a[(0, 1)] * gj[1], a[(1, 0)] * gj[0] + a[(1, 1)] * gj[1]];
                    for i in 0..nc {
                        let gi = bs.cg[i];
                        a_loc[j * nc + i] += w * (agj[0] * gi[0] + agj[1] * gi[1] + c * vj * bs.cv[i]);
                    }
                    for k in 0..nd {
                        let bg = b.x * bs.dgr[k][0] + b.y * bs.dgr[k][1];
                        c_loc[j * nd + k] += w * bg * vj;
                    }
                    f_loc[j] += w * f * vj;
                }
            }
            let mut ta = Vec::with_capacity(nc * nc);
            let mut tc = Vec::with_capacity(nc * nd);
            for j in 0..nc {
                for i in 0..nc {
                    ta.push((nodes[j], nodes[i], a_loc[j * nc + i]));
                }
                for k in 0..nd {
                    tc.push((nodes[j], d.dg.dof(cell, k), c_loc[j * nd + k]));
                }
            }
            let tf: Vec<(usize, f64)> = nodes.iter().zip(&f_loc).map(|(&n, &v)| (n, v)).collect();
            (ta, tc, tf)
        })
        .collect();
    let (mut pa, mut pc, mut pf) = (Vec::new(), Vec::new(), Vec::new());
    for (a, c, f) in parts {
        pa.push(a);
        pc.push(c);
        pf.push(f);
    }
    let n_nodes = d.conf.n_nodes();
    Ok((collect(n_nodes, n_nodes, pa), collect(n_nodes, d.dg.dim(), pc), sum_into(n_nodes, pf)))
}

/// Symmetric Nitsche terms on `Γ_D` (conforming × conforming) and the matching load.
pub fn assemble_nitsche_dirichlet(
    spec: &ProblemSpec,
    d: &Discretization,
    penalty: &PenaltyConfig,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let rule = d.face_rule()?;
    let nc = d.conf.local_dim();
    let faces = d.dirichlet_faces();
    let parts: Vec<Result<_>> = faces
        .par_iter()
        .map(|&fi| {
            let sigma = d.sigma_d(spec, penalty, fi)?;
            let mut bs = Basis::new(d);
            let mut tm = Vec::new();
            let mut tf = Vec::new();
            for se in &d.mesh.faces()[fi].sub_edges {
                let ti = se.owner_triangle;
                let map = d.conf.triangle_map(ti);
                let nodes = d.conf.triangle_nodes(ti);
                let n = se.normal;
                let mut m = vec![0.0; nc * nc];
                let mut r = vec![0.0; nc];
                for (p, w) in d.sub_edge_points(se, &rule) {
                    d.conf.values_and_gradients(&map, &p, &mut bs.cv, &mut bs.cg);
                    let a = (spec.a)(&p);
                    let an = [a[(0, 0)] * n.x + a[(0, 1)] * n.y, a[(1, 0)] * n.x + a[(1, 1)] * n.y];
                    let flux: Vec<f64> = bs.cg.iter().map(|g| g[0] * an[0] + g[1] * an[1]).collect();
                    let g = (spec.g_d)(&p);
                    for j in 0..nc {
                        for i in 0..nc {
                            m[j * nc + i] -= w * (flux[i] * bs.cv[j] + flux[j] * bs.cv[i] - sigma * bs.cv[i] * bs.cv[j]);
                        }
                        r[j] -= w * g * (flux[j] - sigma * bs.cv[j]);
                    }
                }
                for j in 0..nc {
                    for i in 0..nc {
                        tm.push((nodes[j], nodes[i], m[j * nc + i]));
                    }
                    tf.push((nodes[j], r[j]));
                }
            }
            Ok((tm, tf))
        })
        .collect();
    let (mut pm, mut pf) = (Vec::new(), Vec::new());
    for p in parts {
        let (m, f) = p?;
        pm.push(m);
        pf.push(f);
    }
    let n = d.conf.n_nodes();
    Ok((collect(n, n, pm), sum_into(n, pf)))
}

/// Inflow boundary and interior upwind terms (conforming test × DG trial),
/// Neumann data and inflow Dirichlet data.
///
/// On `Γ_D^−` (points of `∂Ω` with `b·n < 0`): `−(b·n) u_h ℰ(v)` and `−(b·n) g_D ℰ(v)`.
/// Inside, the two cells' inflow contributions at a point combine to
/// `−(b·n_O)(u_O − u_N) ℰ(v)`, with `ℰ(v)` traced from the downstream cell.
pub fn assemble_advection_faces(spec: &ProblemSpec, d: &Discretization) -> Result<(CsrMatrix, Vec<f64>)> {
    let rule = d.face_rule()?;
    let (nc, nd) = (d.conf.local_dim(), d.dg.local_dim());
    let faces: Vec<usize> = (0..d.mesh.faces().len()).collect();
    let parts: Vec<_> = faces
        .par_iter()
        .map(|&fi| {
            let face = &d.mesh.faces()[fi];
            let mut bs = Basis::new(d);
            let mut dv_n = vec![0.0; nd];
            let mut tm = Vec::new();
            let mut tf = Vec::new();
            match face.neighbor {
                None => {
                    let label = d.labels[fi].expect("boundary faces are labelled");
                    for se in &face.sub_edges {
                        let ti = se.owner_triangle;
                        let map = d.conf.triangle_map(ti);
                        let nodes = d.conf.triangle_nodes(ti);
                        for (p, w) in d.sub_edge_points(se, &rule) {
                            let bn = (spec.b)(&p).dot(&se.normal);
                            let neumann = label.kind == BoundaryKind::Neumann;
                            if bn >= 0.0 && !neumann {
                                continue;
                            }
                            d.conf.values_and_gradients(&map, &p, &mut bs.cv, &mut bs.cg);
                            if neumann {
                                let gn = (spec.g_n)(&p);
                                for j in 0..nc {
                                    tf.push((nodes[j], w * gn * bs.cv[j]));
                                }
                            }
                            if bn < 0.0 {
                                d.dg.values(face.owner, &p, &mut bs.dv);
                                let g = (spec.g_d)(&p);
                                for j in 0..nc {
                                    for k in 0..nd {
                                        tm.push((nodes[j], d.dg.dof(face.owner, k), -w * bn * bs.dv[k] * bs.cv[j]));
                                    }
                                    tf.push((nodes[j], -w * bn * g * bs.cv[j]));
                                }
                            }
                        }
                    }
                }
                Some(nb) => {
                    for se in &face.sub_edges {
                        let nt = se.neighbor_triangle.expect("interior sub-edge has two triangles");
                        let (map_o, map_n) = (d.conf.triangle_map(se.owner_triangle), d.conf.triangle_map(nt));
                        for (p, w) in d.sub_edge_points(se, &rule) {
                            let bn = (spec.b)(&p).dot(&se.normal);
                            if bn == 0.0 {
                                continue;
                            }
                            let (ti, map) = if bn < 0.0 { (se.owner_triangle, &map_o) } else { (nt, &map_n) };
                            let nodes = d.conf.triangle_nodes(ti);
                            d.conf.values_and_gradients(map, &p, &mut bs.cv, &mut bs.cg);
                            d.dg.values(face.owner, &p, &mut bs.dv);
                            d.dg.values(nb, &p, &mut dv_n);
                            for j in 0..nc {
                                let s = -w * bn * bs.cv[j];
                                for k in 0..nd {
                                    tm.push((nodes[j], d.dg.dof(face.owner, k), s * bs.dv[k]));
                                    tm.push((nodes[j], d.dg.dof(nb, k), -s * dv_n[k]));
                                }
                            }
                        }
                    }
                }
            }
            (tm, tf)
        })
        .collect();
    let (mut pm, mut pf) = (Vec::new(), Vec::new());
    for (m, f) in parts {
        pm.push(m);
        pf.push(f);
    }
    let n = d.conf.n_nodes();
    Ok((collect(n, d.dg.dim(), pm), sum_into(n, pf)))
}

/// `∫_{Γ_int} w(x) [u]·[v]` plus optionally `w2(x) [b·∇u]·[b·∇v]`, on DG dofs.
fn jump_form(
    spec: &ProblemSpec,
    d: &Discretization,
    weight: impl Fn(usize) -> f64 + Sync,
    streamline_weight: impl Fn(usize) -> f64 + Sync,
) -> Result<CsrMatrix> {
    let rule = d.face_rule()?;
    let nd = d.dg.local_dim();
    let faces: Vec<usize> = d.interior_faces().into_iter().filter(|&f| !d.is_interface(f)).collect();
    let parts: Vec<_> = faces
        .par_iter()
        .map(|&fi| {
            let face = &d.mesh.faces()[fi];
            let nb = face.neighbor.expect("interior face");
            let cells = [face.owner, nb];
            let (w1, w2) = (weight(fi), streamline_weight(fi));
            let mut m = vec![0.0; 4 * nd * nd];
            let mut vals = [vec![0.0; nd], vec![0.0; nd]];
            let mut grads = [vec![[0.0; 2]; nd], vec![[0.0; 2]; nd]];
            for se in &face.sub_edges {
                for (p, w) in d.sub_edge_points(se, &rule) {
                    let b = (spec.b)(&p);
                    // Jump basis: owner functions with sign +, neighbour functions with sign −.
                    let mut jv = vec![0.0; 2 * nd];
                    let mut js = vec![0.0; 2 * nd];
                    for s in 0..2 {
                        d.dg.values_and_gradients(cells[s], &p, &mut vals[s], &mut grads[s]);
                        let sign = if s == 0 { 1.0 } else { -1.0 };
                        for k in 0..nd {
                            jv[s * nd + k] = sign * vals[s][k];
                            js[s * nd + k] = sign * (b.x * grads[s][k][0] + b.y * grads[s][k][1]);
                        }
                    }
                    for a in 0..2 * nd {
                        for c in 0..2 * nd {
                            m[a * 2 * nd + c] += w * (w1 * jv[a] * jv[c] + w2 * js[a] * js[c]);
                        }
                    }
                }
            }
            let dof = |i: usize| d.dg.dof(cells[i / nd], i % nd);
            let mut t = Vec::with_capacity(4 * nd * nd);
            for a in 0..2 * nd {
                for c in 0..2 * nd {
                    if m[a * 2 * nd + c] != 0.0 {
                        t.push((dof(a), dof(c), m[a * 2 * nd + c]));
                    }
                }
            }
            t
        })
        .collect();
    let n = d.dg.dim();
    Ok(collect(n, n, parts))
}

/// `s^{a,c}(u, v) = ∫_{Γ_int} σ_ac [u]·[v]`.
pub fn assemble_stab_ac(spec: &ProblemSpec, d: &Discretization, penalty: &PenaltyConfig) -> Result<CsrMatrix> {
    jump_form(spec, d, |_| penalty.sigma_ac, |_| 0.0)
}

/// `s^b(u, v) = ∫_{Γ_int} σ_b1 [u]·[v] + σ_b2 [h b·∇u]·[h b·∇v]` with face-local `h`.
pub fn assemble_stab_b(spec: &ProblemSpec, d: &Discretization, penalty: &PenaltyConfig) -> Result<CsrMatrix> {
    jump_form(spec, d, |_| penalty.sigma_b1, |f| penalty.sigma_b2 * d.face_h(f).powi(2))
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub stab_ac: CsrMatrix,
    pub stab_b: CsrMatrix,
}

/// Parts of the system before folding with the recovery matrix.
#[derive(Debug, Clone)]
pub struct SystemBlocks {
    /// Conforming × conforming: diffusion, reaction and Nitsche.
    pub k_cc: CsrMatrix,
    /// Conforming × DG: convection, inflow boundary and upwind terms.
    pub k_cd: CsrMatrix,
    pub rhs_c: Vec<f64>,
    pub stab_ac: CsrMatrix,
    pub stab_b: CsrMatrix,
}

pub fn assemble_blocks(spec: &ProblemSpec, d: &Discretization, penalty: &PenaltyConfig) -> Result<SystemBlocks> {
    penalty.validate()?;
    let (a_cc, c_cd, mut rhs_c) = assemble_volume(spec, d)?;
    let (n_cc, n_rhs) = assemble_nitsche_dirichlet(spec, d, penalty)?;
    let (u_cd, u_rhs) = assemble_advection_faces(spec, d)?;
    for ((r, a), b) in rhs_c.iter_mut().zip(&n_rhs).zip(&u_rhs) {
        *r += a + b;
    }
    Ok(SystemBlocks {
        k_cc: a_cc.add(1.0, &n_cc, 1.0)?,
        k_cd: c_cd.add(1.0, &u_cd, 1.0)?,
        rhs_c,
        stab_ac: assemble_stab_ac(spec, d, penalty)?,
        stab_b: assemble_stab_b(spec, d, penalty)?,
    })
}

/// `B = Rᵀ(K_cc R + K_cd) + S_ac + S_b`, `ℓ = Rᵀ ℓ_c`.
pub fn assemble_system(spec: &ProblemSpec, d: &Discretization, penalty: &PenaltyConfig) -> Result<LinearSystem> {
    let blocks = assemble_blocks(spec, d, penalty)?;
    let r = d.recovery.matrix();
    let rt = r.transpose();
    let inner = blocks.k_cc.matmul(r)?.add(1.0, &blocks.k_cd, 1.0)?;
    let matrix = rt.matmul(&inner)?.add(1.0, &blocks.stab_ac, 1.0)?.add(1.0, &blocks.stab_b, 1.0)?;
    let rhs = r.matvec_transpose(&blocks.rhs_c);
    Ok(LinearSystem { matrix, rhs, stab_ac: blocks.stab_ac, stab_b: blocks.stab_b })
}
