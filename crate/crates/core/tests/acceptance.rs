//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then asserts.
//! Tests share a lock so that the wall-clock budgets are measured one at a time.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfem_core::analysis::{solution_range, EocTable, Rate};
use rfem_core::assembly::{assemble_stab_ac, assemble_stab_b, assemble_system, Discretization, PenaltyConfig};
use rfem_core::geometry::{Point, Rect, Vector};
use rfem_core::mesh::{aligned_square_mesh, generate_voronoi_mesh, PolyMesh};
use rfem_core::pipeline::{run_study, solve_problem, MeshSource, RunOptions};
use rfem_core::problem::{builtin_example, ExactSolution, ProblemSpec};
use rfem_core::quadrature::{segment_rule, triangle_rule, MAX_ORDER};
use rfem_core::recovery::kp_ratio;
use rfem_core::sparse::CsrMatrix;
use rfem_core::spaces::{cell_mass_matrix, l2_project, triangle_points};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: u32, title: &str, ok: bool, detail: &str, elapsed: Duration) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {criterion} ({title}): {detail} [{:.1}s]", elapsed.as_secs_f64());
}

const LLOYD: usize = 100;
const SEED: u64 = 1;

fn voronoi(n: usize) -> Arc<PolyMesh> {
    Arc::new(generate_voronoi_mesh(n, SEED, LLOYD, Rect::UNIT).unwrap())
}

fn value(r: Rate) -> f64 {
    match r {
        Rate::Value(v) => v,
        Rate::Exact => f64::INFINITY,
    }
}

/// Global polynomial `Σ c_ij x^i y^j` of total degree `r` with hand-rolled derivatives.
#[derive(Clone)]
struct Poly {
    terms: Vec<(i32, i32, f64)>,
}

impl Poly {
    fn of_degree(r: usize) -> Self {
        let mut terms = Vec::new();
        let mut k = 0;
        for i in 0..=r as i32 {
            for j in 0..=(r as i32 - i) {
                k += 1;
                terms.push((i, j, 0.3 + 0.7 * ((k * 37) % 11) as f64 / 11.0 * if k % 2 == 0 { -1.0 } else { 1.0 }));
            }
        }
        Poly { terms }
    }
    fn pw(x: f64, n: i32) -> f64 {
        if n < 0 {
            0.0
        } else {
            x.powi(n)
        }
    }
    fn u(&self, p: &Point) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * p.x.powi(i) * p.y.powi(j)).sum()
    }
    fn grad(&self, p: &Point) -> Vector {
        let dx = self.terms.iter().map(|&(i, j, c)| c * i as f64 * Self::pw(p.x, i - 1) * p.y.powi(j)).sum();
        let dy = self.terms.iter().map(|&(i, j, c)| c * j as f64 * p.x.powi(i) * Self::pw(p.y, j - 1)).sum();
        Vector::new(dx, dy)
    }
    fn laplacian(&self, p: &Point) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| {
                c * ((i * (i - 1)) as f64 * Self::pw(p.x, i - 2) * p.y.powi(j)
                    + (j * (j - 1)) as f64 * p.x.powi(i) * Self::pw(p.y, j - 2))
            })
            .sum()
    }
}

/// `a = I`, `b = (1 − y, 1 − x)`, `c = 2` with a global polynomial solution.
fn polynomial_problem(r: usize) -> ProblemSpec {
    let p = Poly::of_degree(r);
    let b = |q: &Point| Vector::new(1.0 - q.y, 1.0 - q.x);
    let (pu, pg, pf, pd) = (p.clone(), p.clone(), p.clone(), p);
    ProblemSpec {
        a: Arc::new(|_| Matrix2::identity()),
        b: Arc::new(b),
        c: Arc::new(|_| 2.0),
        f: Arc::new(move |q| -pf.laplacian(q) + b(q).dot(&pf.grad(q)) + 2.0 * pf.u(q)),
        g_d: Arc::new(move |q| pd.u(q)),
        exact: Some(ExactSolution { u: Arc::new(move |q| pu.u(q)), grad: Arc::new(move |q| pg.grad(q)) }),
        ..ProblemSpec::zero("polynomial", Rect::UNIT)
    }
}

#[test]
fn criterion_1_polynomial_exactness() {
    let _g = serial();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [64, 256] {
        let mesh = voronoi(n);
        for r in 1..=3 {
            let spec = polynomial_problem(r);
            let sol = solve_problem(&spec, mesh.clone(), &RunOptions::new(r)).unwrap();
            let e = sol.errors.unwrap();
            let d = &sol.disc;
            let norm = l2_norm(d, &|q| (spec.exact.as_ref().unwrap().u)(q));
            worst = worst.max(e.l2 / norm).max(e.l2_rec / norm);
        }
    }
    let el = t.elapsed();
    let ok = worst <= 1e-8 && el < Duration::from_secs(30);
    report(1, "polynomial exactness", ok, &format!("max relative L2 error {worst:.2e} (tol 1e-8)"), el);
    assert!(ok);
}

fn l2_norm(d: &Discretization, f: &dyn Fn(&Point) -> f64) -> f64 {
    let rule = d.volume_rule().unwrap();
    let mut s = 0.0;
    for ti in 0..d.mesh.subtriangles().len() {
        for (p, w) in triangle_points(&d.mesh, ti, &rule) {
            s += w * f(&p).powi(2);
        }
    }
    s.sqrt()
}

fn study(example: u32, r: usize) -> EocTable {
    let spec = builtin_example(example, None).unwrap();
    let base = if example == 4 {
        MeshSource::Aligned { n: 8 }
    } else {
        MeshSource::Voronoi { n_cells: 64, seed: SEED, lloyd: LLOYD }
    };
    let table = run_study(&spec, &base, 4, &RunOptions::new(r), |_, _| {}).unwrap();
    println!("example {example}, r = {r}\n{}", table.render(&["l2", "h1", "l2_rec", "h1_rec", "bnorm", "triple"]));
    table
}

#[test]
fn criterion_2_example2_optimal_rates() {
    let _g = serial();
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for r in 1..=3usize {
        let tab = study(2, r);
        let rf = r as f64;
        let l2 = value(tab.final_rate("l2").unwrap().unwrap());
        let l2r = value(tab.final_rate("l2_rec").unwrap().unwrap());
        let h1 = value(tab.final_rate("h1").unwrap().unwrap());
        let h1r = value(tab.final_rate("h1_rec").unwrap().unwrap());
        let last = tab.rows.last().unwrap();
        let ratio = last.l2_rec / last.l2;
        ok &= l2 >= rf + 0.8 && l2r >= rf + 0.8 && h1 >= rf - 0.2 && h1r >= rf - 0.2 && (0.5..=2.0).contains(&ratio);
        detail.push(format!("r={r}: L2 {l2:.2}/{l2r:.2}, H1 {h1:.2}/{h1r:.2}, ratio {ratio:.3}"));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(600);
    report(2, "example 2 rates", ok, &detail.join("; "), el);
    assert!(ok);
}

#[test]
fn criterion_3_example1_rates() {
    let _g = serial();
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for r in 1..=3usize {
        let tab = study(1, r);
        let rf = r as f64;
        let l2 = value(tab.final_rate("l2").unwrap().unwrap());
        let b = value(tab.final_rate("bnorm").unwrap().unwrap());
        ok &= l2 >= rf + 0.8 && b >= rf + 0.4;
        detail.push(format!("r={r}: L2 {l2:.2} (>= {:.1}), b-norm {b:.2} (>= {:.1})", rf + 0.8, rf + 0.4));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(600);
    report(3, "example 1 rates", ok, &detail.join("; "), el);
    assert!(ok);
}

#[test]
fn criterion_4_example3_stability() {
    let _g = serial();
    let t = Instant::now();
    let mesh = voronoi(1024);
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [1e-2, 1e-4, 1e-6] {
        let spec = builtin_example(3, Some(eps)).unwrap();
        match solve_problem(&spec, mesh.clone(), &RunOptions::new(1)) {
            Ok(sol) => {
                let ((lo, hi), (rlo, rhi)) = solution_range(&sol.disc, sol.coefficients()).unwrap();
                let good = lo.min(rlo) >= -0.2 && hi.max(rhi) <= 1.2;
                ok &= good;
                detail.push(format!("eps={eps:e}: u_h [{lo:.3}, {hi:.3}], E(u_h) [{rlo:.3}, {rhi:.3}]"));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("eps={eps:e}: solve failed: {e}"));
            }
        }
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(120);
    report(4, "example 3 stability", ok, &detail.join("; "), el);
    assert!(ok);
}

#[test]
fn criterion_5_example4_partitioned_recovery() {
    let _g = serial();
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for r in 1..=2usize {
        let tab = study(4, r);
        let rf = r as f64;
        let tr = value(tab.final_rate("triple").unwrap().unwrap());
        let l2 = value(tab.final_rate("l2").unwrap().unwrap());
        ok &= tr >= rf - 0.2 && l2 >= rf + 0.5;
        detail.push(format!("r={r}: triple {tr:.2} (>= {:.1}), L2 {l2:.2} (>= {:.1})", rf - 0.2, rf + 0.5));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(600);
    report(5, "example 4 rates", ok, &detail.join("; "), el);
    assert!(ok);
}

#[test]
fn criterion_6_recovery_properties() {
    let _g = serial();
    let t = Instant::now();
    let spec = builtin_example(2, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut ident, mut rowsum): (f64, f64) = (0.0, 0.0);
    let mut spreads = Vec::new();
    for r in 1..=3usize {
        let mut kp: HashMap<u32, Vec<f64>> = HashMap::new();
        for n in [16, 64, 256, 1024] {
            let d = Discretization::new(&spec, voronoi(n), r, None).unwrap();
            // Identity on the embedding of a global P_r polynomial.
            let poly = Poly::of_degree(r);
            let v = l2_project(&d.dg, &|q| poly.u(q), d.order).unwrap();
            let rec = d.recovery.apply(&v);
            for (node, p) in d.conf.node_coords().iter().enumerate() {
                ident = ident.max((rec[node] - poly.u(p)).abs());
            }
            // Averaging weights of each row: the entries on constant-monomial columns.
            let m = d.recovery.matrix();
            for i in 0..m.nrows() {
                let (cols, vals) = m.row(i);
                let s: f64 = cols.iter().zip(vals).filter(|(&c, _)| c % d.dg.local_dim() == 0).map(|(_, v)| v).sum();
                rowsum = rowsum.max((s - 1.0).abs());
            }
            let x: Vec<f64> = (0..d.dg.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for alpha in [0, 1] {
                kp.entry(alpha).or_default().push(kp_ratio(&d.dg, &d.conf, &d.recovery, &x, alpha).unwrap());
            }
        }
        for (alpha, v) in kp {
            let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
            spreads.push((r, alpha, hi / lo));
        }
    }
    spreads.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let worst_spread = spreads.iter().map(|s| s.2).fold(0.0, f64::max);
    let el = t.elapsed();
    let ok = ident <= 1e-12 && rowsum <= 1e-13 && worst_spread < 4.0;
    let detail = format!(
        "identity error {ident:.1e}, row-sum error {rowsum:.1e}, KP spread max/min per (r, alpha): {}",
        spreads.iter().map(|(r, a, s)| format!("({r},{a}) {s:.2}")).collect::<Vec<_>>().join(", ")
    );
    report(6, "recovery operator", ok, &detail, el);
    assert!(ok);
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Mesh checks independent of the mesh module's own validation.
fn check_mesh(mesh: &PolyMesh, domain: Rect) -> Result<(), String> {
    let area: f64 = (0..mesh.n_cells())
        .map(|c| {
            let p = mesh.cell_polygon(c);
            (0..p.len()).map(|i| p[i].x * p[(i + 1) % p.len()].y - p[(i + 1) % p.len()].x * p[i].y).sum::<f64>() * 0.5
        })
        .sum();
    let dom_area = (domain.x1 - domain.x0) * (domain.y1 - domain.y0);
    if (area - dom_area).abs() > 1e-10 * dom_area {
        return Err(format!("cells cover {area}, domain is {dom_area}"));
    }
    for c in 0..mesh.n_cells() {
        let p = mesh.cell_polygon(c);
        for i in 0..p.len() {
            let (a, b, q) = (p[i], p[(i + 1) % p.len()], p[(i + 2) % p.len()]);
            if (b - a).perp(&(q - b)) <= 0.0 {
                return Err(format!("cell {c} is not strictly convex and counterclockwise"));
            }
        }
        let tri_area: f64 = mesh
            .cell_triangles(c)
            .map(|t| {
                let [a, b, q] = mesh.triangle_points(t);
                0.5 * (b - a).perp(&(q - a))
            })
            .sum();
        let cell_area = mesh.cell_areas()[c];
        if (tri_area - cell_area).abs() > 1e-10 * cell_area {
            return Err(format!("sub-triangles of cell {c} do not partition it"));
        }
    }
    // Conformity: every triangle edge is shared by two triangles or lies on ∂Ω.
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for t in mesh.subtriangles() {
        for k in 0..3 {
            let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let on_boundary = |p: &Point| {
        let tol = 1e-12;
        (p.x - domain.x0).abs() < tol || (p.x - domain.x1).abs() < tol || (p.y - domain.y0).abs() < tol || (p.y - domain.y1).abs() < tol
    };
    let mut perimeter = 0.0;
    for (&(a, b), &count) in &edges {
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        match count {
            2 => {}
            1 if on_boundary(&pa) && on_boundary(&pb) && on_boundary(&nalgebra::center(&pa, &pb)) => {
                perimeter += (pb - pa).norm();
            }
            _ => return Err(format!("edge ({a}, {b}) is used by {count} triangles")),
        }
    }
    let dom_perimeter = 2.0 * ((domain.x1 - domain.x0) + (domain.y1 - domain.y0));
    if (perimeter - dom_perimeter).abs() > 1e-10 * dom_perimeter {
        return Err(format!("boundary edges have length {perimeter}, expected {dom_perimeter}"));
    }
    Ok(())
}

fn min_eigenvalue(m: &CsrMatrix) -> f64 {
    let d = m.to_dense();
    let n = d.len();
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (d[i][j] + d[j][i]));
    dm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_7_structural_invariants() {
    let _g = serial();
    let t = Instant::now();
    let mut fails: Vec<String> = Vec::new();

    // Quadrature moments on the reference triangle and segment.
    let mut moment: f64 = 0.0;
    for q in 1..=MAX_ORDER {
        let tr = triangle_rule(q).unwrap();
        let sr = segment_rule(q).unwrap();
        for i in 0..=q {
            for j in 0..=(q - i) {
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                let approx: f64 = tr.points.iter().zip(&tr.weights).map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32)).sum();
                moment = moment.max((approx - exact).abs());
            }
            let exact = if i % 2 == 0 { 2.0 / (i + 1) as f64 } else { 0.0 };
            let approx: f64 = sr.points.iter().zip(&sr.weights).map(|(p, w)| w * p[0].powi(i as i32)).sum();
            moment = moment.max((approx - exact).abs());
        }
    }
    if moment > 1e-14 {
        fails.push(format!("quadrature moment error {moment:.1e}"));
    }

    // Every mesh family used by the examples.
    let mut meshes: Vec<(PolyMesh, Rect)> = Vec::new();
    for n in [1, 4, 16, 64, 256, 1024, 4096] {
        for seed in [1, 2] {
            meshes.push((generate_voronoi_mesh(n, seed, LLOYD, Rect::UNIT).unwrap(), Rect::UNIT));
        }
        meshes.push((generate_voronoi_mesh(n, 7, 0, Rect::UNIT).unwrap(), Rect::UNIT));
    }
    let square = Rect::new(-1.0, -1.0, 1.0, 1.0);
    for n in [8, 16, 32, 64] {
        meshes.push((aligned_square_mesh(n, square).unwrap(), square));
    }
    for (i, (m, dom)) in meshes.iter().enumerate() {
        if let Err(e) = check_mesh(m, *dom) {
            fails.push(format!("mesh {i} ({} cells): {e}", m.n_cells()));
        }
    }

    // Stabilisations: symmetric positive semidefinite.
    let pen = PenaltyConfig::default();
    let mut stab_worst: f64 = 0.0;
    for (ex, mesh) in [(2u32, voronoi(16)), (1, voronoi(16)), (4, Arc::new(aligned_square_mesh(4, square).unwrap()))] {
        let spec = builtin_example(ex, None).unwrap();
        for r in 1..=2 {
            let d = Discretization::new(&spec, mesh.clone(), r, None).unwrap();
            for s in [assemble_stab_ac(&spec, &d, &pen).unwrap(), assemble_stab_b(&spec, &d, &pen).unwrap()] {
                let scale = s.max_abs().max(1.0);
                stab_worst = stab_worst.max(s.asymmetry() / scale).max((-min_eigenvalue(&s) / scale).max(0.0));
            }
        }
    }
    if stab_worst > 1e-12 {
        fails.push(format!("stabilisation asymmetry/negativity {stab_worst:.1e}"));
    }

    // Full matrix symmetric when b = 0.
    let sym_spec = ProblemSpec {
        a: Arc::new(|p: &Point| Matrix2::new(1.0 + p.x, 0.2, 0.2, 1.0 + p.y)),
        c: Arc::new(|_| 1.0),
        f: Arc::new(|_| 1.0),
        ..ProblemSpec::zero("symmetric", Rect::UNIT)
    };
    let d = Discretization::new(&sym_spec, voronoi(64), 2, None).unwrap();
    let sys = assemble_system(&sym_spec, &d, &pen).unwrap();
    let asym = sys.matrix.asymmetry() / sys.matrix.max_abs();
    if asym > 1e-12 {
        fails.push(format!("matrix asymmetry with b = 0: {asym:.1e}"));
    }

    // L2 projection: residual orthogonal to the local space.
    let mut orth: f64 = 0.0;
    let d = Discretization::new(&sym_spec, voronoi(64), 3, None).unwrap();
    let f = |p: &Point| (5.0 * p.x).sin() * (3.0 * p.y).cos() + p.x.exp();
    let proj = l2_project(&d.dg, &f, d.order).unwrap();
    let rule = d.volume_rule().unwrap();
    let nd = d.dg.local_dim();
    let mut vals = vec![0.0; nd];
    for cell in 0..d.mesh.n_cells() {
        let mut res = vec![0.0; nd];
        let mut fnorm = 0.0;
        for ti in d.mesh.cell_triangles(cell) {
            for (p, w) in triangle_points(&d.mesh, ti, &rule) {
                d.dg.values(cell, &p, &mut vals);
                let e = f(&p) - d.dg.evaluate(&proj, cell, &p);
                fnorm += w * f(&p).powi(2);
                for k in 0..nd {
                    res[k] += w * e * vals[k];
                }
            }
        }
        // Relative to ‖f‖ ‖φ_k‖ on the cell.
        let m = cell_mass_matrix(&d.dg, cell).unwrap();
        for k in 0..nd {
            orth = orth.max(res[k].abs() / (m[(k, k)].sqrt() * fnorm.sqrt()));
        }
    }
    if orth > 1e-10 {
        fails.push(format!("L2 projection orthogonality residual {orth:.1e}"));
    }

    let el = t.elapsed();
    let ok = fails.is_empty();
    let detail = if ok {
        format!(
            "moments {moment:.1e}, {} meshes checked, stabilisation {stab_worst:.1e}, b=0 asymmetry {asym:.1e}, orthogonality {orth:.1e}",
            meshes.len()
        )
    } else {
        fails.join("; ")
    };
    report(7, "structural invariants", ok, &detail, el);
    assert!(ok);
}
