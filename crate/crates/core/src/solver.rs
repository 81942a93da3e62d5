//! Linear solvers: sparse LU (direct) and restarted GMRES with ILU(0).

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Direct,
    Iterative,
    /// Direct up to [`DIRECT_LIMIT`] unknowns, iterative above.
    Auto,
}

/// Largest system solved by LU in [`SolverMode::Auto`]; beyond it the fill
/// of the factors outgrows desk-scale memory.
pub const DIRECT_LIMIT: usize = 60_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Relative residual tolerance `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { mode: SolverMode::Auto, tol: 1e-10, max_iter: 5000, restart: 60 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// Method actually used (never `Auto`).
    pub mode: SolverMode,
    pub iterations: usize,
    /// Final relative residual, recomputed from the solution.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| q - p).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

pub fn solve(a: &CsrMatrix, b: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::Solver {
            message: format!("system is {}x{} with a right-hand side of {}", a.nrows(), a.ncols(), b.len()),
            residuals: Vec::new(),
        });
    }
    let mode = match config.mode {
        SolverMode::Auto if b.len() <= DIRECT_LIMIT => SolverMode::Direct,
        SolverMode::Auto => SolverMode::Iterative,
        m => m,
    };
    if b.iter().all(|&v| v == 0.0) {
        return Ok(SolveReport {
            solution: vec![0.0; b.len()],
            mode,
            iterations: 0,
            residual: 0.0,
            residual_history: vec![0.0],
        });
    }
    let report = match mode {
        SolverMode::Iterative => gmres(a, b, config)?,
        _ => solve_direct(a, b)?,
    };
    // Direct solves are accepted at a looser floor: conditioning, not the method, limits them.
    let tol = match mode {
        SolverMode::Iterative => config.tol * 1.01,
        _ => config.tol.max(1e-8),
    };
    if !(report.residual <= tol) {
        return Err(Error::Solver {
            message: format!("relative residual {:.3e} exceeds tolerance {tol:.1e}", report.residual),
            residuals: report.residual_history,
        });
    }
    Ok(report)
}

fn solve_direct(a: &CsrMatrix, b: &[f64]) -> Result<SolveReport> {
    let n = a.nrows();
    let triplets: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Solver { message: format!("cannot build sparse matrix: {e:?}"), residuals: Vec::new() })?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::Solver { message: format!("sparse LU failed: {e:?}"), residuals: Vec::new() })?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let mut solution: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let mut residual = relative_residual(a, &solution, b);
    let mut history = vec![residual];
    // One step of iterative refinement is cheap with the factorisation at hand.
    if residual > 1e-13 && residual.is_finite() {
        let ax = a.matvec(&solution);
        let r = Mat::<f64>::from_fn(n, 1, |i, _| b[i] - ax[i]);
        let dx = lu.solve(&r);
        let refined: Vec<f64> = (0..n).map(|i| solution[i] + dx[(i, 0)]).collect();
        let rr = relative_residual(a, &refined, b);
        history.push(rr);
        if rr < residual {
            solution = refined;
            residual = rr;
        }
    }
    if !residual.is_finite() {
        return Err(Error::Solver { message: "LU produced a non-finite solution (singular matrix?)".into(), residuals: history });
    }
    Ok(SolveReport { solution, mode: SolverMode::Direct, iterations: 1, residual, residual_history: history })
}

/// Incomplete LU factorisation with the sparsity pattern of `A`.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let indptr = a.indptr().to_vec();
        let indices = a.indices().to_vec();
        let mut vals = a.values().to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                if indices[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Solver { message: format!("ILU(0): missing diagonal in row {i}"), residuals: Vec::new() });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = k;
            }
            for k in indptr[i]..indptr[i + 1] {
                let j = indices[k];
                if j >= i {
                    break;
                }
                let pivot = vals[diag[j]];
                let lij = vals[k] / pivot;
                vals[k] = lij;
                for kk in diag[j] + 1..indptr[j + 1] {
                    let p = pos[indices[kk]];
                    if p != usize::MAX {
                        vals[p] -= lij * vals[kk];
                    }
                }
            }
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = usize::MAX;
            }
            if vals[diag[i]] == 0.0 || !vals[diag[i]].is_finite() {
                return Err(Error::Solver { message: format!("ILU(0): zero pivot in row {i}"), residuals: Vec::new() });
            }
        }
        let lu = CsrMatrix::from_raw(n, n, indptr, indices, vals);
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `L U x = r` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let (ip, ix, v) = (self.lu.indptr(), self.lu.indices(), self.lu.values());
        let n = x.len();
        for i in 0..n {
            let mut s = x[i];
            for k in ip[i]..self.diag[i] {
                s -= v[k] * x[ix[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..ip[i + 1] {
                s -= v[k] * x[ix[k]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }
}

/// Right-preconditioned restarted GMRES.
fn gmres(a: &CsrMatrix, b: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    let n = b.len();
    let m = config.restart.max(1);
    let ilu = Ilu0::new(a).map_err(|e| match e {
        // x0 = 0, so the history so far is the unit initial residual.
        Error::Solver { message, .. } => Error::Solver { message, residuals: vec![1.0] },
        other => other,
    })?;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        history.push(beta / bnorm);
        if beta / bnorm <= config.tol {
            break;
        }
        if iterations >= config.max_iter {
            return Err(Error::Solver {
                message: format!("GMRES did not converge in {} iterations", config.max_iter),
                residuals: history,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut zk = v[k].clone();
            ilu.apply(&mut zk);
            let mut w = a.matvec(&zk);
            z.push(zk);
            for i in 0..=k {
                let hik: f64 = w.iter().zip(&v[i]).map(|(p, q)| p * q).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                return Err(Error::Solver { message: "GMRES breakdown".into(), residuals: history });
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            history.push(g[k + 1].abs() / bnorm);
            if g[k + 1].abs() / bnorm <= config.tol * 0.5 || hn == 0.0 || iterations >= config.max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
    }
    let residual = relative_residual(a, &x, b);
    Ok(SolveReport { solution: x, mode: SolverMode::Iterative, iterations, residual, residual_history: history })
}
