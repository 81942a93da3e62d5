use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;

use super::{ExactSolution, MeshFamily, PartitionRule, ProblemSpec};
use crate::geometry::{Point, Rect, Vector};
use crate::{Error, Result};

/// The four model problems. `epsilon` is the diffusion of Example 3 (default `1e-2`)
/// and is ignored by the others.
pub fn builtin_example(id: u32, epsilon: Option<f64>) -> Result<ProblemSpec> {
    match id {
        1 => Ok(example1()),
        2 => Ok(example2()),
        3 => example3(epsilon.unwrap_or(1e-2)),
        4 => Ok(example4()),
        _ => Err(Error::Problem(format!("unknown example {id} (expected 1..=4)"))),
    }
}

/// Pure convection with a smooth solution.
fn example1() -> ProblemSpec {
    let u = |p: &Point| {
        let s = PI * (1.0 + p.x) * (1.0 + p.y).powi(2) / 8.0;
        1.0 + s.sin()
    };
    let grad = |p: &Point| {
        let s = PI * (1.0 + p.x) * (1.0 + p.y).powi(2) / 8.0;
        Vector::new(s.cos() * PI * (1.0 + p.y).powi(2) / 8.0, s.cos() * PI * (1.0 + p.x) * (1.0 + p.y) / 4.0)
    };
    let b = |p: &Point| Vector::new(2.0 - p.y * p.y, 2.0 - p.x);
    let c = |p: &Point| 1.0 + (1.0 + p.x) * (1.0 + p.y).powi(2);
    ProblemSpec {
        b: Arc::new(b),
        c: Arc::new(c),
        f: Arc::new(move |p| b(p).dot(&grad(p)) + c(p) * u(p)),
        g_d: Arc::new(u),
        exact: Some(ExactSolution { u: Arc::new(u), grad: Arc::new(grad) }),
        ..ProblemSpec::zero("example1", Rect::UNIT)
    }
}

/// Nonsymmetric diffusion-convection-reaction.
fn example2() -> ProblemSpec {
    let u = |p: &Point| (PI * p.x).sin() * (PI * p.y).sin();
    let grad = |p: &Point| {
        Vector::new(PI * (PI * p.x).cos() * (PI * p.y).sin(), PI * (PI * p.x).sin() * (PI * p.y).cos())
    };
    let b = |p: &Point| Vector::new(1.0 - p.y, 1.0 - p.x);
    ProblemSpec {
        a: Arc::new(|_| Matrix2::identity()),
        b: Arc::new(b),
        c: Arc::new(|_| 2.0),
        f: Arc::new(move |p| 2.0 * PI * PI * u(p) + b(p).dot(&grad(p)) + 2.0 * u(p)),
        g_d: Arc::new(u),
        exact: Some(ExactSolution { u: Arc::new(u), grad: Arc::new(grad) }),
        ..ProblemSpec::zero("example2", Rect::UNIT)
    }
}

/// Convection-dominated diffusion with boundary layers at `x = 1` and `y = 1`.
fn example3(eps: f64) -> Result<ProblemSpec> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Problem(format!("example 3 needs a positive diffusion, got {eps}")));
    }
    Ok(ProblemSpec {
        a: Arc::new(move |_| Matrix2::identity() * eps),
        b: Arc::new(|_| Vector::new(1.0, 1.0)),
        f: Arc::new(|_| 1.0),
        ..ProblemSpec::zero(&format!("example3(eps={eps:e})"), Rect::UNIT)
    })
}

/// Mixed type: parabolic for `y > 0`, hyperbolic for `y <= 0`, with a solution
/// that jumps across `y = 0`.
fn example4() -> ProblemSpec {
    let upper = |p: &Point| p.y > 0.0;
    let u = move |p: &Point| {
        let s = (0.5 * PI * (1.0 + p.y)).sin();
        if upper(p) {
            s * (-(p.x + PI * PI * p.x.powi(3) / 12.0)).exp()
        } else {
            s * (-p.x).exp()
        }
    };
    let grad = move |p: &Point| {
        let s = (0.5 * PI * (1.0 + p.y)).sin();
        let ds = 0.5 * PI * (0.5 * PI * (1.0 + p.y)).cos();
        let (e, de) = if upper(p) {
            let e = (-(p.x + PI * PI * p.x.powi(3) / 12.0)).exp();
            (e, -(1.0 + PI * PI * p.x * p.x / 4.0) * e)
        } else {
            let e = (-p.x).exp();
            (e, -e)
        };
        Vector::new(s * de, ds * e)
    };
    ProblemSpec {
        a: Arc::new(move |p| if upper(p) { Matrix2::new(0.0, 0.0, 0.0, p.x * p.x) } else { Matrix2::zeros() }),
        b: Arc::new(|_| Vector::new(1.0, 0.0)),
        c: Arc::new(|_| 1.0),
        g_d: Arc::new(u),
        exact: Some(ExactSolution { u: Arc::new(u), grad: Arc::new(grad) }),
        partition: PartitionRule::SignY,
        mesh_family: MeshFamily::Aligned,
        ..ProblemSpec::zero("example4", Rect::new(-1.0, -1.0, 1.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expr, Var};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Residual `−∇·(a∇u) + b·∇u + cu − f` with all derivatives of `u` taken symbolically.
    fn check_forcing(spec: &ProblemSpec, u_src: &str, a: [&str; 3], in_region: impl Fn(&Point) -> bool) {
        let u = Expr::parse(u_src).unwrap();
        let (ux, uy) = (u.diff(Var::X), u.diff(Var::Y));
        let [a11, a12, a22] = a.map(|s| Expr::parse(s).unwrap());
        let flux_x = Expr::Add(
            Box::new(Expr::Mul(Box::new(a11), Box::new(ux.clone()))),
            Box::new(Expr::Mul(Box::new(a12.clone()), Box::new(uy.clone()))),
        );
        let flux_y = Expr::Add(
            Box::new(Expr::Mul(Box::new(a12), Box::new(ux.clone()))),
            Box::new(Expr::Mul(Box::new(a22), Box::new(uy.clone()))),
        );
        let div = Expr::Add(Box::new(flux_x.diff(Var::X)), Box::new(flux_y.diff(Var::Y)));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = spec.domain;
        let mut tested = 0;
        while tested < 100 {
            let p = Point::new(rng.gen_range(d.x0..d.x1), rng.gen_range(d.y0..d.y1));
            if !in_region(&p) {
                continue;
            }
            tested += 1;
            let b = (spec.b)(&p);
            let lhs = -div.eval(p.x, p.y) + b.x * ux.eval(p.x, p.y) + b.y * uy.eval(p.x, p.y) + (spec.c)(&p) * u.eval(p.x, p.y);
            let f = (spec.f)(&p);
            assert!((lhs - f).abs() <= 1e-10 * (1.0 + f.abs()), "{}: {lhs} vs {f} at {p}", spec.name);
            let ex = spec.exact.as_ref().unwrap();
            assert!(((ex.u)(&p) - u.eval(p.x, p.y)).abs() < 1e-13);
            let g = (ex.grad)(&p);
            assert!((g.x - ux.eval(p.x, p.y)).abs() < 1e-12 && (g.y - uy.eval(p.x, p.y)).abs() < 1e-12);
        }
    }

    #[test]
    fn forcing_is_consistent_with_exact_solutions() {
        check_forcing(&example1(), "1 + sin(pi*(1+x)*(1+y)^2/8)", ["0", "0", "0"], |_| true);
        check_forcing(&example2(), "sin(pi*x)*sin(pi*y)", ["1", "0", "1"], |_| true);
        check_forcing(&example4(), "sin(pi*(1+y)/2)*exp(-(x + pi^2*x^3/12))", ["0", "0", "x^2"], |p| p.y > 0.0);
        check_forcing(&example4(), "sin(pi*(1+y)/2)*exp(-x)", ["0", "0", "0"], |p| p.y <= 0.0);
    }

    #[test]
    fn divergence_free_convection() {
        // ∂x(2 − y²) + ∂y(2 − x) = 0 and ∂x(1 − y) + ∂y(1 − x) = 0.
        for id in [1, 2, 3, 4] {
            let s = builtin_example(id, None).unwrap();
            assert_eq!((s.div_b)(&Point::new(0.3, 0.4)), 0.0);
        }
    }

    #[test]
    fn sample_values() {
        let e1 = builtin_example(1, None).unwrap();
        let u0 = (e1.exact.unwrap().u)(&Point::new(0.0, 0.0));
        assert!((u0 - 1.3826834323650898).abs() < 1e-15);
        let e2 = builtin_example(2, None).unwrap();
        assert!(((e2.exact.unwrap().u)(&Point::new(0.5, 0.5)) - 1.0).abs() < 1e-15);
        let e4 = builtin_example(4, None).unwrap();
        let u = e4.exact.unwrap().u;
        let x = 1.0;
        let above = u(&Point::new(x, 1e-300));
        let below = u(&Point::new(x, 0.0));
        assert!((above - (-(x + PI * PI * x.powi(3) / 12.0)).exp()).abs() < 1e-15);
        assert!((below - (-x).exp()).abs() < 1e-15);
        assert!((above - below).abs() > 0.1);
        assert!(builtin_example(5, None).is_err());
        assert!(builtin_example(3, Some(-1.0)).is_err());
    }
}
