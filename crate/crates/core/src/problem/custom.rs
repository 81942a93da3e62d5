use std::sync::Arc;

use nalgebra::Matrix2;

use super::{ExactSolution, MeshFamily, PartitionRule, ProblemSpec, ScalarField};
use crate::expr::{Expr, Var};
use crate::geometry::{Point, Rect, Vector};
use crate::{Error, Result};

/// A parsed expression used as a scalar field.
#[derive(Debug, Clone)]
pub struct ExprField {
    pub source: String,
    pub expr: Expr,
}

impl ExprField {
    pub fn parse(name: &str, source: &str) -> Result<Self> {
        let expr = Expr::parse(source).map_err(|e| match e {
            Error::Expression { column, message } => {
                Error::Expression { column, message: format!("in field '{name}': {message}") }
            }
            other => other,
        })?;
        Ok(ExprField { source: source.to_string(), expr })
    }

    pub fn field(&self) -> ScalarField {
        let e = self.expr.clone();
        Arc::new(move |p: &Point| e.eval(p.x, p.y))
    }
}

/// Coefficients given as expressions of `x` and `y`.
///
/// `∇·b` is derived symbolically. When `exact` is present, `f` may be omitted
/// and is then derived symbolically from the equation; `g_D` defaults to the
/// exact solution (or zero without one) and `g_N` to zero.
#[derive(Debug, Clone)]
pub struct CustomProblem {
    pub name: String,
    pub domain: Rect,
    /// `a11, a12, a22`.
    pub a: [String; 3],
    pub b: [String; 2],
    pub c: String,
    pub f: Option<String>,
    pub g_d: Option<String>,
    pub g_n: Option<String>,
    pub exact: Option<String>,
    /// Elliptic boundary points where this expression is positive are Neumann.
    pub neumann: Option<String>,
    pub partition: PartitionRule,
    pub mesh_family: MeshFamily,
}

impl CustomProblem {
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let [a11, a12, a22] = [
            ExprField::parse("a11", &self.a[0])?,
            ExprField::parse("a12", &self.a[1])?,
            ExprField::parse("a22", &self.a[2])?,
        ];
        let (b1, b2) = (ExprField::parse("b1", &self.b[0])?, ExprField::parse("b2", &self.b[1])?);
        let c = ExprField::parse("c", &self.c)?;
        let div_b = add(b1.expr.diff(Var::X), b2.expr.diff(Var::Y));
        let exact = self.exact.as_deref().map(|s| ExprField::parse("exact", s)).transpose()?;

        let f = match (&self.f, &exact) {
            (Some(s), _) => ExprField::parse("f", s)?.expr,
            (None, Some(u)) => {
                let (ux, uy) = (u.expr.diff(Var::X), u.expr.diff(Var::Y));
                let qx = add(mul(a11.expr.clone(), ux.clone()), mul(a12.expr.clone(), uy.clone()));
                let qy = add(mul(a12.expr.clone(), ux.clone()), mul(a22.expr.clone(), uy.clone()));
                let div_q = add(qx.diff(Var::X), qy.diff(Var::Y));
                let conv = add(mul(b1.expr.clone(), ux), mul(b2.expr.clone(), uy));
                add(Expr::Neg(Box::new(div_q)), add(conv, mul(c.expr.clone(), u.expr.clone())))
            }
            (None, None) => return Err(Error::Problem("custom problem needs 'f' or an exact solution".into())),
        };
        let g_d = match (&self.g_d, &exact) {
            (Some(s), _) => ExprField::parse("g_d", s)?.field(),
            (None, Some(u)) => u.field(),
            (None, None) => Arc::new(|_: &Point| 0.0),
        };
        let g_n = match &self.g_n {
            Some(s) => ExprField::parse("g_n", s)?.field(),
            None => Arc::new(|_: &Point| 0.0),
        };
        let neumann = match &self.neumann {
            Some(s) => {
                let e = ExprField::parse("neumann", s)?.expr;
                Some(Arc::new(move |p: &Point, _: &Vector| e.eval(p.x, p.y) > 0.0) as super::BoundaryPredicate)
            }
            None => None,
        };
        let exact = exact.map(|u| {
            let (ux, uy) = (u.expr.diff(Var::X), u.expr.diff(Var::Y));
            ExactSolution { u: u.field(), grad: Arc::new(move |p: &Point| Vector::new(ux.eval(p.x, p.y), uy.eval(p.x, p.y))) }
        });
        let (e11, e12, e22) = (a11.expr, a12.expr, a22.expr);
        let (eb1, eb2) = (b1.expr, b2.expr);
        Ok(ProblemSpec {
            name: self.name.clone(),
            domain: self.domain,
            a: Arc::new(move |p| {
                let off = e12.eval(p.x, p.y);
                Matrix2::new(e11.eval(p.x, p.y), off, off, e22.eval(p.x, p.y))
            }),
            b: Arc::new(move |p| Vector::new(eb1.eval(p.x, p.y), eb2.eval(p.x, p.y))),
            c: c.field(),
            div_b: Arc::new(move |p| div_b.eval(p.x, p.y)),
            f: Arc::new(move |p| f.eval(p.x, p.y)),
            g_d,
            g_n,
            exact,
            neumann,
            partition: self.partition,
            mesh_family: self.mesh_family,
        })
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::Add(Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    Expr::Mul(Box::new(a), Box::new(b))
}
