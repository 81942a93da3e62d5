//! Gauss rules on the reference segment `[-1, 1]` and the reference triangle
//! `{(0,0), (1,0), (0,1)}`.
//!
//! Triangle rules above order one are collapsed (Duffy) tensor products of
//! Gauss-Legendre rules: all weights are positive and exactness holds for any
//! requested order.

use crate::{Error, Result};

pub const MAX_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Triangle,
    Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    /// Polynomial degree integrated exactly.
    pub order: usize,
    /// Reference coordinates; segment rules use only the first component.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn quadrature(kind: RuleKind, order: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::Quadrature(format!("unsupported order {order} (expected 1..={MAX_ORDER})")));
    }
    Ok(match kind {
        RuleKind::Segment => {
            let (x, w) = gauss_legendre((order + 1).div_ceil(2));
            QuadratureRule { kind, order, points: x.iter().map(|&s| [s, 0.0]).collect(), weights: w }
        }
        RuleKind::Triangle if order == 1 => QuadratureRule {
            kind,
            order,
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        },
        RuleKind::Triangle => {
            let (xs, ws) = gauss_legendre((order + 2).div_ceil(2));
            let (xt, wt) = gauss_legendre((order + 1).div_ceil(2));
            let mut points = Vec::with_capacity(xs.len() * xt.len());
            let mut weights = Vec::with_capacity(xs.len() * xt.len());
            for (s, ws) in xs.iter().zip(&ws) {
                let s = 0.5 * (s + 1.0);
                for (t, wt) in xt.iter().zip(&wt) {
                    let t = 0.5 * (t + 1.0);
                    points.push([s, t * (1.0 - s)]);
                    weights.push(0.25 * ws * wt * (1.0 - s));
                }
            }
            QuadratureRule { kind, order, points, weights }
        }
    })
}

pub fn triangle_rule(order: usize) -> Result<QuadratureRule> {
    quadrature(RuleKind::Triangle, order)
}

pub fn segment_rule(order: usize) -> Result<QuadratureRule> {
    quadrature(RuleKind::Segment, order)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
