//! Gauss quadrature rules (Hermite, Laguerre, Legendre).
//!
//! Nodes come from the Golub-Welsch eigenproblem and are refined by Newton
//! steps on the orthonormal recurrence; weights use the Christoffel formula
//! evaluated in log-scaled form so that high orders do not overflow.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

pub const MAX_ORDER: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Weight e^{-x²} on R.
    GaussHermite,
    /// Weight e^{-x} on [0, ∞).
    GaussLaguerre,
    /// Weight 1 on [-1, 1].
    GaussLegendre,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Σ w_i f(x_i).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Legendre rule mapped to [lo, hi].
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> f64 {
        debug_assert_eq!(self.kind, QuadratureKind::GaussLegendre);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * self.integrate(|x| f(mid + half * x))
    }
}

impl QuadratureKind {
    /// Diagonal a_k and off-diagonal b_k (k ≥ 1) of the orthonormal recurrence,
    /// and the total mass μ₀ of the weight.
    fn diag(self, k: usize) -> f64 {
        match self {
            Self::GaussLaguerre => (2 * k + 1) as f64,
            _ => 0.0,
        }
    }

    fn offdiag(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Self::GaussHermite => (k / 2.0).sqrt(),
            Self::GaussLaguerre => k,
            Self::GaussLegendre => k / (4.0 * k * k - 1.0).sqrt(),
        }
    }

    fn mass(self) -> f64 {
        match self {
            Self::GaussHermite => std::f64::consts::PI.sqrt(),
            Self::GaussLaguerre => 1.0,
            Self::GaussLegendre => 2.0,
        }
    }

    /// ln of the exact moment ∫ x^k w(x) dx, or None when it vanishes by symmetry.
    fn ln_moment(self, k: usize) -> Option<f64> {
        match self {
            Self::GaussHermite if k.is_multiple_of(2) => ln_gamma((k as f64 + 1.0) / 2.0).ok(),
            Self::GaussLegendre if k.is_multiple_of(2) => Some((2.0 / (k as f64 + 1.0)).ln()),
            Self::GaussLaguerre => ln_gamma(k as f64 + 1.0).ok(),
            _ => None,
        }
    }

    fn symmetric(self) -> bool {
        !matches!(self, Self::GaussLaguerre)
    }
}

const RESCALE: f64 = 1e100;

/// Orthonormal p_n(x) and p_n'(x) up to a common positive factor.
fn eval_pn(kind: QuadratureKind, n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0;
    let mut d_prev = 0.0;
    let mut d = 0.0;
    for k in 0..n {
        let b_next = kind.offdiag(k + 1);
        let b_k = if k == 0 { 0.0 } else { kind.offdiag(k) };
        let a_k = kind.diag(k);
        let p_next = ((x - a_k) * p - b_k * p_prev) / b_next;
        let d_next = (p + (x - a_k) * d - b_k * d_prev) / b_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        if p.abs() > RESCALE || d.abs() > RESCALE {
            p /= RESCALE;
            p_prev /= RESCALE;
            d /= RESCALE;
            d_prev /= RESCALE;
        }
    }
    (p, d)
}

/// ln Σ_{k<n} p_k(x)² for the orthonormal family (p_0 = 1/√μ₀).
fn ln_christoffel_sum(kind: QuadratureKind, n: usize, x: f64) -> f64 {
    let mut p_prev = 0.0;
    let mut p = 1.0 / kind.mass().sqrt();
    let mut sum = p * p;
    let mut ln_scale = 0.0;
    for k in 0..n - 1 {
        let b_next = kind.offdiag(k + 1);
        let b_k = if k == 0 { 0.0 } else { kind.offdiag(k) };
        let p_next = ((x - kind.diag(k)) * p - b_k * p_prev) / b_next;
        p_prev = p;
        p = p_next;
        sum += p * p;
        if p.abs() > RESCALE {
            p /= RESCALE;
            p_prev /= RESCALE;
            sum /= RESCALE * RESCALE;
            ln_scale += 2.0 * RESCALE.ln();
        }
    }
    sum.ln() + ln_scale
}

/// Build the Gauss rule of the given kind with `order` nodes.
pub fn make_quadrature(kind: QuadratureKind, order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            reason: format!("order must lie in 1..={MAX_ORDER}"),
        });
    }
    let n = order;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            kind.diag(i)
        } else if i + 1 == j {
            kind.offdiag(j)
        } else if j + 1 == i {
            kind.offdiag(i)
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d) = eval_pn(kind, n, *x);
            if d == 0.0 || !d.is_finite() {
                break;
            }
            let step = p / d;
            if !step.is_finite() {
                break;
            }
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }

    if kind.symmetric() {
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let m = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -m;
            nodes[j] = m;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
    }

    let mut weights = Vec::with_capacity(n);
    for &x in &nodes {
        let w = (-ln_christoffel_sum(kind, n, x)).exp();
        if !(w.is_normal() && w > 0.0) {
            return Err(Error::UnsupportedOrder {
                order,
                reason: format!("weight at node {x:e} underflows double precision"),
            });
        }
        weights.push(w);
    }
    if kind.symmetric() {
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
    }

    let rule = QuadratureRule {
        kind,
        nodes,
        weights,
    };
    if cfg!(debug_assertions) {
        if let Some((k, err)) = worst_moment_error(&rule) {
            if err > 1e-10 {
                return Err(Error::UnsupportedOrder {
                    order,
                    reason: format!("moment of degree {k} reproduced only to {err:e}"),
                });
            }
        }
    }
    Ok(rule)
}

/// Largest relative monomial error up to degree 2n−1, measured against Σ w|x|^k.
/// Degrees whose moments overflow are skipped.
pub fn worst_moment_error(rule: &QuadratureRule) -> Option<(usize, f64)> {
    let mut worst: Option<(usize, f64)> = None;
    for k in 0..2 * rule.order() {
        let exact = match rule.kind.ln_moment(k) {
            Some(l) if l < 700.0 => l.exp(),
            Some(_) => continue,
            None => 0.0,
        };
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let t = w * x.powi(k as i32);
            sum += t;
            abs_sum += t.abs();
        }
        if !(sum.is_finite() && abs_sum.is_finite()) || abs_sum == 0.0 {
            continue;
        }
        let err = (sum - exact).abs() / abs_sum.max(exact.abs());
        if worst.is_none_or(|(_, e)| err > e) {
            worst = Some((k, err));
        }
    }
    worst
}
