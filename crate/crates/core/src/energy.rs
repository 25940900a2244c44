//! The Ḣ¹ instantiation: energy-distance kernels, the Dirac-to-normal profile ξ
//! and the latent loss used for training.
//!
//! Two Diracs at distance r are at squared distance g(r) = r. The squared
//! distance between weighted clouds is
//! `Σ w_k v_j g(‖x_k−y_j‖) − ½ΣΣ w_k w_k' g(‖x_k−x_k'‖) − ½ΣΣ v_j v_j' g(‖y_j−y_j'‖)`.
//! For a Dirac at radius a against N(0, I) the same construction gives
//! ξ(a) = E‖x−Z‖ − G with G = ½E‖Z−Z'‖ = Γ((N+1)/2)/Γ(N/2).

use std::cmp::Ordering;
use std::f64::consts::{PI, SQRT_2};

use crate::cloud::{dist, norm, PointCloud, WeightedCloud};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, tree_sum};
use crate::special::gamma_ratio_half;

/// A radial profile g with g(‖x−y‖) = d²(δ_x, δ_y).
pub trait RadialKernel: Sync {
    fn eval(&self, r: f64) -> f64;

    /// Largest radius at which `eval` is defined.
    fn max_radius(&self) -> f64 {
        f64::INFINITY
    }
}

/// g(r) = r.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyKernel;

impl RadialKernel for EnergyKernel {
    #[inline]
    fn eval(&self, r: f64) -> f64 {
        r
    }
}

/// Any radial kernel supplied as a closure.
pub struct FnKernel<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> RadialKernel for FnKernel<F> {
    fn eval(&self, r: f64) -> f64 {
        (self.0)(r)
    }
}

/// The kernels the toolkit knows by name.
#[derive(Debug, Clone)]
pub enum SobolevKernel {
    Energy,
    Table(crate::sobolev::KernelTable),
}

impl RadialKernel for SobolevKernel {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Energy => r,
            Self::Table(t) => t.eval(r),
        }
    }

    fn max_radius(&self) -> f64 {
        match self {
            Self::Energy => f64::INFINITY,
            Self::Table(t) => t.max_radius(),
        }
    }
}

/// The energy kernel with argument checking.
pub fn energy_kernel(r: f64) -> Result<f64> {
    if r >= 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::domain(format!(
            "kernel radius must be finite and nonnegative, got {r}"
        )))
    }
}

/// Components of a squared distance between two measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLossReport {
    pub cross_term: f64,
    pub self_term_a: f64,
    pub self_term_b: f64,
    pub total: f64,
}

impl EnergyLossReport {
    fn new(cross_term: f64, self_term_a: f64, self_term_b: f64) -> Self {
        Self {
            cross_term,
            self_term_a,
            self_term_b,
            total: cross_term - (self_term_a + self_term_b),
        }
    }
}

const ROW_BLOCK: usize = 32;

fn check_radius<K: RadialKernel + ?Sized>(g: &K, r_max: f64) -> Result<()> {
    if r_max > g.max_radius() {
        Err(Error::KernelDomain {
            radius: r_max,
            max: g.max_radius(),
        })
    } else {
        Ok(())
    }
}

/// Σ_k Σ_j w_k v_j g(‖x_k − y_j‖), parallel over row blocks, tree-reduced.
fn cross_sum<K: RadialKernel + ?Sized>(g: &K, a: &WeightedCloud, b: &WeightedCloud) -> Result<f64> {
    let rows = a.len();
    let parts = map_indexed(rows.div_ceil(ROW_BLOCK), |blk| {
        let lo = blk * ROW_BLOCK;
        let hi = (lo + ROW_BLOCK).min(rows);
        let mut r_max: f64 = 0.0;
        let sums: Vec<f64> = (lo..hi)
            .map(|k| {
                let x = a.cloud.point(k);
                let row: Vec<f64> = b
                    .cloud
                    .points()
                    .zip(&b.weights)
                    .map(|(y, v)| {
                        let r = dist(x, y);
                        r_max = r_max.max(r);
                        v * g.eval(r)
                    })
                    .collect();
                a.weights[k] * tree_sum(&row)
            })
            .collect();
        (tree_sum(&sums), r_max)
    });
    let r_max = parts.iter().fold(0.0f64, |m, p| m.max(p.1));
    check_radius(g, r_max)?;
    Ok(tree_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>()))
}

/// ½ Σ_k Σ_k' w_k w_k' g(‖x_k − x_k'‖), summed over the strict upper triangle.
fn self_sum<K: RadialKernel + ?Sized>(g: &K, a: &WeightedCloud) -> Result<f64> {
    let rows = a.len();
    let parts = map_indexed(rows.div_ceil(ROW_BLOCK), |blk| {
        let lo = blk * ROW_BLOCK;
        let hi = (lo + ROW_BLOCK).min(rows);
        let mut r_max: f64 = 0.0;
        let sums: Vec<f64> = (lo..hi)
            .map(|k| {
                let x = a.cloud.point(k);
                let row: Vec<f64> = (k + 1..rows)
                    .map(|j| {
                        let r = dist(x, a.cloud.point(j));
                        r_max = r_max.max(r);
                        a.weights[j] * g.eval(r)
                    })
                    .collect();
                a.weights[k] * tree_sum(&row)
            })
            .collect();
        (tree_sum(&sums), r_max)
    });
    let r_max = parts.iter().fold(0.0f64, |m, p| m.max(p.1));
    check_radius(g, r_max)?;
    let diag = g.eval(0.0) * a.weights.iter().map(|w| w * w).sum::<f64>() * 0.5;
    Ok(tree_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>()) + diag)
}

/// Total order on clouds used to evaluate the cross term in one canonical
/// orientation, which makes the distance bitwise symmetric.
fn canonical_order(a: &WeightedCloud, b: &WeightedCloud) -> Ordering {
    let key = |c: &WeightedCloud| (c.len(), c.dim());
    key(a).cmp(&key(b)).then_with(|| {
        let bits = |c: &WeightedCloud| {
            c.cloud
                .as_slice()
                .iter()
                .chain(&c.weights)
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        bits(a).cmp(&bits(b))
    })
}

/// Squared distance between two weighted clouds under kernel `g`.
pub fn weighted_distance_sq<K: RadialKernel + ?Sized>(
    g: &K,
    a: &WeightedCloud,
    b: &WeightedCloud,
) -> Result<EnergyLossReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let cross = match canonical_order(a, b) {
        Ordering::Greater => cross_sum(g, b, a)?,
        _ => cross_sum(g, a, b)?,
    };
    Ok(EnergyLossReport::new(
        cross,
        self_sum(g, a)?,
        self_sum(g, b)?,
    ))
}

/// Squared distance between two uniform clouds under kernel `g`.
pub fn generic_xs_distance_sq<K: RadialKernel + ?Sized>(
    g: &K,
    a: &PointCloud,
    b: &PointCloud,
) -> Result<EnergyLossReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Shape("distance needs nonempty clouds".into()));
    }
    weighted_distance_sq(g, &a.uniform(), &b.uniform())
}

/// Squared energy distance (g(r) = r) between two uniform clouds.
pub fn xs_energy_distance_sq(a: &PointCloud, b: &PointCloud) -> Result<EnergyLossReport> {
    generic_xs_distance_sq(&EnergyKernel, a, b)
}

// ---------------------------------------------------------------------------
// Dirac-to-normal profile ξ.

/// G = ½E‖Z−Z'‖ = Γ((N+1)/2)/Γ(N/2).
pub fn half_mean_pair_distance(n_dim: usize) -> f64 {
    gamma_ratio_half(n_dim as f64 / 2.0).expect("positive dimension")
}

/// ξ(0) = (√2 − 1) G.
pub fn xi_zero(n_dim: usize) -> f64 {
    (SQRT_2 - 1.0) * half_mean_pair_distance(n_dim)
}

/// ξ''(0) = √2 G / N.
pub fn xi_second_derivative_zero(n_dim: usize) -> f64 {
    SQRT_2 * half_mean_pair_distance(n_dim) / n_dim as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiMethod {
    /// Alternating power series in a²; used for a² ≤ N, exact sum beyond.
    Series,
    /// Poisson mixture of chi means (exact up to truncation).
    PoissonExact,
    /// c_N0 + √(a² + c_N1), exact to second order at 0.
    QuadraticSurrogate,
    /// √(a² + N) shifted to match at 0.
    Coarse,
    /// Three-term large-a expansion of the non-central chi mean.
    Iterated,
}

/// Evaluator for ξ(a) with cached constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiEvaluator {
    pub n_dim: usize,
    pub method: XiMethod,
    pub tolerance: f64,
    pub max_terms: usize,
    pub c_n0: f64,
    pub c_n1: f64,
}

impl XiEvaluator {
    pub fn new(n_dim: usize, method: XiMethod) -> Result<Self> {
        if n_dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let d2 = xi_second_derivative_zero(n_dim);
        Ok(Self {
            n_dim,
            method,
            tolerance: 1e-15,
            max_terms: 100_000,
            c_n0: xi_zero(n_dim) - 1.0 / d2,
            c_n1: 1.0 / (d2 * d2),
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// ξ(a).
    pub fn value(&self, a: f64) -> Result<f64> {
        check_radius_arg(a)?;
        let n = self.n_dim;
        match self.method {
            XiMethod::Series if a * a <= n as f64 => xi_series(a, self),
            XiMethod::Series | XiMethod::PoissonExact => xi_poisson_exact(a, n, self.tolerance),
            XiMethod::QuadraticSurrogate => Ok(xi_quadratic_surrogate(a, self)),
            XiMethod::Coarse => Ok(xi_coarse(a, n)),
            XiMethod::Iterated => Ok(xi_iterated(a, n)),
        }
    }

    /// ξ'(a)/a, finite at a = 0; the gradient of ξ(‖z‖) is z times this.
    pub fn slope(&self, a: f64) -> Result<f64> {
        check_radius_arg(a)?;
        let n = self.n_dim as f64;
        Ok(match self.method {
            XiMethod::Series | XiMethod::PoissonExact => {
                poisson_sums(a, self.n_dim, self.tolerance)?.slope
            }
            XiMethod::QuadraticSurrogate => 1.0 / (a * a + self.c_n1).sqrt(),
            XiMethod::Coarse => 1.0 / (a * a + n).sqrt(),
            XiMethod::Iterated => 2.0 * iterated_du(a * a + n, n),
        })
    }

    /// ξ'(a).
    pub fn derivative(&self, a: f64) -> Result<f64> {
        Ok(a * self.slope(a)?)
    }
}

fn check_radius_arg(a: f64) -> Result<()> {
    if a >= 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "radius must be finite and nonnegative, got {a}"
        )))
    }
}

/// ξ(a) from the alternating power series in λ = a²/2.
pub fn xi_series(a: f64, ev: &XiEvaluator) -> Result<f64> {
    check_radius_arg(a)?;
    let n = ev.n_dim as f64;
    let g = half_mean_pair_distance(ev.n_dim);
    let lambda = 0.5 * a * a;
    let base = (SQRT_2 - 1.0) * g;
    if lambda == 0.0 {
        return Ok(base);
    }
    let scale = (2.0 / PI).sqrt();
    let mut u = -lambda * PI.sqrt() * g / n;
    let mut sum = 0.0;
    for k in 0..ev.max_terms {
        sum += u;
        let value = base - scale * sum;
        if (scale * u).abs() < ev.tolerance * value.abs().max(f64::MIN_POSITIVE) {
            return Ok(value);
        }
        let kf = k as f64;
        u *= -lambda / (kf + 2.0) * (kf + 1.5) / (kf + 1.0 + n / 2.0) * (2.0 * kf + 1.0)
            / (2.0 * kf + 3.0);
        if !u.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "xi power series",
        iterations: ev.max_terms,
        residual: u.abs(),
    })
}

struct PoissonSums {
    /// E‖x − Z‖.
    mean: f64,
    /// ξ'(a)/a.
    slope: f64,
}

/// Poisson-weighted sums Σ p_j r_j and Σ p_j r_j/(2j+N), normalized by Σ p_j.
///
/// Weights start at 1 on the Poisson mode and are recurred outward, so no
/// factorial is ever formed; normalizing by the accumulated mass removes
/// the unknown scale.
fn poisson_sums(a: f64, n_dim: usize, tol: f64) -> Result<PoissonSums> {
    let lambda = 0.5 * a * a;
    let half_n = n_dim as f64 / 2.0;
    let mode = lambda.floor();
    let m = mode as usize;
    let r_mode = gamma_ratio_half(half_n + mode)?;
    let cutoff = tol.max(f64::EPSILON) * 1e-2;

    let mut mass = 0.0;
    let mut s_mean = 0.0;
    let mut s_slope = 0.0;
    let mut add = |p: f64, r: f64, j: usize| {
        mass += p;
        s_mean += p * r;
        s_slope += p * r / (2.0 * j as f64 + n_dim as f64);
    };

    let (mut p, mut r) = (1.0, r_mode);
    let mut j = m;
    loop {
        add(p, r, j);
        if lambda == 0.0 {
            break;
        }
        let jf = j as f64;
        r *= (jf + half_n + 0.5) / (jf + half_n);
        p *= lambda / (jf + 1.0);
        j += 1;
        if p < cutoff {
            break;
        }
    }
    let (mut p, mut r) = (1.0, r_mode);
    let mut j = m;
    while j > 0 {
        let jf = j as f64;
        p *= jf / lambda;
        r *= (jf - 1.0 + half_n) / (jf - 0.5 + half_n);
        j -= 1;
        if p < cutoff {
            break;
        }
        add(p, r, j);
    }
    Ok(PoissonSums {
        mean: SQRT_2 * s_mean / mass,
        slope: SQRT_2 * s_slope / mass,
    })
}

/// E‖x − Z‖ for ‖x‖ = a, Z ~ N(0, I_N).
pub fn mean_distance_to_normal(a: f64, n_dim: usize, tolerance: f64) -> Result<f64> {
    check_radius_arg(a)?;
    if n_dim == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    Ok(poisson_sums(a, n_dim, tolerance)?.mean)
}

/// ξ(a) from the Poisson mixture of chi means.
pub fn xi_poisson_exact(a: f64, n_dim: usize, tolerance: f64) -> Result<f64> {
    Ok(mean_distance_to_normal(a, n_dim, tolerance)? - half_mean_pair_distance(n_dim))
}

/// dξ/da, from differences of the chi-mean sums in dimensions N+2 and N.
pub fn xi_gradient(a: f64, n_dim: usize) -> Result<f64> {
    check_radius_arg(a)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(a * poisson_sums(a, n_dim, 1e-15)?.slope)
}

pub fn xi_quadratic_surrogate(a: f64, ev: &XiEvaluator) -> f64 {
    ev.c_n0 + (a * a + ev.c_n1).sqrt()
}

pub fn xi_coarse(a: f64, n_dim: usize) -> f64 {
    let n = n_dim as f64;
    (a * a + n).sqrt() - (n.sqrt() - xi_zero(n_dim))
}

pub fn xi_iterated(a: f64, n_dim: usize) -> f64 {
    let n = n_dim as f64;
    let u = a * a + n;
    u.sqrt() * (1.0 - (2.0 * a * a + n) / (4.0 * u * u) + (3.0 * a * a + n) / (2.0 * u * u * u))
        - half_mean_pair_distance(n_dim)
}

/// d/du of the iterated expansion written in u = a² + N.
fn iterated_du(u: f64, n: f64) -> f64 {
    0.5 * u.powf(-0.5) + 0.25 * u.powf(-1.5) - 1.5 * (n / 4.0 + 1.5) * u.powf(-2.5)
        + 2.5 * n * u.powf(-3.5)
}

// ---------------------------------------------------------------------------
// Latent loss: distance from a batch of codes to N(0, I).

/// Squared distance between the uniform cloud `codes` and N(0, I).
///
/// `total = (1/K)Σ ξ(‖z_k‖) − (1/(2K²))ΣΣ‖z_k − z_k'‖`. In the report the
/// cross term is `(1/K)Σ ξ(‖z_k‖) + G`, `self_term_a` is the normal-side
/// constant G and `self_term_b` the code self term.
pub fn latent_loss(codes: &PointCloud, ev: &XiEvaluator) -> Result<EnergyLossReport> {
    if codes.dim() != ev.n_dim {
        return Err(Error::DimensionMismatch {
            left: codes.dim(),
            right: ev.n_dim,
        });
    }
    if codes.is_empty() {
        return Err(Error::Shape("latent loss needs at least one code".into()));
    }
    let k = codes.len() as f64;
    let xi: Vec<Result<f64>> = map_indexed(codes.len(), |i| ev.value(norm(codes.point(i))));
    let xi = xi.into_iter().collect::<Result<Vec<f64>>>()?;
    let mean_xi = tree_sum(&xi) / k;
    let self_b = self_sum(&EnergyKernel, &codes.uniform())?;
    let g = half_mean_pair_distance(ev.n_dim);
    Ok(EnergyLossReport {
        cross_term: mean_xi + g,
        self_term_a: g,
        self_term_b: self_b,
        total: mean_xi - self_b,
    })
}

/// Gradient of `latent_loss(codes).total` with respect to every code, row-major K×N.
///
/// Coincident codes contribute a zero subgradient to the pairwise term.
pub fn latent_loss_gradient(codes: &PointCloud, ev: &XiEvaluator) -> Result<Vec<f64>> {
    if codes.dim() != ev.n_dim {
        return Err(Error::DimensionMismatch {
            left: codes.dim(),
            right: ev.n_dim,
        });
    }
    let n = codes.dim();
    let kk = codes.len();
    let kf = kk as f64;
    let rows: Vec<Result<Vec<f64>>> = map_indexed(kk, |i| {
        let z = codes.point(i);
        let slope = ev.slope(norm(z))?;
        let mut pair = vec![0.0; n];
        for j in 0..kk {
            if j == i {
                continue;
            }
            let w = codes.point(j);
            let d = dist(z, w);
            if d > 0.0 {
                for c in 0..n {
                    pair[c] += (z[c] - w[c]) / d;
                }
            }
        }
        Ok((0..n)
            .map(|c| z[c] * slope / kf - pair[c] / (kf * kf))
            .collect())
    });
    let mut out = Vec::with_capacity(kk * n);
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_normal_cloud, Seed};
    use crate::special::{normal_cdf, normal_pdf};
    use proptest::prelude::*;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(rows).unwrap()
    }

    #[test]
    fn kernel_rejects_negative() {
        assert_eq!(energy_kernel(2.5).unwrap(), 2.5);
        assert!(energy_kernel(-1.0).is_err());
    }

    #[test]
    fn small_examples() {
        let r = xs_energy_distance_sq(&cloud(&[&[1.0, 2.0, 2.0]]), &cloud(&[&[0.0, 0.0, 0.0]]))
            .unwrap();
        assert_eq!(r.total, 3.0);
        let r = xs_energy_distance_sq(&cloud(&[&[-1.0], &[1.0]]), &cloud(&[&[0.0]])).unwrap();
        assert_eq!(
            (r.cross_term, r.self_term_a, r.self_term_b, r.total),
            (1.0, 0.5, 0.0, 0.5)
        );
        let a = sample_normal_cloud(3, 20, Seed::new(1));
        assert_eq!(xs_energy_distance_sq(&a, &a).unwrap().total, 0.0);
        assert!(matches!(
            xs_energy_distance_sq(&a, &sample_normal_cloud(2, 3, Seed::new(1))),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn xi_constants() {
        assert!((xi_zero(1) - (SQRT_2 - 1.0) / PI.sqrt()).abs() < 1e-15);
        let ev = XiEvaluator::new(8, XiMethod::QuadraticSurrogate).unwrap();
        assert!((xi_second_derivative_zero(8) - 0.342_703).abs() < 1e-6);
        assert!((ev.c_n1 - 8.514_595).abs() < 1e-5);
        assert!((ev.c_n0 + 2.114_975).abs() < 1e-5);
        assert!((ev.c_n0 + ev.c_n1.sqrt() - xi_zero(8)).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // E|a − Z| = a(2Φ(a) − 1) + 2φ(a).
        let g = 1.0 / PI.sqrt();
        for a in [0.0, 0.3, 1.0, 2.0, 5.0, 12.0] {
            let exact = a * (2.0 * normal_cdf(a) - 1.0) + 2.0 * normal_pdf(a) - g;
            let p = xi_poisson_exact(a, 1, 1e-15).unwrap();
            assert!(
                (p - exact).abs() < 1e-13 * exact.max(1.0),
                "a={a}: {p} vs {exact}"
            );
        }
    }

    #[test]
    fn series_matches_poisson() {
        for n in [1, 2, 8, 64] {
            let ev = XiEvaluator::new(n, XiMethod::Series).unwrap();
            for i in 0..=20 {
                let a = 0.1 * i as f64;
                let s = xi_series(a, &ev).unwrap();
                let p = xi_poisson_exact(a, n, 1e-15).unwrap();
                assert!((s - p).abs() <= 1e-8, "N={n} a={a}: {s} vs {p}");
            }
        }
    }

    #[test]
    fn series_reports_non_convergence() {
        let mut ev = XiEvaluator::new(2, XiMethod::Series).unwrap();
        ev.max_terms = 5;
        assert!(matches!(
            xi_series(3.0, &ev),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn gradient_matches_literal_recurrence() {
        // a(g^{N+2}(a) − g^N(a)) with g^N(a) = E‖x − Z‖ in dimension N.
        for (a, n) in [(0.3, 1), (1.0, 8), (2.5, 3), (7.0, 64)] {
            let lit = a
                * (mean_distance_to_normal(a, n + 2, 1e-15).unwrap()
                    - mean_distance_to_normal(a, n, 1e-15).unwrap());
            let g = xi_gradient(a, n).unwrap();
            assert!((lit - g).abs() < 1e-12, "{a} {n}: {lit} vs {g}");
        }
        assert_eq!(xi_gradient(0.0, 4).unwrap(), 0.0);
        assert!((xi_gradient(50.0, 8).unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn variant_derivatives_match_finite_differences() {
        for method in [
            XiMethod::QuadraticSurrogate,
            XiMethod::Coarse,
            XiMethod::Iterated,
            XiMethod::PoissonExact,
        ] {
            let ev = XiEvaluator::new(8, method).unwrap();
            for a in [0.2, 0.7, 3.0] {
                let h = 1e-5;
                let fd = (ev.value(a + h).unwrap() - ev.value(a - h).unwrap()) / (2.0 * h);
                assert!(
                    (fd - ev.derivative(a).unwrap()).abs() < 1e-8,
                    "{method:?} {a}"
                );
            }
        }
    }

    #[test]
    fn variants_at_zero() {
        for n in [1, 2, 8] {
            let z = xi_zero(n);
            let ev = XiEvaluator::new(n, XiMethod::QuadraticSurrogate).unwrap();
            assert!((xi_quadratic_surrogate(0.0, &ev) - z).abs() < 1e-14);
            assert!((xi_coarse(0.0, n) - z).abs() < 1e-14);
        }
        // The three-term expansion is a large-radius approximation; at the origin
        // in N = 8 it sits 2.5% above the exact value.
        let it = xi_iterated(0.0, 8);
        assert!((it - 0.823_514).abs() < 1e-6);
        assert!((it / xi_zero(8) - 1.0).abs() < 0.03);
    }

    #[test]
    fn variants_agree_at_large_radius() {
        for n in [2, 8] {
            let a = 200.0;
            let exact = xi_poisson_exact(a, n, 1e-15).unwrap();
            assert!((xi_coarse(a, n) - exact).abs() / a < 1e-2);
            assert!((xi_iterated(a, n) - exact).abs() / a < 1e-6);
        }
    }

    #[test]
    fn latent_loss_small_cases() {
        let ev = XiEvaluator::new(3, XiMethod::QuadraticSurrogate).unwrap();
        let one = latent_loss(&cloud(&[&[0.0, 0.0, 0.0]]), &ev).unwrap();
        assert!((one.total - xi_zero(3)).abs() < 1e-14);
        let two = latent_loss(&cloud(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]), &ev).unwrap();
        assert!((two.total - xi_zero(3)).abs() < 1e-14);
        let z = [0.3, -0.4, 1.2];
        let g = latent_loss_gradient(&cloud(&[&z]), &ev).unwrap();
        let s = (0.09 + 0.16 + 1.44 + ev.c_n1).sqrt();
        for c in 0..3 {
            assert!((g[c] - z[c] / s).abs() < 1e-15);
        }
        let origin = latent_loss_gradient(&cloud(&[&[0.0; 3], &[0.0; 3]]), &ev).unwrap();
        assert!(origin.iter().all(|v| *v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distance_is_symmetric_and_nonnegative(
            a in proptest::collection::vec(-5.0f64..5.0, 3..60),
            b in proptest::collection::vec(-5.0f64..5.0, 3..60),
        ) {
            let a = PointCloud::new(a[..a.len() / 3 * 3].to_vec(), 3).unwrap();
            let b = PointCloud::new(b[..b.len() / 3 * 3].to_vec(), 3).unwrap();
            let ab = xs_energy_distance_sq(&a, &b).unwrap();
            let ba = xs_energy_distance_sq(&b, &a).unwrap();
            prop_assert_eq!(ab.total.to_bits(), ba.total.to_bits());
            prop_assert!(ab.total >= -1e-12);
            prop_assert!((ab.total - (ab.cross_term - ab.self_term_a - ab.self_term_b)).abs() <= 1e-12);
        }

        #[test]
        fn latent_report_identity(seed in 0u64..1000, k in 1usize..40) {
            let codes = sample_normal_cloud(4, k, Seed::new(seed));
            let ev = XiEvaluator::new(4, XiMethod::PoissonExact).unwrap();
            let r = latent_loss(&codes, &ev).unwrap();
            prop_assert!((r.total - (r.cross_term - r.self_term_a - r.self_term_b)).abs() <= 1e-12);
        }
    }
}
