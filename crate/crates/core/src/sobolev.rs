//! The inhomogeneous H^s kernels.
//!
//! In one dimension two Diracs at distance r are at squared H^{-s} distance
//! `h(r) = ∫ (2 − 2cos(rξ)) (1+ξ²)^{-s} dξ`
//! `     = 2C − (4√π/Γ(s)) (r/2)^{s−½} K_{s−½}(r)`, with `C = √π Γ(s−½)/Γ(s)`.
//! The sliced kernel in R^N averages h over directions:
//! `g(a) = E_θ h(a|θ₁|)`, which increases from 0 to the limit 2C.
//!
//! Three independent evaluation routes are provided: deterministic
//! quadrature, the empirical characteristic function of an auxiliary
//! variable V (here), and a sphere Monte-Carlo over the closed form (in
//! [`crate::oracle`]).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};

use crate::cloud::fmt_f64;
use crate::error::{Error, Result};
use crate::parallel::{block_count, map_indexed, MC_BLOCK};
use crate::quadrature::{make_quadrature, QuadratureKind, QuadratureRule};
use crate::sampling::{mc_mean, OracleEstimate, Seed};
use crate::special::{bessel_k, gamma, gamma_ratio_half};

/// Regularity s > ½ and ambient dimension N ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParams {
    pub s: f64,
    pub n_dim: usize,
}

impl HsParams {
    pub fn new(s: f64, n_dim: usize) -> Result<Self> {
        if !(s.is_finite() && s > 0.5) {
            return Err(Error::domain(format!(
                "regularity s must exceed 1/2, got {s}"
            )));
        }
        if n_dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        Ok(Self { s, n_dim })
    }

    /// The a → ∞ limit 2√π Γ(s−½)/Γ(s), also the supremum of g.
    pub fn limit(&self) -> f64 {
        hs_limit(self.s)
    }
}

fn check_s(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "regularity s must exceed 1/2, got {s}"
        )))
    }
}

fn hs_limit(s: f64) -> f64 {
    2.0 * PI.sqrt() / gamma_ratio_half(s - 0.5).expect("s > 1/2")
}

/// Closed-form 1-D kernel h(r).
///
/// Below r = 1e-4 the closed form loses digits to cancellation, so the
/// heat-kernel integral (no cancellation) is used instead.
pub fn hs_dual_norm_sq_1d(r: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(r.is_finite()) {
        return Err(Error::domain(format!("radius must be finite, got {r}")));
    }
    let r = r.abs();
    if r == 0.0 {
        return Ok(0.0);
    }
    if r < 1e-4 {
        return Ok(heat_kernel_h(r, s, QuadOrders::default().spectral, false));
    }
    let nu = s - 0.5;
    let k = bessel_k(nu, r)?;
    let v = hs_limit(s) - 4.0 * PI.sqrt() / gamma(s)? * (0.5 * r).powf(nu) * k;
    Ok(v.max(0.0))
}

/// Orders of the deterministic quadrature: Gauss-Legendre nodes per angular
/// panel, and trapezoid points per unit of the log-time variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadOrders {
    pub angle: usize,
    pub spectral: usize,
}

impl Default for QuadOrders {
    fn default() -> Self {
        Self {
            angle: 16,
            spectral: 4,
        }
    }
}

impl QuadOrders {
    pub fn doubled(self) -> Self {
        Self {
            angle: 2 * self.angle,
            spectral: 2 * self.spectral,
        }
    }
}

/// h(b) (or h'(b) when `derivative`) from the subordination
/// `(1+ξ²)^{-s} = Γ(s)^{-1} ∫ t^{s−1} e^{−t(1+ξ²)} dt`, which gives
/// `h(b) = (2√π/Γ(s)) ∫ t^{s−½} e^{−t} (1 − e^{−b²/(4t)}) d(ln t)`.
/// The integrand is analytic and decays on both sides in w = ln t, so the
/// trapezoid rule converges geometrically in the number of points.
fn heat_kernel_h(b: f64, s: f64, spectral: usize, derivative: bool) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let nu = s - 0.5;
    let step = 1.0 / spectral as f64;
    let w_hi = 60f64.ln();
    let w_lo = (0.25 * b * b).ln().min(0.0) - 45.0 / nu;
    let k_lo = (w_lo / step).floor() as i64;
    let k_hi = (w_hi / step).ceil() as i64;
    let q = 0.25 * b * b;
    let mut sum = 0.0;
    for k in k_lo..=k_hi {
        let w = k as f64 * step;
        let t = w.exp();
        let base = (w * nu - t).exp();
        let x = q / t;
        sum += if derivative {
            base * (0.5 * b / t) * (-x).exp()
        } else {
            base * -(-x).exp_m1()
        };
    }
    2.0 * PI.sqrt() / gamma(s).expect("s > 1/2") * step * sum
}

/// ∫₀^{π/2} cos^{N−2}ψ dψ, the mass of the direction-cosine density.
fn angle_mass(n_dim: usize) -> f64 {
    0.5 * PI.sqrt() / gamma_ratio_half((n_dim as f64 - 1.0) / 2.0).expect("N ≥ 2")
}

/// Panel edges on [0, π/2], geometrically refined toward 0 where h(a sin ψ)
/// changes on the scale 1/a.
fn angle_panels(a: f64) -> Vec<f64> {
    let top = std::f64::consts::FRAC_PI_2;
    let scale = if a > 0.0 { top.min(1.0 / a) } else { top };
    let mut edges = vec![0.0];
    let mut e = scale / 64.0;
    while e < top {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(top);
    edges
}

fn sliced_integral(
    a: f64,
    params: &HsParams,
    orders: QuadOrders,
    rule: &QuadratureRule,
    derivative: bool,
) -> f64 {
    let s = params.s;
    let n = params.n_dim;
    if n == 1 {
        return heat_kernel_h(a, s, orders.spectral, derivative);
    }
    let edges = angle_panels(a);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        total += rule.integrate_on(pair[0], pair[1], |psi| {
            let (sin, cos) = psi.sin_cos();
            let w = cos.powi(n as i32 - 2);
            if derivative {
                w * sin * heat_kernel_h(a * sin, s, orders.spectral, true)
            } else {
                w * heat_kernel_h(a * sin, s, orders.spectral, false)
            }
        });
    }
    total / angle_mass(n)
}

fn legendre(orders: QuadOrders) -> Result<QuadratureRule> {
    if orders.spectral == 0 {
        return Err(Error::UnsupportedOrder {
            order: 0,
            reason: "spectral order must be positive".into(),
        });
    }
    make_quadrature(QuadratureKind::GaussLegendre, orders.angle)
}

fn checked(a: f64, params: &HsParams, orders: QuadOrders, derivative: bool) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::domain(format!("radius must be finite, got {a}")));
    }
    let sign = if derivative && a < 0.0 { -1.0 } else { 1.0 };
    let a = a.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let v = sliced_integral(a, params, orders, &legendre(orders)?, derivative);
    let fine = orders.doubled();
    let v2 = sliced_integral(a, params, fine, &legendre(fine)?, derivative);
    let change = (v2 - v).abs();
    if change > 1e-6 * v2.abs() && change > 1e-300 {
        return Err(Error::NonConvergence {
            what: "H^s kernel quadrature",
            iterations: fine.angle,
            residual: change / v2.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(sign * v2)
}

/// g(a) by quadrature, refused if doubling both orders moves the value by
/// more than 1e-6 relative. Returns the refined value.
pub fn hs_kernel_quadrature(a: f64, params: &HsParams, orders: QuadOrders) -> Result<f64> {
    checked(a, params, orders, false)
}

/// g'(a) by quadrature; odd in a.
pub fn hs_kernel_derivative(a: f64, params: &HsParams, orders: QuadOrders) -> Result<f64> {
    checked(a, params, orders, true)
}

/// g''(0) = √π Γ(s − 3/2) / (N Γ(s)), defined for s > 3/2.
pub fn hs_kernel_second_derivative_zero(params: &HsParams) -> Result<f64> {
    if params.s <= 1.5 {
        return Err(Error::domain(format!(
            "second derivative at zero needs s > 3/2, got {}",
            params.s
        )));
    }
    Ok(PI.sqrt() / gamma_ratio_half(params.s - 1.5)? / (params.s - 1.0) / params.n_dim as f64)
}

/// Draws of V = θ₁ T/√(2s−1), T ~ Student-t(2s−1), θ uniform on S^{N−1};
/// θ₁ is realized as X₁/√(X₁² + Y) with Y ~ χ²(N−1). Then
/// g(a) = 2C (1 − E cos(aV)).
pub fn sample_v(params: &HsParams, count: usize, seed: Seed) -> Vec<f64> {
    let blocks = map_indexed(block_count(count, MC_BLOCK), |b| {
        let mut rng = seed.block_rng(b);
        let len = MC_BLOCK.min(count - b * MC_BLOCK);
        (0..len)
            .map(|_| draw_v(params, &mut rng))
            .collect::<Vec<_>>()
    });
    blocks.into_iter().flatten().collect()
}

fn draw_v<R: Rng>(params: &HsParams, rng: &mut R) -> f64 {
    let dof = 2.0 * params.s - 1.0;
    let t: f64 = StudentT::new(dof).expect("dof > 0").sample(rng);
    let x: f64 = rng.sample(StandardNormal);
    let y = if params.n_dim > 1 {
        ChiSquared::new((params.n_dim - 1) as f64)
            .expect("dof > 0")
            .sample(rng)
    } else {
        0.0
    };
    let denom = (x * x + y).sqrt();
    let theta = if denom > 0.0 { x / denom } else { 1.0 };
    theta * t / dof.sqrt()
}

/// g(a) from the empirical characteristic function of V.
pub fn hs_kernel_charfn(a: f64, params: &HsParams, count: usize, seed: Seed) -> OracleEstimate {
    let c = params.limit();
    mc_mean(count, seed, |rng| {
        c * (1.0 - (a * draw_v(params, rng)).cos())
    })
}

/// g at several radii from one shared set of V draws.
pub fn hs_kernel_charfn_many(
    radii: &[f64],
    params: &HsParams,
    count: usize,
    seed: Seed,
) -> Vec<OracleEstimate> {
    let v = sample_v(params, count, seed);
    let c = params.limit();
    map_indexed(radii.len(), |i| {
        let a = radii[i];
        let vals: Vec<f64> = v.iter().map(|x| c * (1.0 - (a * x).cos())).collect();
        let n = vals.len() as f64;
        let mean = crate::parallel::tree_sum(&vals) / n;
        let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        OracleEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
            n_samples: count,
            seed,
        }
    })
}

// ---------------------------------------------------------------------------
// Tables.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableMethod {
    Quadrature(QuadOrders),
    CharFn { count: usize, seed: Seed },
}

/// g on a grid over [0, a_max] with monotone cubic interpolation.
///
/// Interpolation runs in x = a^p with p = min(1, 2s−1): near 0 the kernel
/// behaves like a^{2s−1} when s < 1, which is linear in x. For s ≥ 1 the
/// grid is uniform in a.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub params: HsParams,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    coords: Vec<f64>,
    power: f64,
    slopes: Vec<f64>,
    pub method: TableMethod,
    /// Largest interpolation error at grid midpoints, relative to the limit 2C.
    pub midpoint_error: f64,
}

/// Interpolation tolerance enforced for quadrature tables.
pub const TABLE_TOLERANCE: f64 = 1e-4;

fn evaluate_method(
    a: f64,
    params: &HsParams,
    method: &TableMethod,
    v: Option<&[f64]>,
) -> Result<f64> {
    match method {
        TableMethod::Quadrature(orders) => {
            let rule = legendre(*orders)?;
            Ok(sliced_integral(a, params, *orders, &rule, false))
        }
        TableMethod::CharFn { .. } => {
            let v = v.expect("samples drawn");
            let c = params.limit();
            let m = v.iter().map(|x| (a * x).cos()).sum::<f64>() / v.len() as f64;
            Ok(c * (1.0 - m))
        }
    }
}

pub fn build_kernel_table(
    params: HsParams,
    a_max: f64,
    n_grid: usize,
    method: TableMethod,
) -> Result<KernelTable> {
    if n_grid < 16 {
        return Err(Error::domain(format!(
            "table needs at least 16 grid points, got {n_grid}"
        )));
    }
    if !(a_max.is_finite() && a_max > 0.0) {
        return Err(Error::domain(format!(
            "table range must be positive, got {a_max}"
        )));
    }
    let samples = match method {
        TableMethod::CharFn { count, seed } => Some(sample_v(&params, count, seed)),
        TableMethod::Quadrature(_) => None,
    };
    let v = samples.as_deref();
    let power = grid_power(params.s);
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| {
            if i + 1 == n_grid {
                a_max
            } else {
                a_max * (i as f64 / (n_grid - 1) as f64).powf(1.0 / power)
            }
        })
        .collect();
    let raw: Vec<Result<f64>> =
        map_indexed(n_grid, |i| evaluate_method(grid[i], &params, &method, v));
    let mut values = raw.into_iter().collect::<Result<Vec<_>>>()?;
    values[0] = 0.0;

    let limit = params.limit();
    if let TableMethod::Quadrature(orders) = method {
        // Spot-check convergence at a few nodes against doubled orders.
        for i in (0..n_grid).step_by(n_grid / 8).chain([n_grid - 1]) {
            hs_kernel_quadrature(grid[i], &params, orders)?;
        }
        if let Some(i) = (1..n_grid).find(|&i| values[i] < values[i - 1] - 1e-12 * limit) {
            return Err(Error::NonConvergence {
                what: "monotone kernel table",
                iterations: i,
                residual: values[i - 1] - values[i],
            });
        }
    }
    // Monte-Carlo tables are made monotone by a running maximum; all tables
    // are clamped to the theoretical bound.
    let mut running: f64 = 0.0;
    for v in values.iter_mut() {
        running = running.max(*v);
        *v = running.min(limit);
    }

    let coords: Vec<f64> = grid.iter().map(|a| a.powf(power)).collect();
    let slopes = fritsch_carlson(&coords, &values);
    let mut table = KernelTable {
        params,
        grid,
        coords,
        power,
        values,
        slopes,
        method,
        midpoint_error: 0.0,
    };

    let mids: Vec<Result<f64>> = map_indexed(n_grid - 1, |i| {
        let m = (0.5 * (table.coords[i] + table.coords[i + 1])).powf(1.0 / power);
        let exact = evaluate_method(m, &params, &method, v)?.clamp(0.0, limit);
        Ok((table.eval(m) - exact).abs() / limit)
    });
    let err = mids
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    table.midpoint_error = err;
    if matches!(method, TableMethod::Quadrature(_)) && err > TABLE_TOLERANCE {
        return Err(Error::NonConvergence {
            what: "kernel table interpolation",
            iterations: n_grid,
            residual: err,
        });
    }
    Ok(table)
}

fn grid_power(s: f64) -> f64 {
    (2.0 * s - 1.0).min(1.0)
}

/// Monotone cubic Hermite slopes (Fritsch-Carlson limiter).
fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = end_slope(x[1] - x[0], x[2] - x[1], delta[0], delta[1]);
    m[n - 1] = end_slope(
        x[n - 1] - x[n - 2],
        x[n - 2] - x[n - 3],
        delta[n - 2],
        delta[n - 3],
    );
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            0.5 * (delta[i - 1] + delta[i])
        };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let al = m[i] / delta[i];
        let be = m[i + 1] / delta[i];
        let r = al * al + be * be;
        if r > 9.0 {
            let t = 3.0 / r.sqrt();
            m[i] = t * al * delta[i];
            m[i + 1] = t * be * delta[i];
        }
    }
    m
}

/// Second-order one-sided end slope, limited to keep the end interval monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

impl KernelTable {
    pub fn max_radius(&self) -> f64 {
        *self.grid.last().expect("nonempty grid")
    }

    /// Interpolated g(|r|); radii beyond the grid return the last value
    /// (callers check [`KernelTable::max_radius`] or use [`KernelTable::try_eval`]).
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.grid.len();
        if r >= self.max_radius() {
            return self.values[n - 1];
        }
        let x = r.powf(self.power);
        let guess = ((x / self.coords[n - 1]) * (n - 1) as f64) as usize;
        let mut i = guess.min(n - 2);
        while i > 0 && self.coords[i] > x {
            i -= 1;
        }
        while i + 2 < n && self.coords[i + 1] <= x {
            i += 1;
        }
        let (x0, x1) = (self.coords[i], self.coords[i + 1]);
        let dx = x1 - x0;
        let t = (x - x0) / dx;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
            + (t3 - 2.0 * t2 + t) * dx * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.values[i + 1]
            + (t3 - t2) * dx * self.slopes[i + 1];
        v.clamp(0.0, self.params.limit())
    }

    pub fn try_eval(&self, r: f64) -> Result<f64> {
        if r.abs() > self.max_radius() {
            return Err(Error::KernelDomain {
                radius: r.abs(),
                max: self.max_radius(),
            });
        }
        Ok(self.eval(r))
    }

    /// The `#meta` provenance line.
    pub fn meta_line(&self) -> String {
        let method = match self.method {
            TableMethod::Quadrature(o) => format!(
                "method=quad,angle_order={},spectral_order={}",
                o.angle, o.spectral
            ),
            TableMethod::CharFn { count, seed } => {
                format!(
                    "method=charfn,count={count},seed={},stream={}",
                    seed.value, seed.stream_id
                )
            }
        };
        format!(
            "#meta s={},dim={},amax={},grid={},{method},midpoint_error={:e}",
            self.params.s,
            self.params.n_dim,
            self.max_radius(),
            self.grid.len(),
            self.midpoint_error
        )
    }

    /// CSV with the `#meta` line, an `a,g` header and one row per node.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.meta_line();
        out.push_str("\na,g\n");
        for (a, g) in self.grid.iter().zip(&self.values) {
            out.push_str(&fmt_f64(*a));
            out.push(',');
            out.push_str(&fmt_f64(*g));
            out.push('\n');
        }
        out
    }
}

impl crate::energy::RadialKernel for KernelTable {
    fn eval(&self, r: f64) -> f64 {
        KernelTable::eval(self, r)
    }

    fn max_radius(&self) -> f64 {
        KernelTable::max_radius(self)
    }
}
