//! Independent reference computations: Monte-Carlo slicing, Monte-Carlo
//! normal moments, exact small-instance Wasserstein, the mixture-geodesic
//! identity, the two-Dirac counterexample family and finite-difference checks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cloud::{dist_sq, PointCloud, WeightedCloud};
use crate::energy::{weighted_distance_sq, RadialKernel};
use crate::error::{Error, Result};
use crate::sampling::{draw_direction, mc_mean, OracleEstimate, Seed};
use crate::sobolev::{hs_dual_norm_sq_1d, HsParams};
use crate::special::gamma_ratio_half;

/// E|θ₁| for θ uniform on S^{N−1}: Γ(N/2)/(√π Γ((N+1)/2)).
pub fn mean_abs_direction_cosine(n_dim: usize) -> f64 {
    1.0 / (std::f64::consts::PI.sqrt() * gamma_ratio_half(n_dim as f64 / 2.0).expect("N ≥ 1"))
}

/// Squared 1-D distance between two uniform clouds on the line under `kernel1d`.
fn projected_distance_sq(pa: &[f64], pb: &[f64], kernel1d: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
    let pair = |x: &[f64], y: &[f64]| -> f64 {
        let mut s = 0.0;
        for u in x {
            for v in y {
                s += kernel1d((u - v).abs());
            }
        }
        s / (x.len() * y.len()) as f64
    };
    pair(pa, pb) - 0.5 * pair(pa, pa) - 0.5 * pair(pb, pb)
}

/// Sphere average of the projected 1-D squared distance, by Monte-Carlo over
/// directions. For the energy kernel (`|r|`) this equals E|θ₁| times the
/// canonical distance.
pub fn mc_sliced_distance_sq(
    a: &PointCloud,
    b: &PointCloud,
    kernel1d: &(dyn Fn(f64) -> f64 + Sync),
    n_dirs: usize,
    seed: Seed,
) -> Result<OracleEstimate> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let n = a.dim();
    Ok(mc_mean(n_dirs, seed, |rng| {
        let mut theta = vec![0.0; n];
        draw_direction(rng, &mut theta);
        let proj = |c: &PointCloud| -> Vec<f64> {
            c.points()
                .map(|p| p.iter().zip(&theta).map(|(x, t)| x * t).sum())
                .collect()
        };
        projected_distance_sq(&proj(a), &proj(b), kernel1d)
    }))
}

/// Monte-Carlo estimate of E‖x − Z‖, Z ~ N(0, I).
pub fn mc_dirac_to_normal(x: &[f64], n_samples: usize, seed: Seed) -> OracleEstimate {
    let n = x.len();
    mc_mean(n_samples, seed, |rng| {
        let mut s = 0.0;
        for xi in x.iter().take(n) {
            let z: f64 = rng.sample(StandardNormal);
            s += (xi - z) * (xi - z);
        }
        s.sqrt()
    })
}

/// g(a) = E_θ h(a|θ₁|) by Monte-Carlo over directions, with h the 1-D closed form.
pub fn mc_hs_kernel_sphere(
    a: f64,
    params: &HsParams,
    n_dirs: usize,
    seed: Seed,
) -> Result<OracleEstimate> {
    let n = params.n_dim;
    let s = params.s;
    let est = mc_mean(n_dirs, seed, |rng| {
        let mut theta = vec![0.0; n];
        draw_direction(rng, &mut theta);
        hs_dual_norm_sq_1d(a * theta[0].abs(), s).unwrap_or(f64::NAN)
    });
    if est.value.is_finite() {
        Ok(est)
    } else {
        Err(Error::NonFinite(format!(
            "sphere average of the 1-D kernel at a = {a}"
        )))
    }
}

/// Largest instance accepted by [`exact_w2_sq_small`].
pub const W2_MAX_POINTS: usize = 8;

/// Exact squared 2-Wasserstein distance between two uniform clouds of equal
/// size by enumerating all assignments (Heap's algorithm).
pub fn exact_w2_sq_small(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let k = a.len();
    if k != b.len() {
        return Err(Error::Shape(format!(
            "clouds of sizes {k} and {} have no uniform assignment",
            b.len()
        )));
    }
    if k == 0 || k > W2_MAX_POINTS {
        return Err(Error::SizeLimit(format!(
            "exact assignment supports 1..={W2_MAX_POINTS} points, got {k}"
        )));
    }
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dist_sq(a.point(i), b.point(j))).collect())
        .collect();
    let total = |perm: &[usize]| {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| cost[i][j])
            .sum::<f64>()
    };
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = total(&perm);
    let mut c = vec![0usize; k];
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(total(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best / k as f64)
}

/// Residuals of the mixture-geodesic identity
/// `d²(ν, μ_t) = (1−t) d²(ν, μ₀) + t d²(ν, μ₁) − t(1−t) d²(μ₀, μ₁)`
/// with μ_t = (1−t)μ₀ + tμ₁ represented as a weighted cloud.
pub fn geodesic_identity_residual<K: RadialKernel + ?Sized>(
    kernel: &K,
    mu0: &WeightedCloud,
    mu1: &WeightedCloud,
    nu: &WeightedCloud,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    let d0 = weighted_distance_sq(kernel, nu, mu0)?.total;
    let d1 = weighted_distance_sq(kernel, nu, mu1)?.total;
    let d01 = weighted_distance_sq(kernel, mu0, mu1)?.total;
    t_grid
        .iter()
        .map(|&t| {
            let mt = weighted_mixture(mu0, mu1, t)?;
            let lhs = weighted_distance_sq(kernel, nu, &mt)?.total;
            Ok(lhs - ((1.0 - t) * d0 + t * d1 - t * (1.0 - t) * d01))
        })
        .collect()
}

/// (1−t)μ₀ + tμ₁ for weighted clouds; zero-weight components are dropped so
/// the endpoints reproduce μ₀ and μ₁ exactly.
pub fn weighted_mixture(mu0: &WeightedCloud, mu1: &WeightedCloud, t: f64) -> Result<WeightedCloud> {
    if mu0.dim() != mu1.dim() {
        return Err(Error::DimensionMismatch {
            left: mu0.dim(),
            right: mu1.dim(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "mixture parameter {t} outside [0, 1]"
        )));
    }
    if t == 0.0 {
        return Ok(mu0.clone());
    }
    if t == 1.0 {
        return Ok(mu1.clone());
    }
    let mut data = mu0.cloud.as_slice().to_vec();
    data.extend_from_slice(mu1.cloud.as_slice());
    let weights = mu0
        .weights
        .iter()
        .map(|w| (1.0 - t) * w)
        .chain(mu1.weights.iter().map(|w| t * w))
        .collect();
    Ok(WeightedCloud {
        cloud: PointCloud::new(data, mu0.dim())?,
        weights,
    })
}

/// The two-Dirac family μ_t = ½δ_{(t,2)} + ½δ_{(−t,−2)} and target
/// ν = ½δ_{(1,0)} + ½δ_{(−1,0)}.
pub fn two_dirac_family(t: f64) -> (PointCloud, PointCloud) {
    let mu = PointCloud::from_rows(&[[t, 2.0], [-t, -2.0]]).expect("finite");
    let nu = PointCloud::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).expect("finite");
    (mu, nu)
}

/// Closed form W₂²(ν, μ_t) = 4 + min((1−t)², (1+t)²).
pub fn two_dirac_w2_sq(t: f64) -> f64 {
    4.0 + ((1.0 - t) * (1.0 - t)).min((1.0 + t) * (1.0 + t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub t: f64,
    pub w2sq: f64,
    pub xs_sq: f64,
}

/// t ↦ (W₂², energy distance²) along the two-Dirac family on an even grid.
pub fn scan_two_dirac(t_min: f64, t_max: f64, steps: usize) -> Result<Vec<ScanRow>> {
    if steps < 2 {
        return Err(Error::domain("a scan needs at least two points"));
    }
    (0..steps)
        .map(|i| {
            let t = t_min + (t_max - t_min) * i as f64 / (steps - 1) as f64;
            let (mu, nu) = two_dirac_family(t);
            Ok(ScanRow {
                t,
                w2sq: exact_w2_sq_small(&nu, &mu)?,
                xs_sq: crate::energy::xs_energy_distance_sq(&nu, &mu)?.total,
            })
        })
        .collect()
}

/// Second differences f[i−1] − 2f[i] + f[i+1].
pub fn second_differences(values: &[f64]) -> Vec<f64> {
    values
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .collect()
}

/// Largest |central difference − analytic gradient| over all coordinates.
pub fn finite_diff_check<F, G>(f: F, grad_f: G, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert!(h > 0.0, "step must be positive");
    let g = grad_f(point);
    let mut x = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        worst = worst.max(((fp - fm) / (2.0 * h) - g[i]).abs());
    }
    worst
}
