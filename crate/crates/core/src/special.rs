//! Special functions: the gamma family, the modified Bessel function of the
//! second kind, and the standard normal law.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

// B_{2k} / (2k (2k - 1)) for k = 1..7.
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

const STIRLING_CUTOFF: f64 = 20.0;

fn check_gamma_arg(x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "gamma requires finite x > 0, got {x}"
        )));
    }
    Ok(())
}

/// Lanczos sum for Γ(z + 1) = √(2π) t^{z+1/2} e^{-t} A(z), t = z + g + 1/2.
fn lanczos_sum(z: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    a
}

fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv;
    let mut sum = 0.0;
    for c in STIRLING {
        sum += c * term;
        term *= inv2;
    }
    sum
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_gamma_arg(x)?;
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x
        return Ok(ln_gamma(x + 1.0)? - x.ln());
    }
    if x > STIRLING_CUTOFF {
        return Ok((x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(LN_SQRT_2PI + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Euler's gamma function for x > 0.
///
/// Lanczos for moderate arguments, log-space Stirling above 20. Overflows
/// (returns [`Error::Overflow`]) beyond x ≈ 171.6; use [`ln_gamma`] there.
pub fn gamma(x: f64) -> Result<f64> {
    check_gamma_arg(x)?;
    if x < 0.5 {
        return Ok(gamma(x + 1.0)? / x);
    }
    if x > STIRLING_CUTOFF {
        let v = ln_gamma(x)?.exp();
        if !v.is_finite() {
            return Err(Error::Overflow(format!("gamma({x})")));
        }
        return Ok(v);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(SQRT_2PI * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// Γ(x + 1/2) / Γ(x) for x > 0, without forming either gamma value.
///
/// Large arguments use the difference of two Stirling series written so that
/// nothing cancels; small ones recur down from there by
/// r(x) = r(x + 1) · x / (x + 1/2).
pub fn gamma_ratio_half(x: f64) -> Result<f64> {
    check_gamma_arg(x)?;
    let steps = if x >= STIRLING_CUTOFF {
        0
    } else {
        (STIRLING_CUTOFF - x).ceil() as usize
    };
    let y = x + steps as f64;
    let yh = y + 0.5;
    let mut log_ratio = 0.5 * y.ln() + y * (0.5 / y).ln_1p() - 0.5;
    let (inv_y, inv_yh) = (1.0 / y, 1.0 / yh);
    let (mut py, mut pyh) = (inv_y, inv_yh);
    for c in STIRLING {
        log_ratio += c * (pyh - py);
        py *= inv_y * inv_y;
        pyh *= inv_yh * inv_yh;
    }
    let mut r = log_ratio.exp();
    for k in (0..steps).rev() {
        let xk = x + k as f64;
        r *= xk / (xk + 0.5);
    }
    Ok(r)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal distribution function Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

// 1/Γ(z) = Σ_{k≥1} a_k z^k (Abramowitz & Stegun 6.1.34).
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Temme's auxiliary gamma quantities for |mu| ≤ 1/2:
/// (g1, g2, 1/Γ(1+mu), 1/Γ(1-mu)) with
/// g1 = (1/Γ(1-mu) - 1/Γ(1+mu)) / (2 mu), g2 = (1/Γ(1-mu) + 1/Γ(1+mu)) / 2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Γ(1 + z) = Σ a_k z^{k-1}; split into even and odd powers of mu.
    let mut even = 0.0; // Σ_{k odd} a_k mu^{k-1}
    let mut odd = 0.0; // Σ_{k even} a_k mu^{k-2}
    let mu2 = mu * mu;
    for i in (0..RECIP_GAMMA.len()).rev() {
        let k = i + 1;
        if k % 2 == 1 {
            even = even * mu2 + RECIP_GAMMA[i];
        } else {
            odd = odd * mu2 + RECIP_GAMMA[i];
        }
    }
    let gam1 = -odd;
    let gam2 = even;
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (gam1, gam2, gampl, gammi)
}

/// e^x K_mu(x) and e^x K_{mu+1}(x) for |mu| ≤ 1/2, 0 < x < 2 (Temme's series).
fn k_scaled_temme(mu: f64, x: f64) -> Result<(f64, f64)> {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < f64::EPSILON {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < f64::EPSILON {
        1.0
    } else {
        e.sinh() / e
    };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..=10_000usize {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * f64::EPSILON {
            let scale = x.exp();
            return Ok((sum * scale, sum1 * scale * 2.0 / x));
        }
    }
    Err(Error::NonConvergence {
        what: "Temme series for K_nu",
        iterations: 10_000,
        residual: f64::NAN,
    })
}

/// e^x K_mu(x) and e^x K_{mu+1}(x) for |mu| ≤ 1/2, x ≥ 2 (Steed's continued fraction).
fn k_scaled_cf2(mu: f64, x: f64) -> Result<(f64, f64)> {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut converged = false;
    for i in 2..=10_000usize {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "Steed continued fraction for K_nu",
            iterations: 10_000,
            residual: f64::NAN,
        });
    }
    h *= a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    Ok((k_mu, k_mu1))
}

/// e^x K_{n+1/2}(x) from the terminating closed form.
fn k_half_integer_scaled(n: usize, x: f64) -> f64 {
    // K_{n+1/2}(x) = √(π/(2x)) e^{-x} Σ_{k=0}^{n} (n+k)! / (k! (n-k)! (2x)^k)
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..n {
        let (kf, nf) = (k as f64, n as f64);
        term *= (nf + kf + 1.0) * (nf - kf) / ((kf + 1.0) * 2.0 * x);
        sum += term;
    }
    (PI / (2.0 * x)).sqrt() * sum
}

/// Exponentially scaled modified Bessel function of the second kind, e^x K_ν(x).
///
/// K is even in ν, so negative orders are folded onto |ν|.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !nu.is_finite() {
        return Err(Error::domain(format!(
            "bessel_k requires finite order, got {nu}"
        )));
    }
    let nu = nu.abs();
    let twice = 2.0 * nu;
    if twice.fract() == 0.0 && (twice as u64) % 2 == 1 && nu < 1e6 {
        return Ok(k_half_integer_scaled(nu as usize, x));
    }
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k_mu, mut k_mu1) = if x < 2.0 {
        k_scaled_temme(mu, x)?
    } else {
        k_scaled_cf2(mu, x)?
    };
    let xi2 = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    if !k_mu.is_finite() {
        return Err(Error::Overflow(format!("K_{nu}({x}) exceeds double range")));
    }
    Ok(k_mu)
}

/// Modified Bessel function of the second kind K_ν(x) for x > 0.
///
/// Returns [`Error::Overflow`] when the value is not representable (tiny x
/// with large order); large x simply underflows towards 0.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(nu, x)?;
    let v = scaled * (-x).exp();
    if !v.is_finite() {
        return Err(Error::Overflow(format!("K_{nu}({x}) exceeds double range")));
    }
    Ok(v)
}
