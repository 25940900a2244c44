//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//! Runtime budgets count as part of each criterion.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xsobolev::energy::{
    half_mean_pair_distance, xi_quadratic_surrogate, xi_second_derivative_zero, EnergyKernel,
};
use xsobolev::oracle::{
    exact_w2_sq_small, finite_diff_check, geodesic_identity_residual, mc_dirac_to_normal,
    mc_hs_kernel_sphere, scan_two_dirac, second_differences, two_dirac_family,
};
use xsobolev::sobolev::{
    hs_dual_norm_sq_1d, hs_kernel_charfn_many, hs_kernel_quadrature,
    hs_kernel_second_derivative_zero,
};
use xsobolev::special::gamma;
use xsobolev::train::data::EightGaussians;
use xsobolev::train::{
    batch_loss_and_gradient, evaluate, particle_flow, xsvae_train, Activation, Architecture,
    FlowConfig, FlowInit, LossMode, TrainConfig, TrainState,
};
use xsobolev::{
    latent_loss, sample_normal_cloud, xi_gradient, xi_poisson_exact, HsParams, PointCloud,
    QuadOrders, Seed, WeightedCloud, XiEvaluator, XiMethod,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn xi_constant() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 8, 64] {
        let want = (2f64.sqrt() - 1.0) * gamma((n as f64 + 1.0) / 2.0).map_err(e)?
            / gamma(n as f64 / 2.0).map_err(e)?;
        worst = worst.max((xi_poisson_exact(0.0, n, 1e-15).map_err(e)? - want).abs());
    }
    let n1 = xi_poisson_exact(0.0, 1, 1e-15).map_err(e)?;
    let n8 = xi_poisson_exact(0.0, 8, 1e-15).map_err(e)?;
    check(
        worst <= 1e-10,
        format!("max |error| = {worst:.2e}, ξ(0) = {n1:.7} at N=1 and {n8:.7} at N=8"),
    )
}

fn mc_agreement() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, n) in [1usize, 8, 64].into_iter().enumerate() {
        let g = half_mean_pair_distance(n);
        for (j, a) in [0.0, 0.5, 1.0, 3.0, 10.0].into_iter().enumerate() {
            let exact = xi_poisson_exact(a, n, 1e-15).map_err(e)?;
            let mut x = vec![0.0; n];
            x[0] = a;
            let est =
                mc_dirac_to_normal(&x, 1_000_000, Seed::new(2).with_stream((5 * i + j) as u64));
            worst = worst.max(((est.value - g) - exact).abs() / est.std_error);
        }
    }
    check(
        worst <= 4.0,
        format!("largest |z| = {worst:.2} over 15 cases"),
    )
}

fn quartic_law() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [2usize, 8] {
        let ev = XiEvaluator::new(n, XiMethod::QuadraticSurrogate).map_err(e)?;
        let err = |a: f64| -> Result<f64, String> {
            Ok((xi_quadratic_surrogate(a, &ev) - xi_poisson_exact(a, n, 1e-15).map_err(e)?).abs())
        };
        let ratio = err(0.2)? / err(0.1)?;
        ok &= (12.0..=20.0).contains(&ratio);
        detail.push(format!("N={n}: {ratio:.3}"));
    }
    check(ok, format!("error ratios {}", detail.join(", ")))
}

fn gradient_recurrence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.05..12.0);
        let n: usize = rng.random_range(1..=64);
        let f = |x: f64| xi_poisson_exact(x, n, 1e-15);
        let fd = (f(a + h).map_err(e)? - f(a - h).map_err(e)?) / (2.0 * h);
        worst = worst.max((fd - xi_gradient(a, n).map_err(e)?).abs());
    }
    check(
        worst <= 1e-5,
        format!("max |gradient − central difference| = {worst:.2e}"),
    )
}

fn random_weighted(rng: &mut ChaCha8Rng, dim: usize) -> Result<WeightedCloud, String> {
    let k = rng.random_range(1..=6);
    let data: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let cloud = PointCloud::new(data, dim).map_err(e)?;
    WeightedCloud::new(cloud, raw.iter().map(|w| w / total).collect()).map_err(e)
}

fn geodesic_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.random_range(1..=5);
        let mu0 = random_weighted(&mut rng, dim)?;
        let mu1 = random_weighted(&mut rng, dim)?;
        let nu = random_weighted(&mut rng, dim)?;
        let ts: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        for r in geodesic_identity_residual(&EnergyKernel, &mu0, &mu1, &nu, &ts).map_err(e)? {
            worst = worst.max(r.abs());
        }
    }
    check(
        worst <= 1e-10,
        format!("max |residual| = {worst:.2e} over 100 triples"),
    )
}

fn figure_one() -> Outcome {
    let rows = scan_two_dirac(-1.0, 1.0, 101).map_err(e)?;
    let mut exact = true;
    for r in &rows {
        let (mu, nu) = two_dirac_family(r.t);
        let w2 = exact_w2_sq_small(&mu, &nu).map_err(e)?;
        let want = 4.0 + ((1.0 - r.t) * (1.0 - r.t)).min((1.0 + r.t) * (1.0 + r.t));
        exact &= w2 == want && r.w2sq == want;
    }
    let w: Vec<f64> = rows.iter().map(|r| r.w2sq).collect();
    let shape = w[0] == 4.0 && w[100] == 4.0 && w[50] == 5.0 && w[49] < w[50] && w[51] < w[50];
    let xs: Vec<f64> = rows.iter().map(|r| r.xs_sq).collect();
    let min_d2 = second_differences(&xs)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    check(
        exact && shape && min_d2 >= -1e-10,
        format!("W2² exact: {exact}, minima at ±1 and maximum at 0: {shape}, min XS second difference {min_d2:.2e}"),
    )
}

fn hs_cross_validation() -> Outcome {
    let radii = [0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0];
    let mut worst_band: f64 = 0.0;
    for (i, (n, s)) in [(2usize, 1.0), (4, 2.0), (8, 25.0 / 16.0)]
        .into_iter()
        .enumerate()
    {
        let p = HsParams::new(s, n).map_err(e)?;
        let cf = hs_kernel_charfn_many(&radii, &p, 1_000_000, Seed::new(7).with_stream(i as u64));
        for (j, &a) in radii.iter().enumerate() {
            let q = hs_kernel_quadrature(a, &p, QuadOrders::default()).map_err(e)?;
            let sp = mc_hs_kernel_sphere(
                a,
                &p,
                1_000_000,
                Seed::new(8).with_stream((10 * i + j) as u64),
            )
            .map_err(e)?;
            let c = &cf[j];
            let bands = [
                (q - c.value).abs() / (4.0 * c.std_error + 1e-5),
                (q - sp.value).abs() / (4.0 * sp.std_error + 1e-5),
                (c.value - sp.value).abs() / (4.0 * c.std_error.hypot(sp.std_error) + 1e-5),
            ];
            worst_band = bands.into_iter().fold(worst_band, f64::max);
        }
    }
    let mut closed: f64 = 0.0;
    for k in 0..=200 {
        let r = 0.05 * k as f64;
        closed = closed
            .max((hs_dual_norm_sq_1d(r, 1.0).map_err(e)? - 2.0 * PI * (1.0 - (-r).exp())).abs());
    }
    // Far-field value at N=1, where the approach to the limit is exponential.
    let p1 = HsParams::new(2.0, 1).map_err(e)?;
    let far =
        (hs_kernel_quadrature(100.0, &p1, QuadOrders::default()).map_err(e)? - p1.limit()).abs();
    // For N ≥ 2 the approach is algebraic: a·(limit − g(a)) → 4π p_U(0).
    let mut asym: f64 = 0.0;
    for n in [2usize, 4, 8] {
        let p = HsParams::new(2.0, n).map_err(e)?;
        let a = 100.0;
        let deficit = p.limit() - hs_kernel_quadrature(a, &p, QuadOrders::default()).map_err(e)?;
        let nf = n as f64;
        let pu0 = gamma(nf / 2.0).map_err(e)? / (PI.sqrt() * gamma((nf - 1.0) / 2.0).map_err(e)?);
        asym = asym.max((a * deficit / (4.0 * PI * pu0) - 1.0).abs());
    }
    check(
        worst_band <= 1.0 && closed <= 1e-9 && far <= 1e-3 && asym <= 0.02,
        format!(
            "worst pairwise band use {worst_band:.2}, s=1 closed form error {closed:.1e}, \
             |g(100) − π| at N=1 {far:.1e}, far-field law mismatch for N∈{{2,4,8}} {asym:.1e}"
        ),
    )
}

fn second_derivative_zero() -> Outcome {
    let delta = 1e-5;
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [1usize, 8] {
        let p = HsParams::new(2.0, n).map_err(e)?;
        let exact = hs_kernel_second_derivative_zero(&p).map_err(e)?;
        let g = |a: f64| hs_kernel_quadrature(a, &p, QuadOrders::default());
        let fd = (g(delta).map_err(e)? - 2.0 * g(0.0).map_err(e)? + g(-delta).map_err(e)?)
            / (delta * delta);
        let rel = (fd / exact - 1.0).abs();
        ok &= rel <= 1e-4;
        detail.push(format!("N={n}: rel {rel:.1e}"));
    }
    check(ok, format!("step {delta:e}, {}", detail.join(", ")))
}

fn stirling() -> Outcome {
    let vals: Vec<f64> = [16usize, 64, 256]
        .iter()
        .map(|&n| xi_second_derivative_zero(n) * (n as f64).sqrt())
        .collect();
    let dev: Vec<f64> = vals.iter().map(|v| (v - 1.0).abs()).collect();
    let ok = vals.iter().all(|v| (0.9..=1.1).contains(v)) && dev[0] > dev[1] && dev[1] > dev[2];
    check(
        ok,
        format!("ξ''(0)√N = {:.5}, {:.5}, {:.5}", vals[0], vals[1], vals[2]),
    )
}

fn particle_flow_check() -> Outcome {
    let cfg = FlowConfig {
        n_particles: 256,
        n_dim: 8,
        step_size: 0.1,
        n_steps: 2000,
        evaluator: XiEvaluator::new(8, XiMethod::PoissonExact).map_err(e)?,
        seed: Seed::new(10),
        init: FlowInit::Cluster {
            center: 5.0,
            spread: 0.1,
        },
        backtracking: false,
    };
    let res = particle_flow(&cfg).map_err(e)?;
    let loss = latent_loss(&res.cloud, &cfg.evaluator).map_err(e)?.total;
    let radius = res.cloud.mean_radius();
    let rel = (radius / 2.7416 - 1.0).abs();
    check(
        loss <= 1e-2 && rel <= 0.05,
        format!(
            "final loss {loss:.2e}, mean radius {radius:.4} ({:.2}% off)",
            100.0 * rel
        ),
    )
}

fn vae_ablation() -> Outcome {
    let g = EightGaussians {
        radius: 2.0,
        sigma: 0.1,
    };
    let train = g.sample(2048, Seed::new(1));
    let eval = g.sample(2048, Seed::new(2));
    let exact = XiEvaluator::new(2, XiMethod::PoissonExact).map_err(e)?;
    let run = |lambda: f64, mode: LossMode| -> Result<(f64, f64, f64), String> {
        let arch = Architecture {
            data_dim: 2,
            hidden: vec![64, 64],
            latent_dim: 2,
            output: Activation::Identity,
        };
        let mut cfg = TrainConfig::new(arch, Seed::new(3));
        cfg.lambda = lambda;
        cfg.mode = mode;
        cfg.epochs = 800;
        cfg.latent_method = XiMethod::PoissonExact;
        let (r0, _) = evaluate(&TrainState::new(&cfg).map_err(e)?, &eval, &exact).map_err(e)?;
        let (state, _) = xsvae_train(&train, &cfg).map_err(e)?;
        let (r1, l1) = evaluate(&state, &eval, &exact).map_err(e)?;
        Ok((r0, r1, l1))
    };
    let (rec0, rec1, rec_lat) = run(0.0, LossMode::Full)?;
    let (lat0, lat1, lat_lat) = run(100.0, LossMode::LatentOnly)?;
    let (full0, full1, full_lat) = run(100.0, LossMode::Full)?;
    let rec_only = rec0 / rec1 >= 2.0 && rec_lat > 10.0 * full_lat;
    let lat_only = lat_lat <= 1e-2 && (lat1 / lat0 - 1.0).abs() <= 0.1;
    let full = full0 / full1 >= 2.0 && full_lat <= 1e-2;
    check(
        rec_only && lat_only && full,
        format!(
            "reconstruction-only: rec {rec0:.3}→{rec1:.4}, latent {rec_lat:.4}; \
             latent-only: rec {lat0:.3}→{lat1:.3}, latent {lat_lat:.4}; \
             full: rec {full0:.3}→{full1:.4}, latent {full_lat:.4}"
        ),
    )
}

fn end_to_end_gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n_params = 0;
    for (method, output) in [
        (XiMethod::QuadraticSurrogate, Activation::Identity),
        (XiMethod::PoissonExact, Activation::Sigmoid),
    ] {
        let arch = Architecture {
            data_dim: 4,
            hidden: vec![12, 8],
            latent_dim: 3,
            output,
        };
        let mut cfg = TrainConfig::new(arch, Seed::new(11));
        cfg.latent_method = method;
        let state = TrainState::new(&cfg).map_err(e)?;
        n_params = state.n_params();
        let batch = sample_normal_cloud(4, 16, Seed::new(12));
        let at = |p: &[f64]| {
            let mut s = state.clone();
            s.set_params(p).expect("parameter count");
            batch_loss_and_gradient(&s, &batch, LossMode::Full).expect("batch loss")
        };
        let p0 = state.params();
        let scale = at(&p0).1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diff = finite_diff_check(|p| at(p).0.global, |p| at(p).1, &p0, 1e-6);
        worst = worst.max(diff / scale);
    }
    check(
        n_params <= 500 && worst <= 1e-5,
        format!("{n_params} parameters, max |backprop − central difference| / max|gradient| = {worst:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("xi constant", 1, xi_constant),
        ("Monte-Carlo agreement", 30, mc_agreement),
        ("quartic surrogate law", 1, quartic_law),
        ("gradient recurrence", 5, gradient_recurrence),
        ("geodesic identity", 10, geodesic_identity),
        ("two-Dirac counterexample", 5, figure_one),
        ("H^s cross-validation", 60, hs_cross_validation),
        ("second derivative at zero", 10, second_derivative_zero),
        ("Stirling check", 1, stirling),
        ("particle flow", 60, particle_flow_check),
        ("auto-encoder ablation", 300, vae_ablation),
        ("end-to-end gradient", 10, end_to_end_gradient),
    ];
    let mut failures = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
