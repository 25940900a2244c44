//! `xsdist`: command-line front end for the xsobolev toolkit.
//!
//! Every subcommand writes CSV (to the given path, or standard output) whose
//! first line is a `#config` comment holding the fully resolved arguments.
//! Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use xsobolev::cloud::fmt_f64;
use xsobolev::energy::{generic_xs_distance_sq, latent_loss, EnergyLossReport, SobolevKernel};
use xsobolev::oracle;
use xsobolev::parallel::with_threads;
use xsobolev::sobolev::{self, hs_kernel_quadrature};
use xsobolev::train::checkpoint;
use xsobolev::train::data::{read_idx_images, spherical_shell, two_moons, EightGaussians};
use xsobolev::train::{
    self as tr, Activation, Architecture, FlowConfig, FlowInit, LossMode, TrainConfig,
};
use xsobolev::{
    build_kernel_table, Error, HsParams, PointCloud, QuadOrders, Seed, TableMethod, WeightedCloud,
    XiEvaluator, XiMethod,
};

#[derive(Parser, Debug)]
#[command(
    name = "xsdist",
    version,
    about = "X-ray Sobolev distances between point clouds"
)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Squared distance between two point clouds.
    Dist(DistArgs),
    /// Squared distance from a point cloud to N(0, I).
    DistToNormal(DistToNormalArgs),
    /// Tabulate the sliced H^s kernel.
    KernelTable(KernelTableArgs),
    /// Monte-Carlo and exact reference computations.
    Oracle(OracleArgs),
    /// Distance profiles along a one-parameter family of measures.
    ScanGeodesic(ScanArgs),
    /// Particle gradient flow toward N(0, I).
    Flow(FlowArgs),
    /// Train the dense auto-encoder.
    Train(TrainArgs),
    /// Decode N(0, I) samples through a trained checkpoint.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct DistArgs {
    a: PathBuf,
    b: PathBuf,
    /// `energy` or `hs:S` (S > 1/2).
    #[arg(long, default_value = "energy")]
    kernel: String,
    /// Grid size of the H^s kernel table.
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Series,
    Exact,
    Surrogate,
    Coarse,
    Iterated,
}

impl From<MethodArg> for XiMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Series => XiMethod::Series,
            MethodArg::Exact => XiMethod::PoissonExact,
            MethodArg::Surrogate => XiMethod::QuadraticSurrogate,
            MethodArg::Coarse => XiMethod::Coarse,
            MethodArg::Iterated => XiMethod::Iterated,
        }
    }
}

#[derive(Args, Debug)]
struct DistToNormalArgs {
    cloud: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TableMethodArg {
    Quad,
    Charfn,
}

#[derive(Args, Debug)]
struct KernelTableArgs {
    #[arg(long)]
    s: f64,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    amax: f64,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, value_enum, default_value = "quad")]
    method: TableMethodArg,
    #[arg(long, default_value_t = 16)]
    angle_order: usize,
    #[arg(long, default_value_t = 4)]
    spectral_order: usize,
    /// Sample count for the characteristic-function method.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Required for the characteristic-function method.
    #[arg(long)]
    seed: Option<u64>,
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(subcommand)]
    kind: OracleKind,
}

#[derive(Subcommand, Debug)]
enum OracleKind {
    /// Exact ξ(a) against a Monte-Carlo estimate of E‖x − Z‖ − G.
    Xi {
        #[arg(long)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,3,10")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        output: Option<PathBuf>,
    },
    /// Monte-Carlo sliced energy distance against the closed form.
    Sliced {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        dirs: usize,
        #[arg(long)]
        seed: u64,
        output: Option<PathBuf>,
    },
    /// H^s kernel by quadrature, characteristic function and sphere Monte-Carlo.
    Hs {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        output: Option<PathBuf>,
    },
    /// Exact squared 2-Wasserstein distance between two small clouds.
    W2 {
        a: PathBuf,
        b: PathBuf,
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    /// μ_t = {(t,2), (−t,−2)} against ν = {(1,0), (−1,0)}.
    Fig1,
    /// Mixtures (1−t)μ₀ + tμ₁ against ν, read from files.
    Mixture,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long, value_enum, default_value = "fig1")]
    family: Family,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    tmin: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    tmax: f64,
    #[arg(long, default_value_t = 101)]
    steps: usize,
    #[arg(long)]
    mu0: Option<PathBuf>,
    #[arg(long)]
    mu1: Option<PathBuf>,
    #[arg(long)]
    nu: Option<PathBuf>,
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Cluster,
    Normal,
}

#[derive(Args, Debug)]
struct FlowArgs {
    #[arg(long, default_value_t = 256)]
    particles: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "cluster")]
    init: InitArg,
    #[arg(long, default_value_t = 5.0)]
    center: f64,
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
    #[arg(long)]
    backtracking: bool,
    #[arg(long)]
    seed: u64,
    /// Also write the final particles here.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Loss trajectory `step,loss`.
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// `eight-gaussians`, `moons`, `shell:N`, `csv:PATH` or `idx:PATH`.
    #[arg(long, default_value = "eight-gaussians")]
    data: String,
    /// Number of synthetic points, or the maximum number of IDX images.
    #[arg(long, default_value_t = 2048)]
    count: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 100.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    latent: usize,
    /// Drop the reconstruction term from the updates.
    #[arg(long)]
    latent_only: bool,
    #[arg(long, value_enum, default_value = "surrogate")]
    method: MethodArg,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Epoch log `step,loss_rec,loss_lat,loss_global`.
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long)]
    seed: u64,
    output: Option<PathBuf>,
}

/// CSV text under construction, starting with the `#config` line.
struct Csv(String);

impl Csv {
    fn new(config: &impl std::fmt::Debug) -> Self {
        let line = format!("{config:?}").replace('\n', " ");
        Self(format!("#config {line}\n"))
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.0.push_str(s.as_ref());
        self.0.push('\n');
    }

    fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.line(cells.join(","));
    }

    fn emit(self, path: Option<&PathBuf>) -> Result<()> {
        match path {
            Some(p) => {
                std::fs::write(p, self.0).with_context(|| format!("writing {}", p.display()))
            }
            None => {
                print!("{}", self.0);
                Ok(())
            }
        }
    }
}

fn read_cloud(path: &PathBuf) -> Result<PointCloud> {
    PointCloud::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn report_csv(csv: &mut Csv, r: &EnergyLossReport) {
    csv.line("cross,self_a,self_b,total");
    csv.row(&[r.cross_term, r.self_term_a, r.self_term_b, r.total]);
}

fn parse_kernel(name: &str) -> Result<Option<f64>> {
    if name == "energy" {
        return Ok(None);
    }
    let s = name
        .strip_prefix("hs:")
        .ok_or_else(|| anyhow!("unknown kernel {name:?}; expected `energy` or `hs:S`"))?
        .parse::<f64>()
        .with_context(|| format!("bad regularity in {name:?}"))?;
    Ok(Some(s))
}

fn max_pairwise(a: &PointCloud, b: &PointCloud) -> f64 {
    let all: Vec<&[f64]> = a.points().chain(b.points()).collect();
    let mut m: f64 = 0.0;
    for (i, x) in all.iter().enumerate() {
        for y in &all[i + 1..] {
            m = m.max(
                x.iter()
                    .zip(y.iter())
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    m
}

fn cmd_dist(args: &DistArgs) -> Result<()> {
    let a = read_cloud(&args.a)?;
    let b = read_cloud(&args.b)?;
    let kernel = match parse_kernel(&args.kernel)? {
        None => SobolevKernel::Energy,
        Some(s) => {
            let params = HsParams::new(s, a.dim())?;
            let amax = max_pairwise(&a, &b);
            let amax = if amax > 0.0 { amax } else { 1.0 };
            SobolevKernel::Table(build_kernel_table(
                params,
                amax,
                args.grid,
                TableMethod::Quadrature(QuadOrders::default()),
            )?)
        }
    };
    let r = generic_xs_distance_sq(&kernel, &a, &b)?;
    let mut csv = Csv::new(args);
    report_csv(&mut csv, &r);
    csv.emit(args.output.as_ref())
}

fn cmd_dist_to_normal(args: &DistToNormalArgs) -> Result<()> {
    let c = read_cloud(&args.cloud)?;
    let ev = XiEvaluator::new(c.dim(), args.method.into())?;
    let r = latent_loss(&c, &ev)?;
    let mut csv = Csv::new(args);
    report_csv(&mut csv, &r);
    csv.emit(args.output.as_ref())
}

fn cmd_kernel_table(args: &KernelTableArgs) -> Result<()> {
    let params = HsParams::new(args.s, args.dim)?;
    let method = match args.method {
        TableMethodArg::Quad => TableMethod::Quadrature(QuadOrders {
            angle: args.angle_order,
            spectral: args.spectral_order,
        }),
        TableMethodArg::Charfn => TableMethod::CharFn {
            count: args.samples,
            seed: Seed::new(
                args.seed
                    .ok_or_else(|| anyhow!("--seed is required for --method charfn"))?,
            ),
        },
    };
    let table = build_kernel_table(params, args.amax, args.grid, method)?;
    let mut csv = Csv::new(args);
    csv.0.push_str(&table.to_csv_string());
    csv.emit(args.output.as_ref())
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let mut csv = Csv::new(args);
    let out = match &args.kind {
        OracleKind::Xi {
            dim,
            radii,
            samples,
            seed,
            output,
        } => {
            csv.line("a,xi_exact,xi_mc,std_error,z_score");
            let g = xsobolev::energy::half_mean_pair_distance(*dim);
            for &a in radii {
                let exact = xsobolev::xi_poisson_exact(a, *dim, 1e-15)?;
                let mut x = vec![0.0; *dim];
                x[0] = a;
                let est = oracle::mc_dirac_to_normal(&x, *samples, Seed::new(*seed));
                let mc = est.value - g;
                csv.row(&[
                    a,
                    exact,
                    mc,
                    est.std_error,
                    (mc - exact).abs() / est.std_error.max(f64::MIN_POSITIVE),
                ]);
            }
            output
        }
        OracleKind::Sliced {
            a,
            b,
            dirs,
            seed,
            output,
        } => {
            let (a, b) = (read_cloud(a)?, read_cloud(b)?);
            let exact = xsobolev::xs_energy_distance_sq(&a, &b)?.total;
            let est = oracle::mc_sliced_distance_sq(&a, &b, &|r| r, *dirs, Seed::new(*seed))?;
            let c = oracle::mean_abs_direction_cosine(a.dim());
            csv.line("mc_raw,std_error,n_dirs,closed_form,closed_form_times_mean_abs_cosine");
            csv.row(&[est.value, est.std_error, *dirs as f64, exact, exact * c]);
            output
        }
        OracleKind::Hs {
            s,
            dim,
            radii,
            samples,
            seed,
            output,
        } => {
            let params = HsParams::new(*s, *dim)?;
            let cf = sobolev::hs_kernel_charfn_many(radii, &params, *samples, Seed::new(*seed));
            csv.line("a,quadrature,charfn,charfn_se,sphere_mc,sphere_mc_se");
            for (i, &a) in radii.iter().enumerate() {
                let q = hs_kernel_quadrature(a, &params, QuadOrders::default())?;
                let sp = oracle::mc_hs_kernel_sphere(
                    a,
                    &params,
                    *samples,
                    Seed::new(*seed).with_stream(1),
                )?;
                csv.row(&[a, q, cf[i].value, cf[i].std_error, sp.value, sp.std_error]);
            }
            output
        }
        OracleKind::W2 { a, b, output } => {
            let v = oracle::exact_w2_sq_small(&read_cloud(a)?, &read_cloud(b)?)?;
            csv.line("w2sq");
            csv.row(&[v]);
            output
        }
    };
    csv.emit(out.as_ref())
}

fn cmd_scan(args: &ScanArgs) -> Result<()> {
    let mut csv = Csv::new(args);
    match args.family {
        Family::Fig1 => {
            csv.line("t,w2sq,xs_sq");
            for r in oracle::scan_two_dirac(args.tmin, args.tmax, args.steps)? {
                csv.row(&[r.t, r.w2sq, r.xs_sq]);
            }
        }
        Family::Mixture => {
            let need = |p: &Option<PathBuf>, name: &str| -> Result<WeightedCloud> {
                let p = p
                    .as_ref()
                    .ok_or_else(|| anyhow!("--{name} is required for the mixture family"))?;
                Ok(read_cloud(p)?.uniform())
            };
            let (mu0, mu1, nu) = (
                need(&args.mu0, "mu0")?,
                need(&args.mu1, "mu1")?,
                need(&args.nu, "nu")?,
            );
            if !(0.0..=1.0).contains(&args.tmin)
                || !(0.0..=1.0).contains(&args.tmax)
                || args.steps < 2
            {
                bail!("mixture scans need 0 ≤ tmin, tmax ≤ 1 and at least two steps");
            }
            let ts: Vec<f64> = (0..args.steps)
                .map(|i| args.tmin + (args.tmax - args.tmin) * i as f64 / (args.steps - 1) as f64)
                .collect();
            let res = oracle::geodesic_identity_residual(
                &xsobolev::energy::EnergyKernel,
                &mu0,
                &mu1,
                &nu,
                &ts,
            )?;
            csv.line("t,xs_sq,residual");
            for (t, r) in ts.iter().zip(res) {
                let mt = oracle::weighted_mixture(&mu0, &mu1, *t)?;
                let d = xsobolev::energy::weighted_distance_sq(
                    &xsobolev::energy::EnergyKernel,
                    &nu,
                    &mt,
                )?
                .total;
                csv.row(&[*t, d, r]);
            }
        }
    }
    csv.emit(args.output.as_ref())
}

fn cmd_flow(args: &FlowArgs) -> Result<()> {
    let cfg = FlowConfig {
        n_particles: args.particles,
        n_dim: args.dim,
        step_size: args.step,
        n_steps: args.steps,
        evaluator: XiEvaluator::new(args.dim, args.method.into())?,
        seed: Seed::new(args.seed),
        init: match args.init {
            InitArg::Cluster => FlowInit::Cluster {
                center: args.center,
                spread: args.spread,
            },
            InitArg::Normal => FlowInit::Normal,
        },
        backtracking: args.backtracking,
    };
    let res = tr::particle_flow(&cfg)?;
    let mut csv = Csv::new(args);
    let _ = writeln!(
        csv.0,
        "#final loss={} mean_radius={} step={}",
        fmt_f64(*res.losses.last().expect("initial loss")),
        fmt_f64(res.cloud.mean_radius()),
        fmt_f64(res.final_step)
    );
    csv.line("step,loss");
    for (i, l) in res.losses.iter().enumerate() {
        csv.line(format!("{i},{}", fmt_f64(*l)));
    }
    if let Some(p) = &args.cloud {
        let mut c = Csv::new(args);
        c.0.push_str(&res.cloud.to_csv_string());
        c.emit(Some(p))?;
    }
    csv.emit(args.output.as_ref())
}

fn load_data(args: &TrainArgs) -> Result<(PointCloud, Activation)> {
    let seed = Seed::new(args.seed).derive(7);
    let d = &args.data;
    Ok(if d == "eight-gaussians" {
        (
            EightGaussians::default().sample(args.count, seed),
            Activation::Identity,
        )
    } else if d == "moons" {
        (two_moons(args.count, 0.05, seed), Activation::Identity)
    } else if let Some(n) = d.strip_prefix("shell:") {
        let n: usize = n.parse().context("bad shell dimension")?;
        (
            spherical_shell(n, args.count, 3.0, 0.1, seed),
            Activation::Identity,
        )
    } else if let Some(p) = d.strip_prefix("csv:") {
        (read_cloud(&PathBuf::from(p))?, Activation::Identity)
    } else if let Some(p) = d.strip_prefix("idx:") {
        let c = read_idx_images(p, Some(args.count)).with_context(|| format!("reading {p}"))?;
        (c, Activation::Sigmoid)
    } else {
        bail!("unknown dataset {d:?}");
    })
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (data, output) = load_data(args)?;
    let arch = Architecture {
        data_dim: data.dim(),
        hidden: args.hidden.clone(),
        latent_dim: args.latent,
        output,
    };
    let mut cfg = TrainConfig::new(arch, Seed::new(args.seed));
    cfg.lambda = args.lambda;
    cfg.adam.lr = args.lr;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch;
    cfg.mode = if args.latent_only {
        LossMode::LatentOnly
    } else {
        LossMode::Full
    };
    cfg.latent_method = args.method.into();
    let (state, logs) = tr::xsvae_train(&data, &cfg)?;
    if let Some(p) = &args.checkpoint {
        checkpoint::save(&state, p).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut csv = Csv::new(args);
    csv.line(tr::EpochLog::CSV_HEADER);
    for l in &logs {
        csv.line(l.csv_row());
    }
    csv.emit(args.output.as_ref())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let state = checkpoint::load(&args.checkpoint)
        .with_context(|| format!("reading {}", args.checkpoint.display()))?;
    let cloud = tr::generate(&state, args.count, Seed::new(args.seed))?;
    let mut csv = Csv::new(args);
    csv.0.push_str(&cloud.to_csv_string());
    csv.emit(args.output.as_ref())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Dist(a) => cmd_dist(a),
        Command::DistToNormal(a) => cmd_dist_to_normal(a),
        Command::KernelTable(a) => cmd_kernel_table(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::ScanGeodesic(a) => cmd_scan(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

/// 1 for numerical failures, 2 for everything else (usage, I/O, bad input).
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::NonConvergence { .. }
            | Error::Divergence { .. }
            | Error::Overflow(_)
            | Error::NonFinite(_)
            | Error::KernelDomain { .. },
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = std::time::Instant::now();
    let result = match cli.threads {
        Some(n) => with_threads(n, || run(&cli)),
        None => run(&cli),
    };
    log::info!("finished in {:.3?}", start.elapsed());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
