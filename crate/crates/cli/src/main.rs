use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use maxscore::bootstrap::{
    bootstrap_distribution_at, interval, BootstrapDistribution, BootstrapScheme, IntervalMethod, SmoothedFit,
};
use maxscore::harness::{self, with_workers, ExperimentConfig};
use maxscore::io::{self as mio, DrawsMetadata};
use maxscore::limit::{self, LimitProcessSpec, QuadConfig};
use maxscore::model::{dgp_sample, reconstruct_latent, CovariateSampler, Dataset, DgpSpec, SphereVector};
use maxscore::optimizer::{default_mc_size, maximize_score, smoothed_argmax, OptimizerOptions};
use maxscore::rng::Stream;
use maxscore::smoothing::fit_smoothers;
use maxscore::Error;

const SEED_ENV: &str = "MAXSCORE_SEED";
const WORKERS_ENV: &str = "MAXSCORE_WORKERS";

/// Maximum score estimation with bootstrap inference.
#[derive(Parser, Debug)]
#[command(name = "maxscore", version)]
struct Cli {
    /// Master seed (MAXSCORE_SEED takes precedence).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (MAXSCORE_WORKERS takes precedence).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score maximizer of a dataset (JSON).
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Smoothed population maximizer of the kernel fit (JSON).
    SmoothCenter {
        #[arg(long)]
        data: PathBuf,
        /// Monte Carlo size; max(10 n, 10^4) by default.
        #[arg(long)]
        mc_size: Option<usize>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Bootstrap draws `rep,delta_1..delta_d` (CSV).
    Bootstrap {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Also write the run metadata as JSON here.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Bootstrap confidence interval for one coordinate (JSON).
    Ci {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Zero-based coordinate.
        #[arg(long, default_value_t = 0)]
        coordinate: usize,
        #[arg(long, value_enum, default_value_t = IntervalArg::Root)]
        interval: IntervalArg,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Coverage experiment from a JSON config (CSV).
    Coverage {
        #[arg(long)]
        config: PathBuf,
    },
    /// Draws from the limit law (CSV).
    Limit {
        /// Published constants, the covariance-implied constants, or a model
        /// whose limit is computed by quadrature.
        #[arg(long, value_enum, default_value_t = LimitSource::Published)]
        source: LimitSource,
        #[arg(long, value_enum, default_value_t = ModelArg::HeteroNormal)]
        model: ModelArg,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Brownian scale `a` of `a Z(s) - b s^2`; requires --b.
        #[arg(long, requires = "b")]
        a: Option<f64>,
        #[arg(long, requires = "a")]
        b: Option<f64>,
        #[arg(long = "B", default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 6.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Latent-variable draws `v_1..v_d,u,w` matching the model's propensity (CSV).
    ReconstructLatent {
        #[arg(long, value_enum, default_value_t = ModelArg::HeteroNormal)]
        model: ModelArg,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Histogram `bin_left,bin_right,count,density` of one CSV column.
    Hist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Dataset from a built-in design (CSV `x1..xd,y`).
    Simulate {
        #[arg(long, value_enum, default_value_t = ModelArg::HeteroNormal)]
        model: ModelArg,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args, Debug)]
struct OptArgs {
    #[arg(long, default_value_t = OptimizerOptions::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = OptimizerOptions::default().grid_size)]
    grid_size: usize,
}

impl OptArgs {
    fn options(&self) -> OptimizerOptions {
        OptimizerOptions {
            restarts: self.restarts,
            grid_size: self.grid_size,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct SchemeArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Subsample exponent for `moon`: m = ceil(n^gamma).
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long = "B", default_value_t = 500)]
    replicates: usize,
    /// Monte Carlo size for the smoothed center.
    #[arg(long)]
    mc_size: Option<usize>,
}

impl SchemeArgs {
    fn scheme(&self) -> BootstrapScheme {
        match self.scheme {
            SchemeArg::Classical => BootstrapScheme::classical(self.replicates),
            SchemeArg::Moon => BootstrapScheme::m_out_of_n(self.gamma, self.replicates),
            SchemeArg::Smoothed => BootstrapScheme::smoothed(self.replicates),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Classical,
    Smoothed,
    Moon,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum IntervalArg {
    Root,
    Percentile,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum LimitSource {
    Published,
    Kernel,
    Model,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    HeteroNormal,
    HeteroT3,
}

impl ModelArg {
    fn build(self, d: usize) -> Result<DgpSpec<f64>, CliError> {
        if d < 2 {
            return Err(CliError::Usage("--d must be at least 2".into()));
        }
        Ok(match self {
            ModelArg::HeteroNormal => DgpSpec::hetero_normal(d),
            ModelArg::HeteroT3 => DgpSpec::hetero_student_t3(d),
        })
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if e.is_config() || matches!(e, Error::InsufficientDraws(_)) {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

struct Globals {
    seed: u64,
    workers: usize,
    out: Option<PathBuf>,
}

fn env_override<T: std::str::FromStr>(name: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{name}={v:?} is not a valid value"))),
        Err(_) => Ok(flag),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<S: Serialize>(value: &S, mut w: impl Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<Dataset<f64>, CliError> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(mio::read_dataset_csv(io::BufReader::new(f))?)
}

fn check_threads(workers: usize) -> Result<usize, CliError> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    Ok(workers)
}

#[derive(Serialize)]
struct EstimateOut {
    n: usize,
    d: usize,
    beta: Vec<f64>,
    score: f64,
}

#[derive(Serialize)]
struct CenterOut {
    n: usize,
    d: usize,
    beta_tilde: Vec<f64>,
    mc_size: usize,
    bandwidths: Vec<f64>,
}

#[derive(Serialize)]
struct CiOut {
    scheme: BootstrapScheme,
    interval: IntervalMethod,
    estimate: Vec<f64>,
    center: Vec<f64>,
    rate: f64,
    coordinate: usize,
    level: f64,
    lower: f64,
    upper: f64,
    length: f64,
    seed: u64,
}

#[derive(Serialize)]
struct LimitMeta {
    source: String,
    brownian_scale: Option<f64>,
    drift: Vec<Vec<f64>>,
    half_width: f64,
    step: f64,
    first_row: Vec<f64>,
    replicates: usize,
    boundary_hits: usize,
    seed: u64,
}

/// Estimate, smoothed fit when needed, and bootstrap draws for one dataset.
fn bootstrap_run(
    data: &Dataset<f64>,
    args: &SchemeArgs,
    opts: &OptimizerOptions,
    g: &Globals,
) -> Result<(SphereVector<f64>, BootstrapDistribution<f64>), CliError> {
    let scheme = args.scheme();
    scheme.validate()?;
    let root = Stream::new(g.seed);
    let (est, _) = maximize_score(data, opts, &mut root.child(0).rng())?;
    let fit = if matches!(args.scheme, SchemeArg::Smoothed) {
        let (p, k) = fit_smoothers(data)?;
        let mc = args.mc_size.unwrap_or_else(|| default_mc_size(data.len()));
        Some(SmoothedFit::with_models(Arc::new(p), Arc::new(k), mc, opts, &mut root.child(1).rng())?)
    } else {
        None
    };
    let dist = with_workers(g.workers, || {
        bootstrap_distribution_at(data, &est, &scheme, fit.as_ref(), opts, &root.child(2))
    })??;
    Ok((est, dist))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = Globals {
        seed: env_override(SEED_ENV, cli.seed)?.unwrap_or(0),
        workers: check_threads(env_override(WORKERS_ENV, cli.workers)?.unwrap_or(1))?,
        out: cli.out,
    };
    match cli.command {
        Command::Estimate { data, opt } => {
            let data = load(&data)?;
            let (beta, score) = maximize_score(&data, &opt.options(), &mut Stream::new(g.seed).child(0).rng())?;
            let out = EstimateOut {
                n: data.len(),
                d: data.dim(),
                beta: beta.into_inner(),
                score: score.value(),
            };
            write_json(&out, sink(&g.out)?)
        }
        Command::SmoothCenter { data, mc_size, opt } => {
            let data = load(&data)?;
            let (p, k) = fit_smoothers(&data)?;
            let mc = mc_size.unwrap_or_else(|| default_mc_size(data.len()));
            let beta = smoothed_argmax(&p, &k, mc, &opt.options(), &mut Stream::new(g.seed).child(1).rng())?;
            let out = CenterOut {
                n: data.len(),
                d: data.dim(),
                beta_tilde: beta.into_inner(),
                mc_size: mc,
                bandwidths: p.bandwidths().as_slice().to_vec(),
            };
            write_json(&out, sink(&g.out)?)
        }
        Command::Bootstrap { data, scheme, meta, opt } => {
            let data = load(&data)?;
            let (_, dist) = bootstrap_run(&data, &scheme, &opt.options(), &g)?;
            let mut w = sink(&g.out)?;
            mio::write_draws_csv(&dist, &mut w)?;
            w.flush()?;
            if let Some(path) = meta {
                write_json(&DrawsMetadata::new(&dist, data.len(), g.seed), File::create(path)?)?;
            }
            Ok(())
        }
        Command::Ci { data, scheme, level, coordinate, interval: method, opt } => {
            let data = load(&data)?;
            if coordinate >= data.dim() {
                return Err(CliError::Usage(format!("--coordinate {coordinate} out of range for d = {}", data.dim())));
            }
            let (est, dist) = bootstrap_run(&data, &scheme, &opt.options(), &g)?;
            let method = match method {
                IntervalArg::Root => IntervalMethod::RootInversion,
                IntervalArg::Percentile => IntervalMethod::Percentile,
            };
            let ci = interval(&dist, &est, data.len(), level, coordinate, method)?;
            let out = CiOut {
                scheme: *dist.scheme(),
                interval: method,
                estimate: est.into_inner(),
                center: dist.center().components().to_vec(),
                rate: dist.rate(),
                coordinate,
                level,
                lower: ci.lower,
                upper: ci.upper,
                length: ci.length(),
                seed: g.seed,
            };
            write_json(&out, sink(&g.out)?)
        }
        Command::Coverage { config } => {
            let text = fs::read_to_string(&config).map_err(|e| CliError::Data(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(seed) = env_override(SEED_ENV, cli.seed)? {
                cfg.master_seed = seed;
            }
            if let Some(w) = env_override(WORKERS_ENV, cli.workers)? {
                cfg.workers = check_threads(w)?;
            }
            let rows = harness::run_coverage_experiment(&cfg)?;
            let out = g.out.clone().or(cfg.output_path.clone());
            let mut w = sink(&out)?;
            mio::write_rows_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Limit { source, model, d, a, b, replicates, half_width, step, meta } => {
            let spec = match (a, b, source) {
                (Some(a), Some(b), _) => LimitProcessSpec::brownian(a, b),
                (_, _, LimitSource::Published) => LimitProcessSpec::published_reference(),
                (_, _, LimitSource::Kernel) => LimitProcessSpec::kernel_reference(),
                (_, _, LimitSource::Model) => LimitProcessSpec::from_design(&model.build(d)?, &QuadConfig::default())?,
            }
            .with_grid(half_width, step);
            let sample = with_workers(g.workers, || limit::simulate_limit_argmax(&spec, replicates, &Stream::new(g.seed)))??;
            let mut w = sink(&g.out)?;
            mio::write_limit_csv(&sample, &mut w)?;
            w.flush()?;
            if let Some(path) = meta {
                let info = LimitMeta {
                    source: if a.is_some() { "explicit".into() } else { format!("{source:?}").to_lowercase() },
                    brownian_scale: match spec.covariance {
                        limit::Covariance::Brownian { scale } => Some(scale),
                        limit::Covariance::Field(_) => None,
                    },
                    drift: spec.drift.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    half_width: spec.half_width,
                    step: spec.step,
                    first_row: spec.first_row.clone(),
                    replicates,
                    boundary_hits: sample.boundary_hits(),
                    seed: g.seed,
                };
                write_json(&info, File::create(path)?)?;
            }
            Ok(())
        }
        Command::ReconstructLatent { model, d, count } => {
            let spec = model.build(d)?;
            let root = Stream::new(g.seed);
            let v = CovariateSampler::sample(&spec, count, &mut root.child(0).rng());
            let mut rng = root.child(1).rng();
            let mut w = sink(&g.out)?;
            let mut header: Vec<String> = (1..=d).map(|j| format!("v_{j}")).collect();
            header.extend(["u".into(), "w".into()]);
            writeln!(w, "{}", header.join(","))?;
            for row in v.chunks_exact(d) {
                let draw = reconstruct_latent(&spec, &spec.beta0, row, &mut rng)?;
                let mut rec: Vec<String> = draw.v.iter().map(|&x| mio::fmt_f64(x)).collect();
                rec.push(mio::fmt_f64(draw.u));
                rec.push(u8::from(draw.w).to_string());
                writeln!(w, "{}", rec.join(","))?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Hist { input, column, bins } => {
            let text = fs::read_to_string(&input).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
            let samples = read_column(&text, &column)?;
            let h = harness::histogram(&samples, bins)?;
            let mut w = sink(&g.out)?;
            mio::write_rows_csv(&h, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Simulate { model, d, n } => {
            let spec = model.build(d)?;
            let data = dgp_sample(&spec, n, &mut Stream::new(g.seed).rng());
            let mut w = sink(&g.out)?;
            mio::write_dataset_csv(&data, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

/// Values of the named column of a headed CSV file.
fn read_column(text: &str, column: &str) -> Result<Vec<f64>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Data("input is empty".into()))?;
    let idx = header
        .split(',')
        .position(|h| h.trim() == column)
        .ok_or_else(|| CliError::Data(format!("no column named {column:?}")))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(idx)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Data(format!("row {}: no numeric value in column {column:?}", i + 1)))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) => format!("usage error: {m}"),
                CliError::Data(m) => format!("data error: {m}"),
                CliError::Numerical(m) => format!("numerical failure: {m}"),
            };
            eprintln!("maxscore: {msg}");
            ExitCode::from(e.code())
        }
    }
}
