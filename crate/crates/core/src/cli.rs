//! `sepdp` command-line front end.
//!
//! CSV goes to `--out` or stdout; the resolved configuration is echoed to
//! stderr so stdout stays machine-readable. Exit codes: 0 success, 1 domain
//! or I/O error, 2 argument error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adversary_sim::{
    estimate_separation, estimate_tradeoff, write_tradeoff_csv, ObservationModel, TestKind,
    Thresholds, DEFAULT_THRESHOLDS,
};
use crate::bounds::{
    bounds_table, explicit_sep_lower, format_bounds_table, mu_gdp_asymptotic, sep_gaussian,
    sep_tail_lower, sigma_threshold, sweep_m, write_bounds_csv, write_sweep_csv,
};
use crate::dpsgd_toy::{
    make_synthetic_dataset, toy_defaults, train, write_metrics_csv, write_run_log_csv, MetricsRow,
    SamplerKind, TrainConfig,
};
use crate::error::{invalid, Result};
use crate::tradeoff::{write_curve_csv, TradeoffCurve};

#[derive(Debug, Parser)]
#[command(
    name = "sepdp",
    version,
    about = "Separation bounds and audits for shuffled and Poisson DP-SGD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimum-epsilon table implied by the separation lower bounds.
    Bounds(BoundsArgs),
    /// Sample a trade-off curve as `alpha,beta` CSV.
    Curve(CurveCmd),
    /// Global separation of a trade-off curve.
    Separation(CurveArgs),
    /// Monte Carlo trade-off of the max or likelihood-ratio test.
    Simulate(SimulateArgs),
    /// One epoch of DP-SGD on the synthetic task, against a clean baseline.
    TrainToy(TrainArgs),
    /// Asymptotic mu-GDP parameter, its separation and tail bounds.
    Mugdp(MuGdpArgs),
}

/// Comma-separated integers; scientific notation such as `3e6` is accepted.
#[derive(Debug, Clone)]
struct IntList(Vec<u64>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| parse_count(t.trim()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err("empty list".to_string())
                } else {
                    Ok(IntList(v))
                }
            })
    }
}

fn parse_count(t: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = t.parse().map_err(|_| format!("`{t}` is not an integer"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("`{t}` is not a nonnegative integer"))
    }
}

/// A noise multiplier, or `auto` for 1/√(2 ln M).
#[derive(Debug, Clone, Copy, PartialEq)]
enum SigmaArg {
    Auto,
    Value(f64),
}

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SigmaArg::Auto);
        }
        s.parse::<f64>()
            .map(SigmaArg::Value)
            .map_err(|_| format!("`{s}` is neither a number nor `auto`"))
    }
}

impl SigmaArg {
    fn resolve(self, m: u64) -> Result<f64> {
        match self {
            SigmaArg::Auto => sigma_threshold(m),
            SigmaArg::Value(v) => Ok(v),
        }
    }
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(
        long = "m-list",
        default_value = "1000,3000,10000,30000,100000,300000,1000000,3000000,5000000"
    )]
    m_list: IntList,
    /// Dataset size; δ = 1/N.
    #[arg(long, default_value = "100000000", value_parser = parse_count)]
    n: u64,
    /// Also print the table at printed precision to stderr.
    #[arg(long)]
    pretty: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurveKindArg {
    Gaussian,
    Epsdelta,
    Sub,
    Poissonmix,
    Random,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long, value_enum)]
    kind: CurveKindArg,
    /// Gaussian μ.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Rounds per epoch for `sub` and `poissonmix`.
    #[arg(long)]
    m: Option<u64>,
    /// Noise multiplier, or `auto`.
    #[arg(long)]
    sigma: Option<SigmaArg>,
    /// Poisson sampling rate; mixture weight p = (1 - q)^M. Defaults to 1/M.
    #[arg(long)]
    q: Option<f64>,
    /// Mixture weight p, overriding `--q`.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Debug, Args)]
struct CurveCmd {
    #[command(flatten)]
    spec: CurveArgs,
    #[arg(long, default_value_t = 1001)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Shuffled,
    Poisson,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TestArg {
    Max,
    Np,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    sigma: SigmaArg,
    /// Poisson sampling rate. Defaults to 1/M.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_enum, default_value = "max")]
    test: TestArg,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLDS)]
    thresholds: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplerArg {
    Shuffle,
    Poisson,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "shuffle")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = toy_defaults::BATCH)]
    batch: usize,
    /// Noise multiplier, `auto` or 0.
    #[arg(long, default_value = "auto")]
    sigma: SigmaArg,
    #[arg(long, default_value_t = toy_defaults::CLIP)]
    clip: f64,
    #[arg(long, default_value_t = toy_defaults::LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = toy_defaults::N)]
    n: usize,
    #[arg(long, default_value_t = toy_defaults::D)]
    d: usize,
    /// Distance between the two class centres.
    #[arg(long, default_value_t = toy_defaults::DISTANCE)]
    distance: f64,
    /// Run log CSV of the DP run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics CSV; stderr when absent.
    #[arg(long = "metrics-out")]
    metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MuGdpArgs {
    #[arg(long, value_parser = parse_count)]
    m: Option<u64>,
    /// Epochs.
    #[arg(long, default_value_t = 1.0)]
    e: f64,
    #[arg(long)]
    sigma: Option<SigmaArg>,
    /// Print the Gaussian-tail lower bound on sep(G_mu).
    #[arg(long)]
    tail: bool,
    /// Print the explicit bound for sigma = s / sqrt(ln M).
    #[arg(long)]
    instantiation: bool,
    #[arg(long)]
    s: Option<f64>,
    /// Sweep these M values with sigma = s / sqrt(ln M) and write CSV.
    #[arg(long = "sweep-m")]
    sweep_m: Option<IntList>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{}", rendered.ansi());
            }
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Bounds(a) => cmd_bounds(a, stdout, stderr),
        Command::Curve(a) => cmd_curve(a, stdout, stderr),
        Command::Separation(a) => cmd_separation(a, stdout, stderr),
        Command::Simulate(a) => cmd_simulate(a, stdout, stderr),
        Command::TrainToy(a) => cmd_train(a, stdout, stderr),
        Command::Mugdp(a) => cmd_mugdp(a, stdout, stderr),
    }
}

fn with_output<F>(path: &Option<PathBuf>, stdout: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn cmd_bounds(a: BoundsArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    writeln!(
        stderr,
        "# bounds m_list={:?} n={} delta={:e}",
        a.m_list.0,
        a.n,
        1.0 / a.n as f64
    )?;
    let rows = bounds_table(&a.m_list.0, a.n)?;
    if a.pretty {
        write!(stderr, "{}", format_bounds_table(&rows))?;
    }
    with_output(&a.out, stdout, |w| write_bounds_csv(&rows, w))
}

fn required<T: Copy>(v: Option<T>, flag: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| invalid(format!("--kind {kind} requires {flag}")))
}

fn build_curve(spec: &CurveArgs) -> Result<TradeoffCurve> {
    match spec.kind {
        CurveKindArg::Random => Ok(TradeoffCurve::random_guess()),
        CurveKindArg::Gaussian => TradeoffCurve::gaussian(required(spec.mu, "--mu", "gaussian")?),
        CurveKindArg::Epsdelta => TradeoffCurve::eps_delta(
            required(spec.eps, "--eps", "epsdelta")?,
            spec.delta.unwrap_or(0.0),
        ),
        CurveKindArg::Sub | CurveKindArg::Poissonmix => {
            let name = if matches!(spec.kind, CurveKindArg::Sub) {
                "sub"
            } else {
                "poissonmix"
            };
            let m = required(spec.m, "--m", name)?;
            let sigma = required(spec.sigma, "--sigma", name)?.resolve(m)?;
            let sub = TradeoffCurve::sub_shuffled(m, sigma)?;
            if matches!(spec.kind, CurveKindArg::Sub) {
                return Ok(sub);
            }
            let p = match spec.p {
                Some(p) => p,
                None => {
                    let q = spec.q.unwrap_or(1.0 / m as f64);
                    if !(q > 0.0 && q < 1.0) {
                        return Err(invalid(format!("--q = {q} must lie in (0, 1)")));
                    }
                    (1.0 - q).powf(m as f64)
                }
            };
            TradeoffCurve::poisson_mixture(sub, p)
        }
    }
}

fn cmd_curve(a: CurveCmd, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let curve = build_curve(&a.spec)?;
    writeln!(stderr, "# curve {:?} points={}", curve.kind(), a.points)?;
    let pts = curve.sample(a.points)?;
    with_output(&a.out, stdout, |w| write_curve_csv(&pts, w))
}

fn cmd_separation(a: CurveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let curve = build_curve(&a)?;
    writeln!(stderr, "# separation {:?}", curve.kind())?;
    let r = curve.global_separation()?;
    let method = match r.method {
        crate::tradeoff::SeparationMethod::FixedPoint => "fixed_point",
        crate::tradeoff::SeparationMethod::Maximization => "maximization",
    };
    writeln!(stdout, "kappa={}", r.kappa)?;
    writeln!(stdout, "attaining_alpha={}", r.attaining_alpha)?;
    writeln!(stdout, "method={method}")?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let sigma = a.sigma.resolve(a.m)?;
    let rounds = usize::try_from(a.m).map_err(|_| invalid("--m is too large"))?;
    let model = match a.scheme {
        SchemeArg::Shuffled => ObservationModel::shuffled(rounds, sigma)?,
        SchemeArg::Poisson => {
            ObservationModel::poisson(rounds, a.q.unwrap_or(1.0 / a.m as f64), sigma)?
        }
    };
    let test = match a.test {
        TestArg::Max => TestKind::Max,
        TestArg::Np => TestKind::Np,
    };
    writeln!(
        stderr,
        "# simulate model={:?} test={:?} trials={} seed={} thresholds={} threads={:?}",
        model, test, a.trials, a.seed, a.thresholds, a.threads
    )?;
    let points = estimate_tradeoff(
        &model,
        test,
        &Thresholds::Quantiles(a.thresholds),
        a.trials as usize,
        a.seed,
        a.threads,
    )?;
    writeln!(
        stderr,
        "# empirical separation {}",
        estimate_separation(&points)?
    )?;
    with_output(&a.out, stdout, |w| write_tradeoff_csv(&points, w))
}

fn cmd_train(a: TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let data = make_synthetic_dataset(a.n, a.d, a.distance, a.seed)?;
    let n_train = data.n_train();
    if a.batch == 0 || a.batch > n_train {
        return Err(invalid(format!(
            "--batch {} must lie in [1, {n_train}]",
            a.batch
        )));
    }
    let m = n_train / a.batch;
    let sigma = a.sigma.resolve(m as u64)?;
    let sampler = match a.sampler {
        SamplerArg::Shuffle => SamplerKind::Shuffle,
        SamplerArg::Poisson => SamplerKind::Poisson,
    };
    let dp = TrainConfig {
        batch_size: a.batch,
        clip: a.clip,
        sigma,
        learning_rate: a.lr,
        sampler,
        seed: a.seed,
        ghost_target: false,
        retain_noise: false,
    };
    let clean = TrainConfig {
        clip: f64::INFINITY,
        sigma: 0.0,
        ..dp.clone()
    };
    writeln!(
        stderr,
        "# train-toy n={} d={} distance={} sampler={:?} batch={} M={} sigma={} clip={} lr={} seed={}",
        a.n, a.d, a.distance, sampler, a.batch, m, sigma, a.clip, a.lr, a.seed
    )?;
    let dp_run = train(&data, &dp)?;
    let clean_run = train(&data, &clean)?;
    let metrics = MetricsRow {
        accuracy_clean: clean_run.test_accuracy,
        accuracy_dp: dp_run.test_accuracy,
        sigma,
        m,
        clip: a.clip,
    };
    with_output(&a.out, stdout, |w| write_run_log_csv(&dp_run.records, w))?;
    match &a.metrics_out {
        Some(p) => write_metrics_csv(&metrics, File::create(p)?)?,
        None => write_metrics_csv(&metrics, &mut *stderr)?,
    }
    Ok(())
}

fn cmd_mugdp(a: MuGdpArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    if let Some(list) = &a.sweep_m {
        let s = a.s.unwrap_or(std::f64::consts::FRAC_1_SQRT_2);
        writeln!(stderr, "# mugdp sweep m={:?} s={} E={}", list.0, s, a.e)?;
        let rows = sweep_m(&list.0, s, a.e)?;
        return with_output(&a.out, stdout, |w| write_sweep_csv(&rows, w));
    }
    let m =
        a.m.ok_or_else(|| invalid("mugdp requires --m (or --sweep-m)"))?;
    let sigma = a
        .sigma
        .ok_or_else(|| invalid("mugdp requires --sigma (or --sweep-m)"))?
        .resolve(m)?;
    writeln!(stderr, "# mugdp M={m} E={} sigma={sigma}", a.e)?;
    let mu = mu_gdp_asymptotic(m, a.e, sigma)?;
    writeln!(stdout, "mu={mu}")?;
    writeln!(stdout, "sep_gdp={}", sep_gaussian(mu)?)?;
    if a.tail {
        if mu > 0.0 {
            writeln!(stdout, "tail_lower={}", sep_tail_lower(mu)?)?;
        } else {
            writeln!(stdout, "tail_lower=-inf")?;
        }
    }
    if a.instantiation {
        let s = a.s.ok_or_else(|| invalid("--instantiation requires --s"))?;
        writeln!(stdout, "explicit_lower={}", explicit_sep_lower(m, s)?)?;
    }
    Ok(())
}
