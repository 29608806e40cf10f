//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or domain error, 3 inequality assertion
//! failure, 4 numerical factorization failure, 5 search exhaustion.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bernstein::{self, BernsteinError, BernsteinFn};
use crate::counterexample::{self, CounterError, CounterFamily};
use crate::dists::{DiscreteDist, DiscreteSampler};
use crate::gpsim::{self, GpError};
use crate::inequality::{self, InequalityError};
use crate::kernel::{self, BifParams, KernelError, TimeGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;
pub const EXIT_FACTORIZATION: i32 = 4;
pub const EXIT_EXHAUSTED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "bifrac", version, about = "Bifractional Brownian motion kernel and moment-gap checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the covariance R^{H,K}(t, s)
    Cov {
        #[arg(long = "H", allow_hyphen_values = true)]
        h: f64,
        #[arg(long = "K", allow_hyphen_values = true)]
        k: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        /// Evaluate the formula even outside the existence domain
        #[arg(long)]
        force: bool,
    },
    /// Build the covariance matrix on a grid and report its smallest eigenvalue
    PsdCheck {
        #[arg(long = "H", allow_hyphen_values = true)]
        h: f64,
        #[arg(long = "K", allow_hyphen_values = true)]
        k: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Tolerance relative to the largest diagonal entry
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        force: bool,
    },
    /// Sample Gaussian paths and write them as CSV
    Sample {
        #[arg(long = "H", allow_hyphen_values = true)]
        h: f64,
        #[arg(long = "K", allow_hyphen_values = true)]
        k: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        m: usize,
        #[arg(long, env = "BIFRAC_SEED")]
        seed: u64,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Compute E|X+Y|^alpha - E|X-Y|^alpha for a discrete law
    Gap {
        #[arg(short = 'd', long = "dist")]
        dist: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value_t = RouteArg::Exact)]
        route: RouteArg,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, env = "BIFRAC_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Find (or evaluate) a two-point law violating the inequality for alpha > 2
    Counterexample {
        #[arg(long)]
        alpha: f64,
        /// Evaluate this c instead of searching (requires --M)
        #[arg(long, requires = "m")]
        c: Option<f64>,
        #[arg(long = "M", requires = "c")]
        m: Option<f64>,
    },
    /// Gap of F(λ) = G(λ²) for a finite-atom Bernstein function G
    BernsteinGap {
        #[arg(short = 'd', long = "dist")]
        dist: PathBuf,
        #[arg(short = 'g', long = "bernstein")]
        bernstein: PathBuf,
    },
    /// Check the exponential series identity at a point, or the elementary gap
    /// series of a law against its direct double sum
    SeriesCheck {
        #[arg(long, allow_hyphen_values = true, required_unless_present = "dist")]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true, required_unless_present = "dist")]
        y: Option<f64>,
        #[arg(long)]
        t: f64,
        #[arg(short = 'd', long = "dist", conflicts_with_all = ["x", "y"])]
        dist: Option<PathBuf>,
        /// Number of series terms (automatic stopping rule when omitted with --dist)
        #[arg(long)]
        n_terms: Option<usize>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct GridArgs {
    /// Arithmetic grid `start:step:count` (points start + i·step, i = 0..=count)
    #[arg(long)]
    grid: Option<String>,
    /// Explicit comma-separated time points
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
}

impl GridArgs {
    fn build(&self) -> Result<TimeGrid, KernelError> {
        match (&self.grid, &self.points) {
            (Some(spec), _) => TimeGrid::parse_spec(spec),
            (None, Some(points)) => TimeGrid::new(points.clone()),
            (None, None) => Err(KernelError::EmptyGrid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Exact,
    Tail,
    Variance,
    Mc,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self { code: EXIT_INPUT, message: message.to_string() }
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        Self::input(e)
    }
}

impl From<GpError> for Failure {
    fn from(e: GpError) -> Self {
        let code = match e {
            GpError::NotPsd { .. } | GpError::NumericalFailure => EXIT_FACTORIZATION,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<InequalityError> for Failure {
    fn from(e: InequalityError) -> Self {
        let code = match e {
            InequalityError::NonnegativityViolated { .. } => EXIT_ASSERTION,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<BernsteinError> for Failure {
    fn from(e: BernsteinError) -> Self {
        let code = match e {
            BernsteinError::NonnegativityViolated { .. } => EXIT_ASSERTION,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<CounterError> for Failure {
    fn from(e: CounterError) -> Self {
        let code = match e {
            CounterError::SearchExhausted => EXIT_EXHAUSTED,
            CounterError::ChainViolated(_) => EXIT_ASSERTION,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_dist(path: &Path) -> Result<DiscreteDist, Failure> {
    DiscreteDist::from_json(&read_input(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn params(h: f64, k: f64, force: bool, err: &mut dyn Write) -> Result<BifParams, Failure> {
    match BifParams::new(h, k) {
        Ok(p) => Ok(p),
        Err(e @ KernelError::OutOfDomain { .. }) if force => {
            let _ = writeln!(err, "warning: {e}; evaluating anyway (--force)");
            Ok(BifParams::new_unchecked(h, k)?)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct PsdReport {
    #[serde(rename = "H", serialize_with = "crate::json::f17")]
    h: f64,
    #[serde(rename = "K", serialize_with = "crate::json::f17")]
    k: f64,
    n: usize,
    #[serde(serialize_with = "crate::json::f17")]
    scale: f64,
    #[serde(serialize_with = "crate::json::f17")]
    tol: f64,
    #[serde(flatten)]
    verdict: gpsim::PsdVerdict,
}

#[derive(Serialize)]
struct IdentityReport {
    #[serde(flatten)]
    check: bernstein::IdentityCheck,
    within_bound: bool,
}

#[derive(Serialize)]
struct SeriesReport {
    #[serde(serialize_with = "crate::json::f17")]
    t: f64,
    #[serde(flatten)]
    series: bernstein::SeriesSum,
    #[serde(serialize_with = "crate::json::f17")]
    direct: f64,
    within_bound: bool,
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::input(e);
    match cli.command {
        Command::Cov { h, k, t, s, force } => {
            let p = params(h, k, force, err)?;
            writeln!(out, "{}", kernel::cov(&p, t, s)?).map_err(io)?;
        }
        Command::PsdCheck { h, k, grid, tol, force } => {
            let p = params(h, k, force, err)?;
            let mut m = gpsim::build_cov_matrix(&p, &grid.build()?)?;
            let verdict = gpsim::check_psd(&mut m, tol)?;
            let report = PsdReport { h, k, n: m.dim(), scale: m.scale(), tol, verdict };
            writeln!(out, "{}", crate::json::to_string(&report)).map_err(io)?;
        }
        Command::Sample { h, k, grid, m, seed, out: path, workers } => {
            let p = BifParams::new(h, k)?;
            let batch = gpsim::sample_paths_with_workers(&p, &grid.build()?, m, seed, workers)?;
            match path {
                Some(path) => {
                    let file = fs::File::create(&path)
                        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                    let mut w = std::io::BufWriter::new(file);
                    batch.write_csv(&mut w).map_err(io)?;
                    w.flush().map_err(io)?;
                }
                None => batch.write_csv(&mut *out).map_err(io)?,
            }
        }
        Command::Gap { dist, alpha, route, n, seed, workers } => {
            let d = load_dist(&dist)?;
            let need_alpha = || alpha.ok_or_else(|| Failure::input("--alpha is required for this route"));
            let report = match route {
                RouteArg::Exact => inequality::gap_exact(&d, need_alpha()?)?,
                RouteArg::Variance => inequality::gap_via_variance(&d, need_alpha()?)?,
                RouteArg::Tail => {
                    if alpha.is_some_and(|a| a != 1.0) {
                        return Err(Failure::input("the tail route requires --alpha 1"));
                    }
                    inequality::gap_tail_integral(&d)
                }
                RouteArg::Mc => {
                    let n = n.ok_or_else(|| Failure::input("--n is required for the mc route"))?;
                    let seed = seed.ok_or_else(|| Failure::input("--seed (or BIFRAC_SEED) is required for the mc route"))?;
                    let sampler = DiscreteSampler::new(&d);
                    inequality::gap_mc_with_workers(&sampler, need_alpha()?, n, seed, workers)?
                }
            };
            writeln!(out, "{}", report.to_json()).map_err(io)?;
        }
        Command::Counterexample { alpha, c, m } => {
            if !(alpha > 2.0) {
                return Err(CounterError::AlphaTooSmall(alpha).into());
            }
            let family = match (c, m) {
                (Some(c), Some(m)) => CounterFamily::new(alpha, c, m)?,
                _ => counterexample::find_violation(alpha)?,
            };
            let report = counterexample::report(&family)?;
            writeln!(out, "{}", crate::json::to_string(&report)).map_err(io)?;
        }
        Command::BernsteinGap { dist, bernstein: path } => {
            let d = load_dist(&dist)?;
            let g = BernsteinFn::from_json(&read_input(&path)?)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let report = bernstein::bernstein_gap_exact(&d, &g)?;
            writeln!(out, "{}", report.to_json()).map_err(io)?;
        }
        Command::SeriesCheck { x, y, t, dist, n_terms } => match dist {
            Some(path) => {
                let d = load_dist(&path)?;
                let series = match n_terms {
                    Some(n) => bernstein::elementary_gap_series(&d, t, n)?,
                    None => bernstein::elementary_gap_series_auto(&d, t)?,
                };
                let direct = bernstein::elementary_gap_direct(&d, t)?;
                let within_bound = (series.value - direct).abs() <= series.truncation_bound + 1e-15;
                let report = SeriesReport { t, series, direct, within_bound };
                writeln!(out, "{}", crate::json::to_string(&report)).map_err(io)?;
            }
            None => {
                let (x, y) = (x.expect("clap enforces --x"), y.expect("clap enforces --y"));
                let check = bernstein::series_identity_check(x, y, t, n_terms.unwrap_or(30))?;
                let report = IdentityReport { check, within_bound: check.within_bound() };
                writeln!(out, "{}", crate::json::to_string(&report)).map_err(io)?;
            }
        },
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
