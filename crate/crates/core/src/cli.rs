//! Command-line front end.
//!
//! Every failure prints one `error: <code>: <message>` line to stderr. Exit
//! status is 0 on success, 2 for bad input and 3 for numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::closed_form::{hf_cauchy, hf_normal, kl_mvn_general, AVAILABLE_CLOSED_FORMS};
use crate::error::Error;
use crate::estimators::{mc_estimate, quad_fdiv_1d, reduce_location, tabulate_runtime, DivergenceEstimate, Method};
use crate::generators::FGenerator;
use crate::radial::{Family, RadialDensity};
use crate::spd::{mahalanobis_sq, LocationScaleParam, SpdMatrix, Spectrum};
use crate::spectral::{bhattacharyya_rho_spectral, spectral_fdiv_generic, spectral_fdiv_quad, spectral_kl};
use crate::tabulate::{fit_rational, monotonicity_report, tabulate_hf, HfTable, TableMethod};

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const THREADS_ENV: &str = "DIVKIT_THREADS";

const EXIT_OK: i32 = 0;
const EXIT_INPUT: i32 = 2;
const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "divkit", version, about = "f-divergences between location-scale families")]
pub struct Cli {
    /// Worker threads (falls back to DIVKIT_THREADS); results do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Divergence between two members of a family
    Div(DivArgs),
    /// Tabulate h_f over a grid of squared Mahalanobis distances
    HfTable(HfTableArgs),
    /// Fit a·u/(u+b) to a table
    FitRational(FitArgs),
    /// Divergence of a centered scale pair from its relative spectrum
    Spectral(SpectralArgs),
    /// Time full-dimensional against reduced Monte Carlo
    BenchReduction(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DivArgs {
    #[arg(long, default_value = "normal")]
    pub family: String,
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long)]
    pub mu1: String,
    #[arg(long)]
    pub mu2: String,
    /// Rows separated by `;`, entries by `,`
    #[arg(long, conflicts_with = "sigma1_file")]
    pub sigma1: Option<String>,
    #[arg(long)]
    pub sigma1_file: Option<PathBuf>,
    /// Defaults to sigma1
    #[arg(long, conflicts_with = "sigma2_file")]
    pub sigma2: Option<String>,
    #[arg(long)]
    pub sigma2_file: Option<PathBuf>,
    /// closed, quad or mc
    #[arg(long, default_value = "mc")]
    pub method: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct HfTableArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long, default_value = "normal")]
    pub family: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// `a:b:n`, n evenly spaced points from a to b
    #[arg(long)]
    pub grid: String,
    /// quad or mc:N
    #[arg(long, default_value = "quad")]
    pub method: String,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long = "gen")]
    pub generator: String,
    /// Eigenvalues of Σ₂Σ₁⁻¹
    #[arg(long)]
    pub eigs: String,
    #[arg(long, default_value = "normal")]
    pub family: String,
    /// closed, quad or mc; defaults to closed when available, else mc
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long)]
    pub dims: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|_| format!("invalid seed `{s}`"))
}

/// Failure of a CLI run.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Io(String),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Lib(e) => e.code(),
            CliError::Io(_) => "io",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if !e.is_validation() => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }

    pub fn message(&self) -> String {
        let m = match self {
            CliError::Lib(e) => e.to_string(),
            CliError::Io(m) | CliError::Usage(m) => m.clone(),
        };
        m.replace(['\n', '\r'], " ")
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Lib(Error::InvalidArgument(msg.into()))
}

pub fn parse_vector(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("not a finite number: `{t}`")))
        })
        .collect()
}

/// Parses `a,b;c,d` into an SPD matrix.
pub fn parse_matrix(s: &str) -> CliResult<SpdMatrix> {
    let rows: Vec<Vec<f64>> = s
        .trim()
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(parse_vector)
        .collect::<CliResult<_>>()?;
    let d = rows.len();
    if d == 0 {
        return Err(invalid("empty matrix"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::NotSquare { rows: d, cols: r.len() }.into());
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(SpdMatrix::from_row_slice(d, &flat)?)
}

pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(invalid(format!("grid must be a:b:n, got `{s}`")));
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| invalid(format!("bad grid start `{}`", parts[0])))?;
    let b: f64 = parts[1].trim().parse().map_err(|_| invalid(format!("bad grid end `{}`", parts[1])))?;
    let n: usize = parts[2].trim().parse().map_err(|_| invalid(format!("bad grid count `{}`", parts[2])))?;
    if n == 0 || !a.is_finite() || !b.is_finite() || (n > 1 && !(b > a)) {
        return Err(invalid(format!("grid `{s}` needs n >= 1 and a < b")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn density(family: &str, dim: usize) -> CliResult<RadialDensity> {
    let fam: Family = family.parse()?;
    Ok(RadialDensity::new(fam, dim)?)
}

fn matrix_arg(inline: &Option<String>, file: &Option<PathBuf>) -> CliResult<Option<SpdMatrix>> {
    match (inline, file) {
        (Some(s), _) => Ok(Some(parse_matrix(s)?)),
        (None, Some(p)) => Ok(Some(parse_matrix(&read_text(p)?)?)),
        (None, None) => Ok(None),
    }
}

fn no_closed_form(what: String) -> CliError {
    Error::NoClosedForm {
        what,
        available: AVAILABLE_CLOSED_FORMS.into(),
    }
    .into()
}

fn closed_div(gen: &FGenerator, family: Family, p1: &LocationScaleParam, p2: &LocationScaleParam) -> CliResult<f64> {
    let d = p1.dim();
    let same_scale = p1.sigma().relative_difference(p2.sigma()) <= crate::estimators::SCALE_TOL;
    let same_location = p1.location() == p2.location();
    if same_scale {
        let u = mahalanobis_sq(p1.location(), p2.location(), p1.sigma())?;
        return match family {
            Family::Normal => Ok(hf_normal(gen, u)?),
            Family::Student(nu) if nu == 1.0 => Ok(hf_cauchy(gen, u, d)?),
            _ => Err(no_closed_form(format!("{gen} on {family}"))),
        };
    }
    if family == Family::Normal {
        if *gen == FGenerator::Kl {
            return Ok(kl_mvn_general(p1, p2)?.total);
        }
        if same_location {
            let spectrum = crate::spd::relative_spectrum(p1.sigma(), p2.sigma())?;
            if let Some(v) = closed_spectral(gen, &spectrum)? {
                return Ok(v);
            }
        }
    }
    Err(no_closed_form(format!("{gen} on {family} with these parameters")))
}

// closed forms for centered normal scale pairs
fn closed_spectral(gen: &FGenerator, spectrum: &Spectrum) -> CliResult<Option<f64>> {
    Ok(match *gen {
        FGenerator::Kl => Some(spectral_kl(spectrum)),
        FGenerator::ReverseKl => Some(spectral_kl(&spectrum.reciprocal())),
        FGenerator::SquaredHellinger => Some(-2.0 * bhattacharyya_rho_spectral(0.5, spectrum)?.ln().exp_m1()),
        FGenerator::Alpha(a) if a.abs() < 1.0 => {
            let rho = bhattacharyya_rho_spectral(0.5 * (1.0 - a), spectrum)?;
            Some(-4.0 / (1.0 - a * a) * rho.ln().exp_m1())
        }
        _ => None,
    })
}

fn cmd_div(args: &DivArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let gen: FGenerator = args.generator.parse()?;
    let family: Family = args.family.parse()?;
    let sigma1 = matrix_arg(&args.sigma1, &args.sigma1_file)?
        .ok_or_else(|| invalid("one of --sigma1 or --sigma1-file is required"))?;
    let sigma2 = matrix_arg(&args.sigma2, &args.sigma2_file)?.unwrap_or_else(|| sigma1.clone());
    let mu1 = parse_vector(&args.mu1)?;
    let mu2 = parse_vector(&args.mu2)?;
    let p1 = LocationScaleParam::new(&mu1, sigma1)?;
    let p2 = LocationScaleParam::new(&mu2, sigma2)?;
    if p2.dim() != p1.dim() {
        return Err(Error::DimensionMismatch { expected: p1.dim(), got: p2.dim() }.into());
    }
    let d = p1.dim();
    let est = match args.method.as_str() {
        "closed" => DivergenceEstimate::deterministic(closed_div(&gen, family, &p1, &p2)?, Method::Closed),
        "quad" => {
            if d == 1 {
                quad_fdiv_1d(&gen, &density(&args.family, 1)?, &p1, &p2)?
            } else if family == Family::Normal {
                let r = reduce_location(&p1, &p2)?;
                quad_fdiv_1d(&gen, &RadialDensity::normal(1), &r.p1, &r.p2)?
            } else {
                return Err(invalid("quadrature needs d = 1 or a same-scale normal pair"));
            }
        }
        "mc" => mc_estimate(&gen, &density(&args.family, d)?, &p1, &p2, args.n, args.seed.unwrap_or(DEFAULT_SEED))?,
        other => return Err(invalid(format!("unknown method `{other}` (closed, quad, mc)"))),
    };
    writeln!(out, "{est}").map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_hf_table(args: &HfTableArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let gen: FGenerator = args.generator.parse()?;
    let rd = density(&args.family, args.dim)?;
    let grid = parse_grid(&args.grid)?;
    let method = match args.method.as_str() {
        "quad" => TableMethod::Quad,
        m => match m.strip_prefix("mc:").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) => TableMethod::Mc {
                n,
                seed: args.seed.unwrap_or(DEFAULT_SEED),
            },
            None => return Err(invalid(format!("method must be quad or mc:N, got `{m}`"))),
        },
    };
    let table = tabulate_hf(&gen, &rd, &grid, method)?;
    emit(&table.to_csv(), args.out.as_deref(), out)
}

fn emit(text: &str, path: Option<&Path>, out: &mut Vec<u8>) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn cmd_fit(args: &FitArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let table = HfTable::from_csv(&read_text(&args.input)?)?;
    let fit = fit_rational(&table)?;
    let line = format!("{fit}\n");
    if let Some(p) = &args.out {
        write_atomic(p, &line)?;
    }
    out.write_all(line.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    let report = monotonicity_report(&table);
    if !report.pass {
        eprintln!(
            "warning: table is not increasing at row {}",
            report.first_violation.unwrap_or(0)
        );
    }
    Ok(())
}

fn cmd_spectral(args: &SpectralArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let gen: FGenerator = args.generator.parse()?;
    let spectrum = Spectrum::new(parse_vector(&args.eigs)?)?;
    let family: Family = args.family.parse()?;
    let rd = RadialDensity::new(family, spectrum.dim())?;
    let closed = if family == Family::Normal {
        closed_spectral(&gen, &spectrum)?
    } else {
        None
    };
    let method = args
        .method
        .clone()
        .unwrap_or_else(|| if closed.is_some() { "closed".into() } else { "mc".into() });
    let est = match method.as_str() {
        "closed" => match closed {
            Some(v) => DivergenceEstimate::deterministic(v, Method::Closed),
            None => return Err(no_closed_form(format!("{gen} on {family} scale pairs"))),
        },
        "quad" => spectral_fdiv_quad(&gen, &rd, &spectrum)?,
        "mc" => spectral_fdiv_generic(&gen, &rd, &spectrum, args.n, args.seed.unwrap_or(DEFAULT_SEED))?,
        other => return Err(invalid(format!("unknown method `{other}` (closed, quad, mc)"))),
    };
    writeln!(out, "{est}").map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_bench(args: &BenchArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let gen: FGenerator = args.generator.parse()?;
    let dims: Vec<usize> = args
        .dims
        .split(',')
        .map(|t| t.trim().parse::<usize>().ok().filter(|d| *d > 0).ok_or_else(|| invalid(format!("bad dimension `{t}`"))))
        .collect::<CliResult<_>>()?;
    let table = tabulate_runtime(&gen, &dims, args.n, args.seed.unwrap_or(DEFAULT_SEED))?;
    emit(&table.to_csv(), args.out.as_deref(), out)
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(t) = flag {
        return if t == 0 { Err(invalid("--threads must be positive")) } else { Ok(Some(t)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        _ => Ok(None),
    }
}

fn dispatch(cli: &Cli, out: &mut Vec<u8>) -> CliResult<()> {
    match &cli.command {
        Command::Div(a) => cmd_div(a, out),
        Command::HfTable(a) => cmd_hf_table(a, out),
        Command::FitRational(a) => cmd_fit(a, out),
        Command::Spectral(a) => cmd_spectral(a, out),
        Command::BenchReduction(a) => cmd_bench(a, out),
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut buf = Vec::new();
    match thread_count(cli.threads)? {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| invalid(format!("cannot start {t} threads: {e}")))?;
            pool.install(|| dispatch(cli, &mut buf))?;
        }
        None => dispatch(cli, &mut buf)?,
    }
    out.write_all(&buf).map_err(|e| CliError::Io(e.to_string()))
}

/// Runs the CLI on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid usage")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "error: usage: {first}");
            return EXIT_INPUT;
        }
    };
    match execute(&cli, out) {
        Ok(()) => {
            let _ = out.flush();
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}: {}", e.code(), e.message());
            e.exit_code()
        }
    }
}
