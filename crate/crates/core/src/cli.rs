//! `kerrscope` command-line front end.
//!
//! Frequencies on the command line are in units of `α` (`--alpha` sets the
//! absolute scale). Every subcommand writes CSV followed by a summary block of
//! `# key=value` lines. Nothing is written until the whole computation has
//! succeeded.
//!
//! Exit codes: 0 success, 1 argument or I/O error, 2 solver failure,
//! 3 too few peaks to estimate `α`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::lindblad::FockConfig;
use crate::model::{scale, validity_warnings, ModelParams, NonlinearSign};
use crate::sweep::{
    detect_peaks, estimate_alpha, evaluate_point, sweep_detuning, sweep_drive, Engine, Grid, SweepResult,
    DEFAULT_PROMINENCE,
};

/// Environment variable holding the worker count for parallel sweeps.
pub const THREADS_ENV: &str = "KERRSCOPE_THREADS";

pub const CSV_HEADER: [&str; 6] = ["axis", "mean_n", "g2", "phi_plus", "phi_minus", "engine"];
pub const COMPARE_HEADER: [&str; 7] =
    ["axis", "mean_n_analytic", "g2_analytic", "mean_n_numeric", "g2_numeric", "phi_plus", "phi_minus"];

const DEFAULT_OMEGA: f64 = 0.06;
const DEFAULT_GAMMA: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "kerrscope", version, about = "Driven Kerr oscillator steady states and nonlinearity estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a single parameter point.
    Point(RunArgs),
    /// Sweep the detuning Δ/α.
    SweepDetuning(RunArgs),
    /// Sweep the scaled drive Ω/α.
    SweepDrive(RunArgs),
    /// Sweep the detuning, detect peaks and estimate α from their spacing.
    EstimateAlpha(RunArgs),
    /// Run both engines over a detuning sweep side by side.
    Compare(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignArg {
    Attractive,
    Repulsive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Analytic,
    Numeric,
    Both,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// Absolute nonlinearity; every other frequency is given in its units.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Scaled drive Ω = ε/√(2s).
    #[arg(long, conflicts_with = "epsilon", allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Drive amplitude ε.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Scaled decay γ = κ/2s.
    #[arg(long, conflicts_with = "kappa", allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Field decay rate κ.
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long = "two-s", default_value_t = 50)]
    two_s: u32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Attractive)]
    sign: SignArg,
    #[arg(long, value_enum, default_value_t = EngineArg::Analytic)]
    engine: EngineArg,
    #[arg(long, allow_negative_numbers = true)]
    min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "fock-dim", default_value_t = 20)]
    fock_dim: usize,
    #[arg(long = "tail-tol", default_value_t = 1e-10)]
    tail_tol: f64,
    #[arg(long, default_value_t = DEFAULT_PROMINENCE)]
    prominence: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully validated invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    /// Absolute frequency unit.
    pub alpha: f64,
    pub two_s: u32,
    pub engines: Vec<Engine>,
    /// Grid in units of `alpha`.
    pub grid: Grid,
    pub fock: FockConfig,
    pub prominence: f64,
    pub out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Solver(Error),
    Estimator(Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Estimator(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Solver(e) | CliError::Estimator(e) => e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::InvalidParameter(_) | Error::InvalidInput(_) => CliError::Usage(e.to_string()),
            Error::InsufficientPeaks { .. } => CliError::Estimator(e),
            _ => CliError::Solver(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("CSV error: {e}"))
    }
}

fn default_grid(detuning: bool) -> (f64, f64, usize) {
    if detuning {
        (-7.0, 1.0, 1601)
    } else {
        (0.0, 0.1, 101)
    }
}

impl RunArgs {
    fn resolve(&self, detuning_axis: bool, fixed_engine: Option<Engine>) -> Result<RunConfig, CliError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(CliError::Usage(format!("--alpha must be > 0, got {}", self.alpha)));
        }
        if self.two_s == 0 {
            return Err(CliError::Usage("--two-s must be >= 1".into()));
        }
        let scaled_style = self.omega.is_some() || self.gamma.is_some();
        let physical_style = self.epsilon.is_some() || self.kappa.is_some();
        if scaled_style && physical_style {
            return Err(CliError::Usage(
                "use either --omega/--gamma or --epsilon/--kappa, not a mix".into(),
            ));
        }
        let root = f64::from(self.two_s).sqrt();
        let n = f64::from(self.two_s);
        let (epsilon, kappa) = if physical_style {
            (self.epsilon.unwrap_or(DEFAULT_OMEGA * root), self.kappa.unwrap_or(DEFAULT_GAMMA * n))
        } else {
            (self.omega.unwrap_or(DEFAULT_OMEGA) * root, self.gamma.unwrap_or(DEFAULT_GAMMA) * n)
        };
        let sign = match self.sign {
            SignArg::Attractive => NonlinearSign::Attractive,
            SignArg::Repulsive => NonlinearSign::Repulsive,
        };
        let a = self.alpha;
        let params = ModelParams::new(self.delta * a, a, epsilon * a, kappa * a, sign)?;

        let engines = match (fixed_engine, self.engine) {
            (Some(e), _) => vec![e],
            (None, EngineArg::Analytic) => vec![Engine::Analytic],
            (None, EngineArg::Numeric) => vec![Engine::Numeric],
            (None, EngineArg::Both) => vec![Engine::Analytic, Engine::Numeric],
        };
        let (dmin, dmax, dsteps) = default_grid(detuning_axis);
        let grid = Grid::new(self.min.unwrap_or(dmin), self.max.unwrap_or(dmax), self.steps.unwrap_or(dsteps))?;
        let fock = FockConfig::new(self.fock_dim, self.tail_tol)?;
        if self.prominence.is_nan() || self.prominence <= 0.0 {
            return Err(CliError::Usage(format!("--prominence must be > 0, got {}", self.prominence)));
        }
        Ok(RunConfig {
            params,
            alpha: a,
            two_s: self.two_s,
            engines,
            grid,
            fock,
            prominence: self.prominence,
            out: self.out.clone(),
        })
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.15e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn csv_writer<W: Write>(dest: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(dest)
}

/// Writes `result` as CSV (header plus one row per grid point) and returns
/// the number of data rows. Fidelity columns are empty for the analytic
/// engine, as is `g2` wherever `⟨n⟩ = 0`.
pub fn write_csv<W: Write>(result: &SweepResult, destination: W) -> csv::Result<usize> {
    let mut w = csv_writer(destination);
    w.write_record(CSV_HEADER)?;
    for (x, row) in result.axis.iter().zip(&result.rows) {
        w.write_record([
            fmt_f(*x),
            fmt_f(row.mean_n),
            fmt_opt(row.g2),
            fmt_opt(row.phi_plus),
            fmt_opt(row.phi_minus),
            result.engine.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(result.rows.len())
}

/// Side-by-side table of an analytic and a numeric sweep over the same axis.
/// Returns the largest `|Δ⟨n⟩|` over rows.
pub fn write_compare_csv<W: Write>(
    analytic: &SweepResult,
    numeric: &SweepResult,
    destination: W,
) -> csv::Result<f64> {
    let mut w = csv_writer(destination);
    w.write_record(COMPARE_HEADER)?;
    let mut max_diff = 0.0f64;
    for ((x, a), n) in analytic.axis.iter().zip(&analytic.rows).zip(&numeric.rows) {
        max_diff = max_diff.max((a.mean_n - n.mean_n).abs());
        w.write_record([
            fmt_f(*x),
            fmt_f(a.mean_n),
            fmt_opt(a.g2),
            fmt_f(n.mean_n),
            fmt_opt(n.g2),
            fmt_opt(n.phi_plus),
            fmt_opt(n.phi_minus),
        ])?;
    }
    w.flush()?;
    Ok(max_diff)
}

/// Appends `# key=value` lines.
pub fn write_summary<W: Write>(mut destination: W, entries: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in entries {
        writeln!(destination, "# {k}={v}")?;
    }
    Ok(())
}

/// Copies `result` with its axis replaced by grid values in units of `α`.
fn in_alpha_units(mut result: SweepResult, grid: &Grid) -> SweepResult {
    result.axis = grid.values();
    result
}

fn scaled_grid(grid: &Grid, alpha: f64) -> Grid {
    Grid { min: grid.min * alpha, max: grid.max * alpha, steps: grid.steps }
}

fn parameter_summary(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    let n = f64::from(cfg.two_s);
    let p = &cfg.params;
    vec![
        ("alpha", fmt_f(cfg.alpha)),
        ("two_s", cfg.two_s.to_string()),
        ("omega", fmt_f(p.epsilon / n.sqrt() / cfg.alpha)),
        ("gamma", fmt_f(p.kappa / n / cfg.alpha)),
        ("sign", format!("{:?}", p.sign).to_lowercase()),
    ]
}

fn warn_validity(cfg: &RunConfig, params: &ModelParams, max_mean_n: f64) {
    if let Ok(scaled) = scale(params, cfg.two_s) {
        for w in validity_warnings(&scaled, Some(max_mean_n)) {
            eprintln!("kerrscope: warning: closed-form solution outside its weak-excitation regime: {w:?}");
        }
    }
}

fn max_mean(result: &SweepResult) -> f64 {
    result.rows.iter().map(|r| r.mean_n).fold(0.0, f64::max)
}

fn cmd_point(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for &engine in &cfg.engines {
        let point = evaluate_point(&cfg.params, cfg.two_s, engine, Some(&cfg.fock))?;
        if engine == Engine::Analytic {
            warn_validity(cfg, &cfg.params, point.observables.mean_n);
        }
        rows.push((engine, point));
    }
    {
        let mut w = csv_writer(&mut out);
        w.write_record(CSV_HEADER)?;
        for (engine, p) in &rows {
            w.write_record([
                fmt_f(cfg.params.delta / cfg.alpha),
                fmt_f(p.observables.mean_n),
                fmt_opt(p.observables.g2),
                fmt_opt(p.fidelity.map(|f| f.phi_plus)),
                fmt_opt(p.fidelity.map(|f| f.phi_minus)),
                engine.name().to_string(),
            ])?;
        }
        w.flush()?;
    }
    let mut summary = parameter_summary(cfg);
    for (engine, p) in &rows {
        summary.push(match engine {
            Engine::Analytic => ("g2_unnorm_analytic", fmt_f(p.observables.g2_unnorm)),
            Engine::Numeric => ("g2_unnorm_numeric", fmt_f(p.observables.g2_unnorm)),
        });
    }
    write_summary(&mut out, &summary)?;
    Ok(out)
}

fn detuning_sweeps(cfg: &RunConfig, engines: &[Engine]) -> Result<Vec<SweepResult>, CliError> {
    let abs = scaled_grid(&cfg.grid, cfg.alpha);
    engines
        .iter()
        .map(|&e| {
            let r = sweep_detuning(&cfg.params, cfg.two_s, &abs, e, Some(&cfg.fock))?;
            if e == Engine::Analytic {
                warn_validity(cfg, &cfg.params, max_mean(&r));
            }
            Ok(in_alpha_units(r, &cfg.grid))
        })
        .collect()
}

fn cmd_sweep(cfg: &RunConfig, detuning: bool) -> Result<Vec<u8>, CliError> {
    let results = if detuning {
        detuning_sweeps(cfg, &cfg.engines)?
    } else {
        let abs = scaled_grid(&cfg.grid, cfg.alpha);
        cfg.engines
            .iter()
            .map(|&e| {
                let r = sweep_drive(&cfg.params, cfg.two_s, &abs, e, Some(&cfg.fock))?;
                if e == Engine::Analytic {
                    let strongest = cfg.params.with_epsilon(abs.max * f64::from(cfg.two_s).sqrt());
                    warn_validity(cfg, &strongest, max_mean(&r));
                }
                Ok(in_alpha_units(r, &cfg.grid))
            })
            .collect::<Result<Vec<_>, CliError>>()?
    };
    let mut out = Vec::new();
    let mut summary = parameter_summary(cfg);
    summary.push(("axis", results[0].axis_name.to_string()));
    match results.as_slice() {
        [single] => {
            write_csv(single, &mut out)?;
        }
        [analytic, numeric] => {
            let diff = write_compare_csv(analytic, numeric, &mut out)?;
            summary.push(("max_abs_diff_mean_n", fmt_f(diff)));
        }
        _ => unreachable!("one or two engines"),
    }
    summary.push(("rows", cfg.grid.steps.to_string()));
    write_summary(&mut out, &summary)?;
    Ok(out)
}

fn cmd_compare(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let cfg = RunConfig { engines: vec![Engine::Analytic, Engine::Numeric], ..cfg.clone() };
    cmd_sweep(&cfg, true)
}

fn cmd_estimate(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    if cfg.engines.len() != 1 {
        return Err(CliError::Usage("estimate-alpha needs a single engine (analytic or numeric)".into()));
    }
    let result = detuning_sweeps(cfg, &cfg.engines)?.remove(0);
    let peaks = detect_peaks(&result, cfg.prominence)?;
    let estimate = estimate_alpha(&peaks).map_err(CliError::Estimator)?;

    let join = |v: &[f64]| v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(";");
    let mut out = Vec::new();
    write_csv(&result, &mut out)?;
    let mut summary = parameter_summary(cfg);
    summary.extend([
        ("grid_step", fmt_f(cfg.grid.step())),
        ("prominence", fmt_f(cfg.prominence)),
        ("peaks", join(&estimate.peak_positions)),
        ("spacings", join(&estimate.spacings)),
        ("alpha_hat", fmt_f(estimate.alpha_hat)),
        ("alpha_hat_abs", fmt_f(estimate.alpha_hat * cfg.alpha)),
        ("spread", fmt_f(estimate.spread)),
    ]);
    write_summary(&mut out, &summary)?;
    Ok(out)
}

fn execute(command: &Command) -> Result<Vec<u8>, CliError> {
    match command {
        Command::Point(a) => cmd_point(&a.resolve(true, None)?),
        Command::SweepDetuning(a) => cmd_sweep(&a.resolve(true, None)?, true),
        Command::SweepDrive(a) => cmd_sweep(&a.resolve(false, None)?, false),
        Command::EstimateAlpha(a) => cmd_estimate(&a.resolve(true, None)?),
        Command::Compare(a) => cmd_compare(&a.resolve(true, Some(Engine::Analytic))?),
    }
}

fn output_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Point(a)
        | Command::SweepDetuning(a)
        | Command::SweepDrive(a)
        | Command::EstimateAlpha(a)
        | Command::Compare(a) => a.out.as_ref(),
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn single_line(msg: &str) -> String {
    msg.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("error").to_string()
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("kerrscope: {}", single_line(&e.to_string()));
            return 1;
        }
    };

    let outcome = worker_pool().and_then(|pool| pool.install(|| execute(&cli.command))).and_then(|bytes| {
        match output_path(&cli.command) {
            Some(path) => File::create(path).and_then(|mut f| f.write_all(&bytes))?,
            None => io::stdout().lock().write_all(&bytes)?,
        }
        Ok(())
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kerrscope: error: {}", single_line(&e.message()));
            e.code()
        }
    }
}
