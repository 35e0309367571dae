//! Command-line front end.
//!
//! Every subcommand writes its table (CSV or JSON) to `--out` or stdout and
//! prints summary lines prefixed with `# ` to stdout. Exit codes: 0 success,
//! 1 usage or I/O error or a failed bound check, 2 physics-domain error,
//! 3 resource guard.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::bloch::{BlochModel, ModelKind};
use crate::bounds::{
    bound_constants, check_bound, rho0_band, rho0_spectral, saturation_sweep, sweep_maximum, write_sweep_csv,
    ROUNDED_A, ROUNDED_SUP, ROUNDED_X_STAR,
};
use crate::geometry::{chern_sum, BandGrid};
use crate::matsubara::{alternating_sum, band_density, correlator_at, equal_time, spectral_correlator};
use crate::mori::{EdSystem, MoriReport};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PHYSICS: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "corrcurv", version, about = "Imaginary-time current correlators, their midpoint curvature and its universal bound")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantum metric, Berry curvature and Chern number on a k-mesh.
    Geometry(GeometryArgs),
    /// Normalized current correlator S(τ)/S(0) of a band model.
    Correlator(CorrelatorArgs),
    /// Midpoint curvature ρ₀ of a band model, three ways.
    Curvature(CurvatureArgs),
    /// Saturation sweep of the universal bound over single-gap densities.
    Bounds(BoundsArgs),
    /// Exact diagonalization of a fermion ring and its Mori chain.
    Mori(MoriArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// qwz, flatchern or trivialflat.
    #[arg(long, default_value = "qwz")]
    pub model: ModelKind,
    /// Mass parameter of the QWZ d-vector.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub m: f64,
    /// Gap of the flat-band models.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Points per direction of the k-mesh.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
#[group(multiple = false)]
pub struct TemperatureArgs {
    /// Inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Temperature in units of the model's energy scale.
    #[arg(long)]
    pub temp: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelatorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    /// Number of τ points on [0, β]; must be odd.
    #[arg(long, default_value_t = 101)]
    pub n_tau: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    /// Gap range as start:stop:steps.
    #[arg(long, default_value = "0.1:10:2000")]
    pub sweep: SweepSpec,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MoriArgs {
    /// Ring length.
    #[arg(long, default_value_t = 8)]
    pub sites: usize,
    /// Particle number (default: half filling).
    #[arg(long)]
    pub np: Option<usize>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
    /// Nearest-neighbour interaction.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub v: f64,
    #[command(flatten)]
    pub temperature: TemperatureArgs,
    /// Number of continued-fraction levels.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `start:stop:steps` gap sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, steps] = parts.as_slice() else {
            return Err(format!("expected start:stop:steps, got {s:?}"));
        };
        let start: f64 = start.parse().map_err(|e| format!("bad start {start:?}: {e}"))?;
        let stop: f64 = stop.parse().map_err(|e| format!("bad stop {stop:?}: {e}"))?;
        let steps: usize = steps.parse().map_err(|e| format!("bad steps {steps:?}: {e}"))?;
        if steps < 2 {
            return Err(format!("sweep needs at least 2 steps, got {steps}"));
        }
        Ok(SweepSpec { start, stop, steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Geometry,
    Correlator,
    Curvature,
    Bounds,
    Mori,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub m: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSpec {
    pub sites: usize,
    pub particles: usize,
    pub hopping: f64,
    pub interaction: f64,
    pub levels: usize,
}

/// Validated run configuration; the temperature is stored once as `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: Option<ModelSpec>,
    pub grid: usize,
    pub beta: Option<f64>,
    pub n_tau: usize,
    pub sweep: Option<SweepSpec>,
    pub ring: Option<RingSpec>,
    pub out: Option<PathBuf>,
}

/// Failure of a CLI run with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionTooLarge { .. } => EXIT_RESOURCE,
            ref e if e.is_physics_domain() => EXIT_PHYSICS,
            _ => EXIT_FAILURE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::usage(format!("I/O error: {e}"))
    }
}

fn resolve_beta(t: &TemperatureArgs) -> Result<Option<f64>, CliError> {
    match (t.beta, t.temp) {
        (Some(b), None) if b > 0.0 && b.is_finite() => Ok(Some(b)),
        (Some(b), None) => Err(CliError::usage(format!("--beta must be positive, got {b}"))),
        (None, Some(t)) if t > 0.0 && t.is_finite() => Ok(Some(1.0 / t)),
        (None, Some(t)) => Err(CliError::usage(format!("--temp must be positive, got {t}"))),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => Err(CliError::usage("--beta and --temp are mutually exclusive")),
    }
}

fn model_spec(m: &ModelArgs) -> ModelSpec {
    ModelSpec {
        kind: m.model,
        m: m.m,
        delta: m.delta,
    }
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let mut config = RunConfig {
            command: CommandKind::Geometry,
            model: None,
            grid: 0,
            beta: None,
            n_tau: 101,
            sweep: None,
            ring: None,
            out: None,
        };
        match &cli.command {
            Command::Geometry(a) => {
                config.model = Some(model_spec(&a.model));
                config.grid = a.model.grid;
                config.beta = resolve_beta(&a.temperature)?;
                config.out = a.out.clone();
            }
            Command::Correlator(a) => {
                config.command = CommandKind::Correlator;
                config.model = Some(model_spec(&a.model));
                config.grid = a.model.grid;
                config.beta = resolve_beta(&a.temperature)?;
                if a.n_tau % 2 == 0 || a.n_tau < 3 {
                    return Err(CliError::usage(format!("--n-tau must be odd and at least 3, got {}", a.n_tau)));
                }
                config.n_tau = a.n_tau;
                config.out = a.out.clone();
            }
            Command::Curvature(a) => {
                config.command = CommandKind::Curvature;
                config.model = Some(model_spec(&a.model));
                config.grid = a.model.grid;
                config.beta = resolve_beta(&a.temperature)?;
                config.out = a.out.clone();
            }
            Command::Bounds(a) => {
                config.command = CommandKind::Bounds;
                config.beta = resolve_beta(&a.temperature)?;
                config.sweep = Some(a.sweep);
                config.out = a.out.clone();
            }
            Command::Mori(a) => {
                config.command = CommandKind::Mori;
                config.beta = resolve_beta(&a.temperature)?;
                config.ring = Some(RingSpec {
                    sites: a.sites,
                    particles: a.np.unwrap_or(a.sites / 2),
                    hopping: a.t,
                    interaction: a.v,
                    levels: a.levels,
                });
                config.out = a.out.clone();
            }
        }
        if config.command != CommandKind::Geometry && config.beta.is_none() {
            return Err(CliError::usage("one of --beta or --temp is required"));
        }
        Ok(config)
    }

    fn build_model(&self) -> Result<BlochModel, CliError> {
        let spec = self.model.expect("band commands carry a model");
        Ok(BlochModel::new(spec.kind, spec.m, spec.delta)?)
    }

    fn beta(&self) -> f64 {
        self.beta.expect("checked in from_cli")
    }

    fn open_output<'a>(&self, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CliError> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
                CliError::usage(format!("cannot create {}: {e}", path.display()))
            })?)),
            None => Box::new(stdout),
        })
    }
}

/// Per-k table plus the Chern number and Brillouin-zone sum rules.
pub fn cmd_geometry(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = config.build_model()?;
    let grid = BandGrid::build(&model, config.grid)?;
    let raw = chern_sum(&model, config.grid)?;
    let chern = raw.round();
    let (k_min, gap_min) = grid.min_gap();
    let noise = grid.noise_sum(config.beta);
    let curvature = grid.curvature_sum(config.beta);
    {
        let mut out = config.open_output(stdout)?;
        grid.write_csv(&mut out)?;
        out.flush()?;
    }
    if (raw - chern).abs() > crate::geometry::CHERN_INTEGER_TOL {
        writeln!(stdout, "# chern_sum = {raw:.11e}")?;
        return Err(Error::NonIntegerChern { value: raw }.into());
    }
    writeln!(stdout, "# chern = {}", chern as i64)?;
    writeln!(stdout, "# chern_residual = {:.3e}", (raw - chern).abs())?;
    writeln!(stdout, "# min_gap = {gap_min:.11e} at k = ({:.6}, {:.6})", k_min.kx, k_min.ky)?;
    match config.beta {
        Some(b) => writeln!(stdout, "# beta = {b:.11e}")?,
        None => writeln!(stdout, "# beta = inf")?,
    }
    writeln!(stdout, "# s0_sum = {noise:.11e}")?;
    writeln!(stdout, "# curvature_sum = {curvature:.11e}")?;
    Ok(())
}

/// Imaginary-time correlator of the band bubble on `n_tau` points.
pub fn cmd_correlator(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let beta = config.beta();
    let model = config.build_model()?;
    let grid = BandGrid::build(&model, config.grid)?;
    let density = band_density(&grid);
    let corr = spectral_correlator(&density, beta, config.n_tau)?;
    {
        let mut out = config.open_output(stdout)?;
        corr.write_csv(&mut out)?;
        out.flush()?;
    }
    let s = corr.normalized();
    writeln!(stdout, "# beta = {beta:.11e}")?;
    writeln!(stdout, "# s0 = {:.11e}", corr.values()[0])?;
    writeln!(stdout, "# s_mid = {:.11e}", s[config.n_tau / 2])?;
    writeln!(stdout, "# kms_violation = {:.3e}", corr.kms_violation())?;
    Ok(())
}

/// Midpoint curvature from the band sum, the spectral density and the
/// alternating Matsubara identity, with the bound margin.
pub fn cmd_curvature(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let beta = config.beta();
    let model = config.build_model()?;
    let grid = BandGrid::build(&model, config.grid)?;
    let density = band_density(&grid);
    if density.is_empty() {
        return Err(Error::EmptyDensity.into());
    }
    let band = rho0_band(&grid, beta)?;
    let spectral = rho0_spectral(&density, beta)?;
    let s0 = equal_time(&density, beta)?;
    let s_mid = correlator_at(&density, 0.5 * beta, beta)?;
    let alternating = alternating_sum(&density, beta, 4096, true)?;
    let margin = check_bound(&density, beta, 2)?;
    let sup = bound_constants(2)?.sup_val;

    let mut out = config.open_output(stdout)?;
    writeln!(out, "beta={beta:.11e}")?;
    writeln!(out, "rho0_band={band:.11e}")?;
    writeln!(out, "rho0_spectral={spectral:.11e}")?;
    writeln!(out, "rho0_beta2_over4={:.11e}", spectral * beta * beta / 4.0)?;
    writeln!(out, "sup_val={sup:.11e}")?;
    writeln!(out, "bound_margin={margin:.11e}")?;
    writeln!(out, "s0={s0:.11e}")?;
    writeln!(out, "s_mid={s_mid:.11e}")?;
    writeln!(out, "alternating_sum={alternating:.11e}")?;
    out.flush()?;
    Ok(())
}

/// Saturation sweep with the bound constants.
pub fn cmd_bounds(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let beta = config.beta();
    let sweep = config.sweep.expect("bounds carries a sweep");
    let rows = saturation_sweep(beta, sweep.start, sweep.stop, sweep.steps)?;
    {
        let mut out = config.open_output(stdout)?;
        write_sweep_csv(&rows, &mut out)?;
        out.flush()?;
    }
    let c = bound_constants(2)?;
    writeln!(stdout, "# x_star = {:.11e} (rounded {ROUNDED_X_STAR})", c.x_star)?;
    writeln!(stdout, "# sup_val = {:.11e} (rounded {ROUNDED_SUP})", c.sup_val)?;
    writeln!(stdout, "# a_const = {:.11e} (rounded {ROUNDED_A})", c.a_const)?;
    if let Some(max) = sweep_maximum(&rows) {
        writeln!(
            stdout,
            "# max rho0_beta2_over4 = {:.11e} at delta = {:.11e}",
            max.rho0_beta2_over4, max.delta
        )?;
    }
    let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    writeln!(stdout, "# min_margin = {worst:.11e}")?;
    if worst < -1e-12 {
        return Err(CliError::usage("bound violated in sweep"));
    }
    Ok(())
}

/// JSON report of the Mori chain and the bound checks.
pub fn cmd_mori(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let beta = config.beta();
    let ring = config.ring.expect("mori carries a ring");
    let sys = EdSystem::build(ring.sites, ring.hopping, ring.interaction, ring.particles)?;
    let report = MoriReport::run(&sys, beta, ring.levels)?;
    {
        let mut out = config.open_output(stdout)?;
        serde_json::to_writer_pretty(&mut out, &report).map_err(|e| CliError::usage(e.to_string()))?;
        writeln!(out)?;
        out.flush()?;
    }
    if !report.holds {
        return Err(CliError::usage("bound check failed"));
    }
    Ok(())
}

pub fn run(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    match config.command {
        CommandKind::Geometry => cmd_geometry(config, stdout),
        CommandKind::Correlator => cmd_correlator(config, stdout),
        CommandKind::Curvature => cmd_curvature(config, stdout),
        CommandKind::Bounds => cmd_bounds(config, stdout),
        CommandKind::Mori => cmd_mori(config, stdout),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    let result = RunConfig::from_cli(&cli).and_then(|config| run(&config, stdout));
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
