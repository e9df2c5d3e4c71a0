//! Command-line front end for arrival-time and detection statistics of free
//! one-dimensional wave packets.
//!
//! Subcommands emit figure-ready tables (CSV or JSON): `transition` for the
//! probability that the current crosses a detector region, `leavens` for the
//! crossing-count distribution along a detector worldline, `density` for
//! arrival-time densities and conditional distributions, `trajectories` for
//! orbit fans, and `verify` for the self-check suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error,
//! 3 numerical failure. Parallelism follows the process thread pool; set
//! RAYON_NUM_THREADS to override the worker count.

mod config;
mod emit;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arrival_core::detection::{
    arrival_density_curve, arrival_density_fd, conditional_distribution, leavens_curve,
    leavens_normalization, transition_curve, CurveKind, DistributionCurve, Region,
};
use arrival_core::flow::{gaussian_flow_map, integrate_window};
use arrival_core::verify::run_suite;
use arrival_core::{Error, Packet, SpacetimePoint};

use config::{FileConfig, RegionFlags, Spacing, Units};
use emit::{Cell, Table};

#[derive(Parser)]
#[command(
    name = "arrival",
    version,
    about = "Arrival-time and detection statistics of free 1-D wave packets"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Probability that the current through a detector region has fired, as
    /// a function of the window cap
    Transition(TransitionCmd),
    /// Crossing-count distribution: integrated |flux| along the detector
    /// worldline
    Leavens(LeavensCmd),
    /// Arrival-time density and conditional distribution curves
    Density(DensityCmd),
    /// Sampled trajectory fans
    Trajectories(TrajectoriesCmd),
    /// Run the self-check suite and report per-property deviations
    Verify(VerifyCmd),
}

#[derive(Args)]
struct Shared {
    /// Configuration file (TOML); command-line flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write to this file instead of standard output
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Seed for sampled diagnostics; a fixed seed gives byte-identical output
    #[arg(long)]
    seed: Option<u64>,
    /// Interpret lengths and times as physical units
    #[arg(long)]
    physical: bool,
    /// Packet width (physical mode)
    #[arg(long)]
    delta: Option<f64>,
    /// Reduced Planck constant (physical mode)
    #[arg(long)]
    hbar: Option<f64>,
    /// Particle mass (physical mode)
    #[arg(long)]
    mass: Option<f64>,
    /// Packet choice: 'gaussian', or 'superposition' with terms from the
    /// config file
    #[arg(long)]
    packet: Option<String>,
}

#[derive(Args)]
struct RegionArgs {
    /// Point-detector position
    #[arg(long, allow_negative_numbers = true)]
    level: Option<f64>,
    /// Slab lower edge
    #[arg(long, allow_negative_numbers = true)]
    x_lo: Option<f64>,
    /// Slab upper edge
    #[arg(long, allow_negative_numbers = true)]
    x_hi: Option<f64>,
    /// Detector drift velocity
    #[arg(long, allow_negative_numbers = true)]
    drift: Option<f64>,
    /// Detector activation time
    #[arg(long, allow_negative_numbers = true)]
    t_on: Option<f64>,
    /// Detector shutoff time (defaults to the end of the grid)
    #[arg(long, allow_negative_numbers = true)]
    t_off: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// First grid time
    #[arg(long, allow_negative_numbers = true)]
    t_min: Option<f64>,
    /// Last grid time
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    points: Option<usize>,
    /// Grid spacing: linear or log
    #[arg(long)]
    spacing: Option<String>,
}

#[derive(Args)]
struct TransitionCmd {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Route the computation through the generic numeric pipeline even when
    /// a closed form exists
    #[arg(long)]
    numeric: bool,
}

#[derive(Args)]
struct LeavensCmd {
    #[command(flatten)]
    shared: Shared,
    /// Detector worldline position
    #[arg(long, allow_negative_numbers = true)]
    level: Option<f64>,
    /// Detector activation time
    #[arg(long, allow_negative_numbers = true)]
    t_on: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Divide by the total crossing count, yielding the conditional
    /// arrival-time distribution of the crossing proposal
    #[arg(long)]
    normalize: bool,
    /// Route the computation through the generic numeric pipeline
    #[arg(long)]
    numeric: bool,
}

#[derive(Args)]
struct DensityCmd {
    #[command(flatten)]
    shared: Shared,
    /// Detector worldline position
    #[arg(long, allow_negative_numbers = true)]
    level: Option<f64>,
    /// Detector activation time for the conditional curves
    #[arg(long, allow_negative_numbers = true)]
    t_a: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Emit the conditional distribution W instead of the density
    #[arg(long)]
    cumulative: bool,
    /// Emit both conditional variants: from the transition probability and
    /// from the crossing count (implies --cumulative)
    #[arg(long)]
    compare: bool,
    /// Route the computation through the generic numeric pipeline
    #[arg(long)]
    numeric: bool,
}

#[derive(Args)]
struct TrajectoriesCmd {
    #[command(flatten)]
    shared: Shared,
    /// Starting position on the t = 0 slice; repeat for a fan (default
    /// -1.5 -1 -0.5 0 0.5 1 1.5)
    #[arg(long = "x0", allow_negative_numbers = true)]
    x0: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Use the numerical integrator instead of the closed-form orbits
    #[arg(long)]
    integrate: bool,
}

#[derive(Args)]
struct VerifyCmd {
    #[command(flatten)]
    shared: Shared,
    /// Add a constant offset to the velocity field (fault-injection hook;
    /// any nonzero value must make the suite fail)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    perturb_velocity: f64,
}

/// Failures past argument parsing, split by exit code.
enum Failure {
    /// Exit 2: bad configuration or arguments.
    Usage(String),
    /// Exit 3: the computation itself failed.
    Numeric(String),
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn core_err(e: Error) -> Failure {
    match e {
        Error::InvalidInput(_) => Failure::Usage(e.to_string()),
        other => Failure::Numeric(other.to_string()),
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Usage(format!("output error: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Cmd::Transition(cmd) => cmd_transition(cmd),
        Cmd::Leavens(cmd) => cmd_leavens(cmd),
        Cmd::Density(cmd) => cmd_density(cmd),
        Cmd::Trajectories(cmd) => cmd_trajectories(cmd),
        Cmd::Verify(cmd) => cmd_verify(cmd),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

/// Everything shared between subcommands, merged from flags and file.
struct Context {
    file: FileConfig,
    units: Units,
    format: Format,
    output: Option<PathBuf>,
    seed: u64,
    packet: Packet,
}

impl Context {
    fn new(shared: &Shared) -> Result<Context, Failure> {
        let file = match &shared.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let u = file.units.as_ref();
        let physical = shared.physical || u.and_then(|s| s.physical).unwrap_or(false);
        let units = Units::new(
            physical,
            shared.delta.or_else(|| u.and_then(|s| s.delta)),
            shared.hbar.or_else(|| u.and_then(|s| s.hbar)),
            shared.mass.or_else(|| u.and_then(|s| s.mass)),
        )?;
        let format = match shared
            .format
            .clone()
            .or_else(|| file.output.as_ref().and_then(|o| o.format.clone()))
            .as_deref()
        {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => {
                return Err(Failure::Usage(format!(
                    "unknown format '{other}' (expected 'csv' or 'json')"
                )))
            }
        };
        let output = shared
            .output
            .clone()
            .or_else(|| file.output.as_ref().and_then(|o| o.path.clone().map(PathBuf::from)));
        let seed = shared.seed.or(file.seed).unwrap_or(0);
        let packet = config::build_packet(shared.packet.as_deref(), file.packet.as_ref())?;
        Ok(Context { file, units, format, output, seed, packet })
    }

    fn emit(&self, tables: &[Table]) -> Result<(), Failure> {
        match &self.output {
            Some(path) => {
                for (i, table) in tables.iter().enumerate() {
                    let target =
                        if i == 0 { path.clone() } else { sibling_path(path, "leavens") };
                    let mut f = File::create(&target).map_err(io_err)?;
                    self.write_one(&mut f, table, tables.len() > 1 && i > 0)?;
                }
                Ok(())
            }
            None => {
                let stdout = std::io::stdout();
                let mut out = stdout.lock();
                match self.format {
                    Format::Csv => {
                        for table in tables {
                            emit::write_csv(&mut out, table).map_err(io_err)?;
                        }
                    }
                    Format::Json => {
                        if tables.len() == 1 {
                            emit::write_json(&mut out, &tables[0]).map_err(io_err)?;
                        } else {
                            emit::write_json_many(&mut out, tables).map_err(io_err)?;
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn write_one(&self, f: &mut File, table: &Table, _secondary: bool) -> Result<(), Failure> {
        match self.format {
            Format::Csv => emit::write_csv(f, table).map_err(io_err),
            Format::Json => emit::write_json(f, table).map_err(io_err),
        }
    }
}

/// `out.csv` -> `out.leavens.csv` for the secondary table of `--compare`.
fn sibling_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    let ext = path.extension().and_then(|s| s.to_str());
    let name = match ext {
        Some(ext) => format!("{stem}.{tag}.{ext}"),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn kind_name(kind: CurveKind) -> &'static str {
    match kind {
        CurveKind::TransitionP => "TransitionP",
        CurveKind::LeavensPL => "LeavensPL",
        CurveKind::ConditionalW => "ConditionalW",
        CurveKind::DensityW => "DensityW",
        CurveKind::DensityWTilde => "DensityWTilde",
    }
}

/// Turn a curve into an output table. Probability-like curves carry their
/// error bound column; densities are emitted as bare `t,w` pairs and pick up
/// the time-unit Jacobian in physical mode.
fn curve_table(ctx: &Context, command: &str, curve: &DistributionCurve, with_err: bool) -> Table {
    let density = matches!(curve.kind, CurveKind::DensityW | CurveKind::DensityWTilde);
    let columns: Vec<&'static str> =
        if with_err { vec!["t", "p", "err_bound"] } else { vec!["t", "w"] };
    let rows = curve
        .abscissa
        .iter()
        .zip(curve.ordinate.iter().zip(&curve.error_bound))
        .map(|(&t, (&y, &e))| {
            let y = if density { ctx.units.time_density_out(y) } else { y };
            let mut row = vec![Cell::Number(ctx.units.time_out(t)), Cell::Number(y)];
            if with_err {
                row.push(Cell::Number(e));
            }
            row
        })
        .collect();
    Table {
        columns,
        rows,
        metadata: serde_json::json!({
            "command": command,
            "kind": kind_name(curve.kind),
            "params": curve.params,
            "seed": ctx.seed,
        }),
    }
}

fn region_flags(args: &RegionArgs) -> RegionFlags {
    RegionFlags {
        level: args.level,
        x_lo: args.x_lo,
        x_hi: args.x_hi,
        drift: args.drift,
        t_on: args.t_on,
        t_off: args.t_off,
    }
}

fn cmd_transition(cmd: TransitionCmd) -> Result<u8, Failure> {
    let ctx = Context::new(&cmd.shared)?;
    let settings = config::build_settings(ctx.file.settings.as_ref(), cmd.numeric)?;
    let t_on = cmd
        .region
        .t_on
        .or_else(|| ctx.file.region.as_ref().and_then(|r| r.t_on))
        .map(|t| ctx.units.time_in(t))
        .unwrap_or(0.0);
    let grid = config::build_grid(
        cmd.grid.t_min,
        cmd.grid.t_max,
        cmd.grid.points,
        cmd.grid.spacing.as_deref(),
        ctx.file.grid.as_ref(),
        &ctx.units,
        (t_on, t_on + 100.0, 200, Spacing::Linear),
    )?;
    let region = config::build_region(
        region_flags(&cmd.region),
        ctx.file.region.as_ref(),
        &ctx.units,
        *grid.values.last().unwrap(),
    )?;
    let curve =
        transition_curve(&ctx.packet, &region, &grid.values, &settings).map_err(core_err)?;
    ctx.emit(&[curve_table(&ctx, "transition", &curve, true)])?;
    Ok(0)
}

fn cmd_leavens(cmd: LeavensCmd) -> Result<u8, Failure> {
    let ctx = Context::new(&cmd.shared)?;
    let settings = config::build_settings(ctx.file.settings.as_ref(), cmd.numeric)?;
    let level = cmd
        .level
        .or_else(|| ctx.file.region.as_ref().and_then(|r| r.level))
        .map(|x| ctx.units.length_in(x))
        .ok_or_else(|| Failure::Usage("leavens needs --level".into()))?;
    let t_on = cmd
        .t_on
        .or_else(|| ctx.file.region.as_ref().and_then(|r| r.t_on))
        .map(|t| ctx.units.time_in(t))
        .unwrap_or(0.0);
    let grid = config::build_grid(
        cmd.grid.t_min,
        cmd.grid.t_max,
        cmd.grid.points,
        cmd.grid.spacing.as_deref(),
        ctx.file.grid.as_ref(),
        &ctx.units,
        (t_on, t_on + 100.0, 200, Spacing::Linear),
    )?;
    let mut curve =
        leavens_curve(&ctx.packet, level, t_on, &grid.values, &settings).map_err(core_err)?;
    if cmd.normalize {
        let norm = leavens_normalization(&ctx.packet, level, t_on, &settings).map_err(core_err)?;
        if norm.value < 1e-12 {
            return Err(Failure::Numeric(format!(
                "total crossing count {:e} is too small to condition on",
                norm.value
            )));
        }
        curve = DistributionCurve {
            kind: CurveKind::ConditionalW,
            abscissa: curve.abscissa,
            ordinate: curve.ordinate.iter().map(|p| p / norm.value).collect(),
            error_bound: curve
                .ordinate
                .iter()
                .zip(&curve.error_bound)
                .map(|(p, e)| (e + p * norm.error_bound / norm.value) / norm.value)
                .collect(),
            params: format!("{} (normalized)", curve.params),
        };
    }
    ctx.emit(&[curve_table(&ctx, "leavens", &curve, true)])?;
    Ok(0)
}

fn cmd_density(cmd: DensityCmd) -> Result<u8, Failure> {
    let ctx = Context::new(&cmd.shared)?;
    let settings = config::build_settings(ctx.file.settings.as_ref(), cmd.numeric)?;
    let level = cmd
        .level
        .or_else(|| ctx.file.region.as_ref().and_then(|r| r.level))
        .map(|x| ctx.units.length_in(x))
        .ok_or_else(|| Failure::Usage("density needs --level".into()))?;
    let scale = level.abs().max(1.0);
    let cumulative = cmd.cumulative || cmd.compare;

    if !cumulative {
        // heavy 1/t^2 tail: the default grid runs log-spaced far past the
        // detector position so the emitted rows carry the full unit mass
        let grid = config::build_grid(
            cmd.grid.t_min,
            cmd.grid.t_max,
            cmd.grid.points,
            cmd.grid.spacing.as_deref(),
            ctx.file.grid.as_ref(),
            &ctx.units,
            (1e-3 * scale, 4e3 * scale, 800, Spacing::Log),
        )?;
        let curve = if cmd.numeric || !ctx.packet.is_gaussian() {
            arrival_density_fd(&ctx.packet, level, &grid.values, &settings).map_err(core_err)?
        } else {
            arrival_density_curve(&ctx.packet, level, &grid.values, &settings)
                .map_err(core_err)?
        };
        ctx.emit(&[curve_table(&ctx, "density", &curve, false)])?;
        return Ok(0);
    }

    let t_a = cmd.t_a.map(|t| ctx.units.time_in(t)).unwrap_or(0.0);
    if t_a > 0.0 {
        return Err(Failure::Usage("--t-a must not be positive".into()));
    }
    let grid = config::build_grid(
        cmd.grid.t_min,
        cmd.grid.t_max,
        cmd.grid.points,
        cmd.grid.spacing.as_deref(),
        ctx.file.grid.as_ref(),
        &ctx.units,
        (0.0, 3.0 * scale, 300, Spacing::Linear),
    )?;
    let region = Region::moving_point_detector(level, 0.0, t_a, *grid.values.last().unwrap())
        .map_err(core_err)?;
    let w = conditional_distribution(&ctx.packet, &region, &grid.values, &settings)
        .map_err(core_err)?;
    let mut tables = vec![curve_table(&ctx, "density", &w, false)];

    if cmd.compare {
        let norm = leavens_normalization(&ctx.packet, level, t_a, &settings).map_err(core_err)?;
        if norm.value < 1e-12 {
            return Err(Failure::Numeric(format!(
                "total crossing count {:e} is too small to condition on",
                norm.value
            )));
        }
        let raw =
            leavens_curve(&ctx.packet, level, t_a, &grid.values, &settings).map_err(core_err)?;
        let conditional = DistributionCurve {
            kind: CurveKind::ConditionalW,
            abscissa: raw.abscissa,
            ordinate: raw.ordinate.iter().map(|p| p / norm.value).collect(),
            error_bound: raw
                .ordinate
                .iter()
                .zip(&raw.error_bound)
                .map(|(p, e)| (e + p * norm.error_bound / norm.value) / norm.value)
                .collect(),
            params: format!("{} (normalized)", raw.params),
        };
        tables.push(curve_table(&ctx, "density", &conditional, false));
    }
    ctx.emit(&tables)?;
    Ok(0)
}

fn cmd_trajectories(cmd: TrajectoriesCmd) -> Result<u8, Failure> {
    let ctx = Context::new(&cmd.shared)?;
    let settings = config::build_settings(ctx.file.settings.as_ref(), false)?;
    let grid = config::build_grid(
        cmd.grid.t_min,
        cmd.grid.t_max,
        cmd.grid.points,
        cmd.grid.spacing.as_deref(),
        ctx.file.grid.as_ref(),
        &ctx.units,
        (-3.0, 3.0, 601, Spacing::Linear),
    )?;
    let fan: Vec<f64> = if cmd.x0.is_empty() {
        vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]
    } else {
        cmd.x0.iter().map(|&x| ctx.units.length_in(x)).collect()
    };

    let closed_form = ctx.packet.is_gaussian() && !cmd.integrate;
    let mut rows = Vec::with_capacity(fan.len() * grid.values.len());
    for (id, &x0) in fan.iter().enumerate() {
        let start = SpacetimePoint::new(0.0, x0);
        let positions: Vec<f64> = if closed_form {
            grid.values.iter().map(|&t| gaussian_flow_map(start, t).x).collect()
        } else {
            let (lo, hi) = (grid.values[0], *grid.values.last().unwrap());
            let traj =
                integrate_window(&ctx.packet, start, lo, hi, &settings.integrator, &[])
                    .map_err(core_err)?;
            grid.values
                .iter()
                .map(|&t| {
                    traj.position(t).ok_or_else(|| {
                        Failure::Numeric(format!("trajectory from x0 = {x0} does not cover t = {t}"))
                    })
                })
                .collect::<Result<_, _>>()?
        };
        for (&t, &x) in grid.values.iter().zip(&positions) {
            rows.push(vec![
                Cell::Index(id),
                Cell::Number(ctx.units.time_out(t)),
                Cell::Number(ctx.units.length_out(x)),
            ]);
        }
    }
    let table = Table {
        columns: vec!["trajectory_id", "t", "x"],
        rows,
        metadata: serde_json::json!({
            "command": "trajectories",
            "packet": ctx.packet.describe(),
            "x0": fan,
            "integrated": !closed_form,
            "seed": ctx.seed,
        }),
    };
    ctx.emit(&[table])?;
    Ok(0)
}

fn cmd_verify(cmd: VerifyCmd) -> Result<u8, Failure> {
    let ctx = Context::new(&cmd.shared)?;
    let report = run_suite(ctx.seed, cmd.perturb_velocity);
    let text = format!("{report}\n");
    match &ctx.output {
        Some(path) => {
            let mut f = File::create(path).map_err(io_err)?;
            f.write_all(text.as_bytes()).map_err(io_err)?;
        }
        None => {
            let stdout = std::io::stdout();
            stdout.lock().write_all(text.as_bytes()).map_err(io_err)?;
        }
    }
    Ok(if report.all_pass { 0 } else { 1 })
}
