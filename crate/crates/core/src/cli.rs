//! Command-line front end: argument parsing, dispatch and output writing.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::fidelity::{run_fidelity, FidelityConfig, FidelityError, DEFAULT_SAMPLES, DEFAULT_SEED};
use crate::manifest::{OutputDir, OutputError, RunManifest};
use crate::metrics::{bundled_motors, comparison_table, read_motors, MetricsError};
use crate::model::{regime_check, solve_linear_model, FluxSolution, OperatingPoint};
use crate::saturation::{NonlinearSolver, SaturationError};
use crate::torque::{TorqueError, TorqueModel, TorqueCurve};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "srm-mec", version, about = "Magnetic equivalent circuit analysis of a hybrid-excited SRM")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults reproduce the 16/18 prototype.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory. Without it, single-table commands print to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print derived numbers in shortest round-trip form instead of rounded.
    #[arg(long, global = true)]
    pub full_precision: bool,
    /// Log configuration defaults and solver progress.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the flux network at one operating point.
    Solve {
        /// Phase current in A.
        #[arg(long, default_value_t = 8.0)]
        current: f64,
        /// Rotor angle in degrees from unaligned; defaults to aligned.
        #[arg(long)]
        angle: Option<f64>,
        /// Use constant iron permeability instead of the B-H curve.
        #[arg(long)]
        linear: bool,
    },
    /// Audit the closed-form flux expressions against exact elimination.
    Fidelity {
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Static torque curves over one rotor pole pitch for each configured current.
    Sweep,
    /// Torque density comparison table.
    Compare {
        /// Motors CSV; defaults to the bundled comparison data.
        #[arg(long, value_name = "PATH")]
        motors: Option<PathBuf>,
        /// Motor name to measure improvements against; defaults to the first row.
        #[arg(long)]
        baseline: Option<String>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => EXIT_INPUT,
            Self::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<FidelityError> for CliError {
    fn from(e: FidelityError) -> Self {
        match e {
            FidelityError::Singular(_) => Self::Numeric(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<SaturationError> for CliError {
    fn from(e: SaturationError) -> Self {
        match e {
            SaturationError::NotConverged { .. } | SaturationError::Model(_) => Self::Numeric(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<TorqueError> for CliError {
    fn from(e: TorqueError) -> Self {
        match e {
            TorqueError::Solve { .. } => Self::Numeric(e.to_string()),
            TorqueError::Setup(inner) => inner.into(),
            _ => Self::Input(e.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::from_path(p)?),
        None => {
            info!("no --config given, using built-in defaults");
            Ok(RunConfig::default())
        }
    }
}

fn num(x: f64, full: bool) -> String {
    if full {
        format!("{x}")
    } else {
        format!("{x:.6e}")
    }
}

fn angle_str(x: f64, full: bool) -> String {
    if full {
        format!("{x}")
    } else {
        format!("{x:.4}")
    }
}

/// Writes one table to stdout, or into `--out` with a manifest.
fn emit_single(
    global: &GlobalArgs,
    hash: String,
    argv: &[String],
    name: &str,
    contents: &str,
) -> Result<(), CliError> {
    match &global.out {
        Some(dir) => {
            let mut out = OutputDir::create(dir)?;
            out.stage(name, contents)?;
            out.commit(RunManifest::new(hash, argv.to_vec()))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))?;
        }
    }
    Ok(())
}

fn branch_json(b: &crate::model::BranchFluxes) -> serde_json::Value {
    // adding zero turns -0.0 into 0.0
    json!({ "yoke": b.yoke + 0.0, "pole": b.pole + 0.0, "gap": b.gap + 0.0 })
}

/// JSON record of a solved operating point.
pub fn solution_record(cfg: &RunConfig, op: &OperatingPoint, sol: &FluxSolution, mode: &str) -> serde_json::Value {
    let regime = regime_check(&sol.lumped_reluctances());
    json!({
        "current_a": op.phase_current,
        "angle_deg": op.rotor_angle,
        "mode": mode,
        "sources": { "coil_at": sol.sources.coil, "magnet_at": sol.sources.magnet },
        "mesh_flux_wb": sol.mesh,
        "branch_flux_wb": branch_json(&sol.branch),
        "coil_part_wb": branch_json(&sol.coil),
        "magnet_part_wb": branch_json(&sol.magnet),
        "regime": {
            "threshold": regime.threshold,
            "ratios": regime.ratios.iter().map(|r| json!({
                "name": r.name, "value": r.value, "passes": r.passes,
            })).collect::<Vec<_>>(),
        },
        "elements": sol.elements.iter().map(|e| json!({
            "id": e.id,
            "reluctance_a_per_wb": e.reluctance,
            "flux_wb": e.flux,
            "flux_density_t": e.flux_density,
        })).collect::<Vec<_>>(),
        "iterations": sol.iterations,
        "residual": sol.residual,
        "config_hash": cfg.hash(),
    })
}

fn cmd_solve(
    global: &GlobalArgs,
    argv: &[String],
    current: f64,
    angle: Option<f64>,
    linear: bool,
) -> Result<(), CliError> {
    let cfg = load_config(global.config.as_deref())?;
    let angle = angle.unwrap_or_else(|| cfg.geometry.aligned_angle());
    let op = OperatingPoint::new(&cfg.geometry, current, angle).map_err(|e| CliError::Input(e.to_string()))?;
    let (sol, mode) = if linear {
        let sol = solve_linear_model(&cfg.geometry, &cfg.materials, &op)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        (sol, "linear")
    } else {
        let solver = NonlinearSolver::new(&cfg.geometry, &cfg.materials, &cfg.curve, &cfg.solver)?;
        (solver.solve(&op, None)?, "nonlinear")
    };
    let record = solution_record(&cfg, &op, &sol, mode);
    let text = serde_json::to_string_pretty(&record).expect("record serializes") + "\n";
    emit_single(global, cfg.hash(), argv, "solve.json", &text)
}

fn cmd_fidelity(global: &GlobalArgs, argv: &[String], samples: usize, seed: u64) -> Result<(), CliError> {
    let cfg = load_config(global.config.as_deref())?;
    let report = run_fidelity(&FidelityConfig {
        samples,
        seed,
        ..FidelityConfig::default()
    })?;
    emit_single(global, cfg.hash(), argv, "fidelity.csv", &report.to_csv())
}

fn curve_file_name(current: f64) -> String {
    format!("torque_{current}A.csv")
}

fn torque_table(total: &TorqueCurve, coil: &TorqueCurve, full: bool) -> String {
    let mut s = String::from("angle_deg,torque_nm,torque_coil_nm,torque_pm_nm\n");
    for ((a, t), c) in total.angles.iter().zip(&total.torque).zip(&coil.torque) {
        s.push_str(&format!(
            "{},{},{},{}\n",
            angle_str(*a, full),
            num(*t, full),
            num(*c, full),
            num(t - c, full)
        ));
    }
    s
}

/// Runs the configured sweep and returns `(file name, contents)` pairs.
pub fn sweep_outputs(cfg: &RunConfig, full: bool) -> Result<Vec<(String, String)>, CliError> {
    let model = TorqueModel::new(&cfg.geometry, &cfg.materials, &cfg.curve, &cfg.solver)?
        .with_winding(cfg.winding);
    let mut files = Vec::new();
    let mut summary = String::from("current_a,mean_torque_nm,peak_torque_nm\n");
    let mut components =
        String::from("current_a,mean_torque_nm,mean_coil_torque_nm,mean_pm_torque_nm,pm_share\n");
    for &i in &cfg.currents {
        info!("sweeping {i} A");
        let r = model.sweep(i, &cfg.sweep)?;
        let c = r.components();
        summary.push_str(&format!(
            "{i},{},{}\n",
            num(r.total.mean_torque, full),
            num(r.total.peak_torque, full)
        ));
        components.push_str(&format!(
            "{i},{},{},{},{}\n",
            num(c.total, full),
            num(c.coil_only, full),
            num(c.pm_contribution, full),
            num(c.pm_share(), full)
        ));
        files.push((curve_file_name(i), torque_table(&r.total, &r.coil_only, full)));
    }
    let cogging = model.cogging_curve(&cfg.sweep)?;
    let mut cog = String::from("angle_deg,torque_nm\n");
    for (a, t) in cogging.angles.iter().zip(&cogging.torque) {
        cog.push_str(&format!("{},{}\n", angle_str(*a, full), num(*t, full)));
    }
    files.push(("summary.csv".into(), summary));
    files.push(("components.csv".into(), components));
    files.push(("cogging.csv".into(), cog));
    Ok(files)
}

fn cmd_sweep(global: &GlobalArgs, argv: &[String]) -> Result<(), CliError> {
    let cfg = load_config(global.config.as_deref())?;
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let files = sweep_outputs(&cfg, global.full_precision)?;
    let mut out = OutputDir::create(&dir)?;
    for (name, contents) in &files {
        out.stage(name, contents)?;
    }
    out.commit(RunManifest::new(cfg.hash(), argv.to_vec()))?;
    eprintln!("wrote {} files to {}", files.len() + 1, dir.display());
    Ok(())
}

fn cmd_compare(
    global: &GlobalArgs,
    argv: &[String],
    motors: Option<&Path>,
    baseline: Option<&str>,
) -> Result<(), CliError> {
    let cfg = load_config(global.config.as_deref())?;
    let records = match motors {
        Some(p) => {
            let f = std::fs::File::open(p)
                .map_err(|e| CliError::Input(format!("cannot read motors file {}: {e}", p.display())))?;
            read_motors(f)?
        }
        None => bundled_motors(),
    };
    let baseline = match baseline {
        Some(b) => Some(b.to_owned()),
        None => records.first().map(|r| r.name.clone()),
    };
    let table = comparison_table(&records, baseline.as_deref(), global.full_precision)?;
    emit_single(global, cfg.hash(), argv, "comparison.csv", &table)
}

/// Runs a parsed command line. `argv` is recorded in manifests.
pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { current, angle, linear } => cmd_solve(g, argv, *current, *angle, *linear),
        Command::Fidelity { samples, seed } => cmd_fidelity(g, argv, *samples, *seed),
        Command::Sweep => cmd_sweep(g, argv),
        Command::Compare { motors, baseline } => cmd_compare(g, argv, motors.as_deref(), baseline.as_deref()),
    }
}
