//! Command-line front end: config parsing, subcommands and run manifests.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{ExperimentConfig, Grid, SweepParameter};
use output::{Manifest, Outputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "epr-lattice", version, about = "Bound atom pairs in shifted optical lattices")]
pub struct Cli {
    /// Experiment configuration (TOML); lithium defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Position grid points per lattice cell; overrides `output.points_per_cell`.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Reserved; no stochastic steps yet.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
    /// Command line as given, recorded in the manifest.
    #[arg(skip)]
    pub arguments: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Derived model parameters as JSON.
    Params,
    /// Lowest Bloch bands, the Wannier function and hopping diagnostics.
    Bands,
    /// Interaction between an atom and each site of the other lattice.
    LiddiScan,
    /// Full two-atom spectrum along a parameter grid.
    Spectrum {
        /// vdd, vhop, U0 or l; defaults to `sweep.parameter`.
        parameter: Option<SweepParameter>,
        /// start:stop:steps; defaults to the `[sweep]` range.
        grid: Option<Grid>,
    },
    /// Joint, marginal and conditional position/momentum distributions.
    Dist,
    /// Separation of bound pairs from unpaired atoms under a linear potential.
    Protocol,
    /// Band edges and EPR widths along a parameter grid.
    Sweep {
        /// vdd, vhop, U0, T, sigma_E, l or slope; defaults to `sweep.parameter`.
        parameter: Option<SweepParameter>,
        /// start:stop:steps; defaults to the `[sweep]` range.
        grid: Option<Grid>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Params => "params",
            Command::Bands => "bands",
            Command::LiddiScan => "liddi-scan",
            Command::Spectrum { .. } => "spectrum",
            Command::Dist => "dist",
            Command::Protocol => "protocol",
            Command::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Config(_) => EXIT_CONFIG,
            Error::Convergence { .. } | Error::MemoryBudget { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
            Error::Io(_) => EXIT_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

/// Resolve the effective configuration: file (or defaults) plus flag overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| config_failure(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    if let Some(r) = cli.resolution {
        cfg.output.points_per_cell = r;
    }
    if let Some(p) = &cli.command.sweep_parameter() {
        cfg.sweep.parameter = Some(*p);
    }
    if let Some(g) = cli.command.sweep_grid() {
        cfg.sweep.start = g.start;
        cfg.sweep.stop = g.stop;
        cfg.sweep.steps = g.steps;
    }
    cfg.validate().map_err(|e| config_failure(e.to_string()))?;
    Ok(cfg)
}

impl Command {
    fn sweep_parameter(&self) -> Option<SweepParameter> {
        match self {
            Command::Spectrum { parameter, .. } | Command::Sweep { parameter, .. } => *parameter,
            _ => None,
        }
    }

    fn sweep_grid(&self) -> Option<Grid> {
        match self {
            Command::Spectrum { grid, .. } | Command::Sweep { grid, .. } => *grid,
            _ => None,
        }
    }
}

/// Run one subcommand and write its manifest; returns the manifest path.
pub fn run(cli: &Cli) -> Result<PathBuf, Failure> {
    let started = Instant::now();
    let cfg = effective_config(cli)?;
    let jobs = match cli.jobs {
        Some(0) => return Err(config_failure("--jobs must be >= 1")),
        Some(j) => j,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure { code: EXIT_IO, message: format!("cannot start worker pool: {e}") })?;
    let mut out = Outputs::new(&PathBuf::from(&cfg.output.directory)).map_err(Failure::from)?;
    let sweep_parameter = || {
        cfg.sweep
            .parameter
            .ok_or_else(|| config_failure("no sweep parameter: pass one on the command line or set sweep.parameter"))
    };
    pool.install(|| -> Result<(), Failure> {
        match &cli.command {
            Command::Params => commands::params(&cfg, &mut out)?,
            Command::Bands => commands::bands(&cfg, &mut out)?,
            Command::LiddiScan => commands::liddi_scan(&cfg, &mut out)?,
            Command::Spectrum { .. } => commands::spectrum(&cfg, sweep_parameter()?, cfg.sweep_grid(), &mut out)?,
            Command::Dist => commands::dist(&cfg, &mut out)?,
            Command::Protocol => commands::protocol_cmd(&cfg, &mut out)?,
            Command::Sweep { .. } => commands::sweep_cmd(&cfg, sweep_parameter()?, cfg.sweep_grid(), &mut out)?,
        }
        Ok(())
    })?;
    let effective = cfg.to_toml();
    let name = cli.command.name();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name.to_string(),
        arguments: cli.arguments.clone(),
        config_path: cli.config.as_ref().map(|p| p.to_string_lossy().into_owned()),
        config_sha256: output::sha256_hex(effective.as_bytes()),
        seed: cli.seed,
        jobs,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: out.files.clone(),
        effective_config: effective,
    };
    let manifest_name = format!("{name}.manifest.json");
    out.json(&manifest_name, &manifest).map_err(Failure::from)?;
    Ok(out.dir.join(manifest_name))
}

/// Parse arguments, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(mut cli) => {
            cli.arguments = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
            cli
        }
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(manifest) => {
            eprintln!("wrote {}", manifest.display());
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
