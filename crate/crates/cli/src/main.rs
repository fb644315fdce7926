//! `pwave`: batch front-end for the pseudospin simulator.
//!
//! Exit codes: 0 success, 1 I/O failure or a failed reproduction check,
//! 2 solver non-convergence (including partially failed sweeps), 3 config error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod reproduce;

use clap::{Parser, Subcommand};
use config::{ConfigError, RunConfig};
use output::{Manifest, OutDir};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// Solver failure, with whatever summary was produced before it.
    Solver(pwave_core::Error, Option<Value>),
    /// Some sweep cells failed; the summary lists all of them.
    Partial(Value),
    /// A reproduction recipe ran but at least one check failed.
    Verification(Value),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Solver(pwave_core::Error::InvalidInput(_), _) => 3,
            CliError::Solver(..) | CliError::Partial(_) => 2,
            CliError::Verification(_) | CliError::Io(_) => 1,
        }
    }

    fn summary(&self) -> Value {
        match self {
            CliError::Solver(e, s) => json!({ "error": e.to_string(), "partial": s }),
            CliError::Partial(s) | CliError::Verification(s) => s.clone(),
            CliError::Config(e) => json!({ "error": e.to_string() }),
            CliError::Io(e) => json!({ "error": e.to_string() }),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Solver(e, _) => write!(f, "solver error: {e}"),
            CliError::Partial(s) => write!(f, "sweep finished with failed cells: {}", s["failed"]),
            CliError::Verification(s) => write!(f, "reproduction checks failed for {}", s["figure"]),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<pwave_core::Error> for CliError {
    fn from(e: pwave_core::Error) -> Self {
        CliError::Solver(e, None)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "pwave", version, about = "Quench dynamics of competing chiral p- and d-wave pairing")]
struct Cli {
    /// Key-value config file; unset keys keep their defaults.
    #[arg(long, global = true, env = "PWAVE_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "PWAVE_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "PWAVE_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Optimizer seed; overrides `seed` in the config.
    #[arg(long, global = true, env = "PWAVE_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Equilibrium solution, texture and Chern number.
    Ground,
    /// Single quench with trace and dynamical-phase label.
    Quench,
    /// Phase diagram over a grid of p-wave quenches.
    Sweep,
    /// Numeric stability scan of a pure branch.
    Stability,
    /// Lax roots and continuum phase boundaries.
    Lax,
    /// Ramp optimization for state preparation.
    Prep,
    /// Check the adiabatic-elimination hierarchy of a physical parameter set.
    Validate,
    /// Run whatever `command` the config names.
    Run,
    /// Regenerate the data behind a figure and check it.
    Reproduce {
        /// One of fig3a..fig3d, fig4, fig4a, fig4bc, fig5, fig5a, fig5c, fig7, fig7a, fig7b, fig8.
        figure_id: String,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(name: &str, cfg: &RunConfig, out: &mut OutDir) -> Result<Value, CliError> {
    match name {
        "ground" => commands::ground(cfg, out),
        "quench" => commands::quench(cfg, out),
        "sweep" => commands::sweep(cfg, out),
        "stability" => commands::stability(cfg, out),
        "lax" => commands::lax(cfg, out),
        "prep" => commands::prep(cfg, out),
        "validate" => commands::validate(cfg, out),
        other => Err(ConfigError(format!("unknown command `{other}`")).into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let name = match &cli.command {
        Cmd::Ground => "ground",
        Cmd::Quench => "quench",
        Cmd::Sweep => "sweep",
        Cmd::Stability => "stability",
        Cmd::Lax => "lax",
        Cmd::Prep => "prep",
        Cmd::Validate => "validate",
        Cmd::Run => cfg.command.as_str(),
        Cmd::Reproduce { figure_id } => {
            if !reproduce::is_known(figure_id) {
                eprintln!("config error: unknown figure `{figure_id}`");
                return ExitCode::from(3);
            }
            "reproduce"
        }
    };
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("cannot size worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let mut out = match OutDir::create(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Cmd::Reproduce { figure_id } => reproduce::reproduce(figure_id, &cfg, &mut out).and_then(|v| {
            if v["pass"] == true {
                Ok(v)
            } else {
                Err(CliError::Verification(v))
            }
        }),
        _ => dispatch(name, &cfg, &mut out),
    };
    let (status, code, summary) = match &result {
        Ok(v) => ("ok", 0, v.clone()),
        Err(e) => {
            eprintln!("{e}");
            let status = if matches!(e, CliError::Partial(_)) { "partial" } else { "failed" };
            (status, e.exit_code(), e.summary())
        }
    };
    let mut artifacts = out.files().to_vec();
    artifacts.push("manifest.json".into());
    let manifest = Manifest {
        command: name,
        status,
        exit_code: code as i32,
        seed: cfg.seed,
        workers: rayon::current_num_threads(),
        config: &cfg,
        artifacts: &artifacts,
        summary,
    };
    if let Err(e) = out.json("manifest.json", &manifest) {
        eprintln!("cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
