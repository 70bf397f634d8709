//! `brittle-bayes`: prior and posterior bounds over classes of priors.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use brittle_bayes::reduction::DataMode;
use brittle_bayes::scenarios::ScenarioOptions;
use clap::{Parser, Subcommand};

use crate::commands::{Command, Context};
use crate::config::{RunConfig, Sweep};
use crate::error::{CliError, EXIT_CONFIG, EXIT_OK};
use crate::output::Format;

const SEED_ENV: &str = "BRITTLE_BAYES_SEED";

#[derive(Debug, Parser)]
#[command(name = "brittle-bayes", version, about = "Optimal prior and posterior bounds over classes of priors")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Problem config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Write `<command>.<ext>` into this directory instead of stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Random seed; falls back to $BRITTLE_BAYES_SEED, then the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver restarts.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Shrink the data balls to their centers.
    #[arg(long, global = true)]
    limit_mode: bool,
    /// Ball radius, or a comma-separated list of radii to sweep.
    #[arg(long, global = true, value_name = "V[,V...]")]
    delta: Option<String>,
    /// Parameter sweep NAME=V1,V2,... (repeatable; cartesian product).
    #[arg(long, global = true, value_name = "NAME=V1,V2,...")]
    sweep: Vec<String>,
    /// Report wall times (otherwise "NA", keeping outputs byte-identical).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Upper and lower prior bounds U(Π), L(Π).
    Prior,
    /// Posterior bounds over a class, or the exact posterior of a finite prior.
    Posterior,
    /// The six-level chain L(A) ≤ L(Π) ≤ L(A_Π) ≤ U(A_Π) ≤ U(Π) ≤ U(A).
    Sandwich,
    /// Checks the two sufficient conditions for brittleness.
    Brittleness,
    /// Learning (α) or per-ball (γ) band curve: closed form against solver.
    Curve,
    /// Posterior means of models a and b under a small perturbation.
    Perturb,
    /// Runs named scenarios (all when none is named).
    Scenarios {
        names: Vec<String>,
        /// Run every scenario.
        #[arg(long, conflicts_with = "names")]
        all: bool,
    },
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={s:?} is not a nonnegative integer"))),
        Err(_) => Ok(None),
    }
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let (command, scenarios) = match &cli.command {
        Cmd::Prior => (Command::Prior, Vec::new()),
        Cmd::Posterior => (Command::Posterior, Vec::new()),
        Cmd::Sandwich => (Command::Sandwich, Vec::new()),
        Cmd::Brittleness => (Command::Brittleness, Vec::new()),
        Cmd::Curve => (Command::Curve, Vec::new()),
        Cmd::Perturb => (Command::Perturb, Vec::new()),
        Cmd::Scenarios { names, .. } => (Command::Scenarios, names.clone()),
    };
    let mut config = match &cli.spec {
        Some(p) => RunConfig::load(p)?,
        None => match command {
            Command::Curve | Command::Perturb | Command::Scenarios => RunConfig::default(),
            _ => return Err(CliError::Config(format!("{} needs --spec PATH", command.name()))),
        },
    };
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    if let Some(s) = seed {
        config.solver.seed = s;
        config.verdict.seed = s;
    }
    if let Some(r) = cli.restarts {
        config.solver.restarts = r;
    }
    if cli.limit_mode {
        config.posterior.mode = DataMode::Limit;
        config.verdict.mode = DataMode::Limit;
    }
    config.solver.validate()?;
    let mut sweeps = Vec::new();
    if let Some(d) = &cli.delta {
        sweeps.push(Sweep::parse(&format!("delta={d}"))?);
    }
    for s in &cli.sweep {
        let s = Sweep::parse(s)?;
        if sweeps.iter().any(|t: &Sweep| t.name == s.name) {
            return Err(CliError::Config(format!("parameter {} is swept twice", s.name)));
        }
        sweeps.push(s);
    }
    let mut scenario_options = ScenarioOptions::default();
    if let Some(s) = seed {
        scenario_options.seed = s;
    }
    if let Some(r) = cli.restarts {
        scenario_options.restarts = r;
    }
    Ok(Context { command, config, sweeps, timing: cli.timing, scenarios, scenario_options })
}

fn emit(cli: &Cli, name: &str, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{name}.{}", cli.format.extension()));
            std::fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let ctx = context(cli)?;
    let outcome = commands::run(&ctx)?;
    let text = outcome.report.render(cli.format)?;
    emit(cli, ctx.command.name(), &text)?;
    Ok(outcome.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
