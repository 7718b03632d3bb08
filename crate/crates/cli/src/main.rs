use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relwave_cli::config::OUT_DIR_ENV;
use relwave_cli::{cmd_coeffs, cmd_compare, cmd_evolve, cmd_report, cmd_sweep, CliError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "relwave", version, about = "Relativistic corrections to trapped Gaussian wave packets")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value configuration file, applied before the flags below
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (also settable via RELWAVE_OUT_DIR)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// custom | electron-1keV | electron-10keV | natural
    #[arg(long, global = true)]
    scenario: Option<String>,

    #[arg(long, global = true)]
    periods: Option<f64>,

    #[arg(long, global = true)]
    points_per_period: Option<usize>,

    /// oracle | printed
    #[arg(long, global = true)]
    coeff_source: Option<String>,

    #[arg(long, global = true)]
    fock_dim: Option<usize>,

    /// Packet centre, in the scenario's units
    #[arg(long, global = true, allow_hyphen_values = true)]
    q0: Option<f64>,

    /// Packet mean momentum, in the scenario's units
    #[arg(long, global = true, allow_hyphen_values = true)]
    p0: Option<f64>,

    /// Packet position width, in the scenario's units
    #[arg(long, global = true)]
    sigma_q: Option<f64>,

    /// Relativistic parameter ħω/mc² for the natural and custom scenarios
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Also write SVG charts
    #[arg(long, global = true)]
    svg: bool,

    /// Worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Printed and oracle channel coefficients on the run grid
    Coeffs,
    /// Moment series, scaling functions and summary
    Evolve,
    /// Published-vs-assembled discrepancies, commutator and Richardson checks
    Compare,
    /// Electron-trap sweep over η_E or ω
    Sweep {
        /// LO,HI,N (log-spaced)
        #[arg(long)]
        eta_range: Option<String>,
        /// LO,HI,N in rad/s (log-spaced)
        #[arg(long)]
        omega_range: Option<String>,
    },
    /// coeffs + evolve + compare and a bundle index
    Report,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.out_dir = PathBuf::from(dir);
        }
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    let mut set = |key: &str, value: Option<String>| -> Result<(), CliError> {
        match value {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        }
    };
    set("scenario", cli.scenario.clone())?;
    set("periods", cli.periods.map(|v| v.to_string()))?;
    set("points_per_period", cli.points_per_period.map(|v| v.to_string()))?;
    set("coeff_source", cli.coeff_source.clone())?;
    set("fock_dim", cli.fock_dim.map(|v| v.to_string()))?;
    set("eps", cli.eps.map(|v| v.to_string()))?;
    set("q0", cli.q0.map(|v| v.to_string()))?;
    set("p0", cli.p0.map(|v| v.to_string()))?;
    set("sigma_q", cli.sigma_q.map(|v| v.to_string()))?;
    set("workers", cli.workers.map(|v| v.to_string()))?;
    if let Command::Sweep { eta_range, omega_range } = &cli.command {
        set("eta_range", eta_range.clone())?;
        set("omega_range", omega_range.clone())?;
    }
    if cli.svg {
        cfg.svg = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    let outcome = match cli.command {
        Command::Coeffs => cmd_coeffs(&cfg)?,
        Command::Evolve => cmd_evolve(&cfg)?,
        Command::Compare => cmd_compare(&cfg)?,
        Command::Sweep { .. } => cmd_sweep(&cfg)?,
        Command::Report => cmd_report(&cfg)?,
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
