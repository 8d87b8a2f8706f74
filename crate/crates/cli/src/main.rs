use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinlab_cli::{report_render, run, tools, CliError, Format, RunConfig, Suite};

#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about = "Exact verification of entropy and transport inequalities on small spin systems")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suite selection, overriding `[sweep] suite`
    #[arg(long, global = true, value_enum)]
    suite: Option<Suite>,
    /// Sweep seed, overriding `[sweep] seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Check tolerance (must be positive); for `w2`, the solver gap target
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Write the output here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the check suites and report every inequality
    Verify,
    /// Transport distance between two measures stored as json
    W2 { left: PathBuf, right: PathBuf },
    /// Dump the measured mixing profile
    Phi,
    /// Coupling matrix, its norm and the derived constants
    Constants,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = args.suite {
        cfg.sweep.suite = s;
    }
    if let Some(s) = args.seed {
        cfg.sweep.seed = s;
    }
    if let Some(t) = args.tol {
        cfg.set_tolerance(t)?;
    }
    Ok(cfg)
}

fn emit(args: &Args, bytes: &[u8]) -> Result<(), CliError> {
    match &args.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn main_inner(args: &Args) -> Result<i32, CliError> {
    match &args.command {
        Command::Verify => {
            let cfg = load(args)?;
            let report = run(&cfg)?;
            emit(args, &report_render(&report, args.format)?)?;
            Ok(report.exit_code())
        }
        Command::W2 { left, right } => {
            let out = tools::w2(left, right, args.tol.unwrap_or(1e-7))?;
            emit(args, &tools::render_w2(&out, args.format)?)?;
            Ok(0)
        }
        Command::Phi => {
            let out = tools::phi(&load(args)?)?;
            emit(args, &tools::render_phi(&out, args.format)?)?;
            Ok(0)
        }
        Command::Constants => {
            let out = tools::constants(&load(args)?)?;
            emit(args, &tools::render_constants(&out, args.format)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("spinlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
