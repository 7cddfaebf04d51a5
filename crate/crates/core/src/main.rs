use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qgbasin::cli::{self, Command, Flags, EXIT_USAGE};
use qgbasin::parse_config_with;

#[derive(Parser)]
#[command(
    name = "qgbasin",
    version,
    about = "Barotropic QG basin solver and periodic-orbit finder"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate and write diagnostics plus a final checkpoint.
    Simulate(RunArgs),
    /// Search for the T-periodic solution.
    FindOrbit(RunArgs),
    /// Integrate with the energy envelope armed and check it.
    VerifyBound(RunArgs),
    /// Compare the linearized run against an analytic basin mode.
    LinearMode(RunArgs),
    /// Evaluate the dissipativity condition.
    CheckCondition(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Override a scalar config key, `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Refine the Picard result with Newton-GMRES.
    #[arg(long)]
    newton: bool,
    /// Estimate the dominant Floquet multiplier.
    #[arg(long)]
    floquet: bool,
    /// Orbit tolerance, or the error threshold of `linear-mode`.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::FindOrbit(a) => (Command::FindOrbit, a),
        Sub::VerifyBound(a) => (Command::VerifyBound, a),
        Sub::LinearMode(a) => (Command::LinearMode, a),
        Sub::CheckCondition(a) => (Command::CheckCondition, a),
    };
    let code = match execute(command, &args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    };
    ExitCode::from(code as u8)
}

fn execute(command: Command, args: &RunArgs) -> Result<i32, String> {
    if let Some(tol) = args.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(format!("--tol must be positive, got {tol}"));
        }
    }
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let cfg = parse_config_with(&text, &args.set)
        .map_err(|e| format!("{}: {e}", args.config.display()))?;
    let flags = Flags {
        newton: args.newton,
        floquet: args.floquet,
        tol: args.tol,
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    cli::run(command, &cfg, &flags, &mut out).map_err(|e| e.to_string())
}
