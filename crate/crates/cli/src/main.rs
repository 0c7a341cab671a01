use std::path::PathBuf;
use std::process::ExitCode;

use channel_fsi_cli::{compare_dirs, describe, execute, CliError, RunConfig, Scenario};
use clap::{Args, Parser, Subcommand};

/// Environment variable read for the log filter when `--log-level` is absent.
const LOG_ENV: &str = "CHANNEL_FSI_LOG";

#[derive(Parser)]
#[command(name = "channel-fsi", version, about = "Steady channel FSI scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; defaults apply to every omitted key
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// overrides the `seed` key of the config
    #[arg(long)]
    seed: Option<u64>,
    /// log filter (error, warn, info, debug, trace)
    #[arg(long)]
    log_level: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate the mesh
    Mesh(RunArgs),
    /// Navier-Stokes on the undeformed domain
    SolveNs(RunArgs),
    /// Coupled fluid-structure solve
    SolveFsi(RunArgs),
    /// Derivative of the coupled state with respect to the inflow
    Sensitivity(RunArgs),
    /// Taylor remainder test of the derivative
    TaylorTest(RunArgs),
    /// Manufactured-solution convergence study
    Mms(RunArgs),
    /// Contraction constants over inflow magnitudes
    Probes(RunArgs),
    /// Print the inputs, outputs and checks of a scenario
    Describe { scenario: Scenario },
    /// Compare two result directories field by field
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// largest accepted relative difference per field
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        #[arg(long)]
        log_level: Option<String>,
    },
}

fn init_logging(level: Option<&str>) {
    let filter = level
        .map(str::to_string)
        .or_else(|| std::env::var(LOG_ENV).ok())
        .unwrap_or_else(|| "warn".into());
    let _ = env_logger::Builder::new().parse_filters(&filter).format_timestamp(None).try_init();
}

fn run(scenario: Scenario, args: RunArgs) -> Result<u8, CliError> {
    init_logging(args.log_level.as_deref());
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (summary, code) = execute(scenario, &config, &args.out)?;
    for c in &summary.checks {
        println!("{:<40} {:<6} {:.6e} ({})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.value, c.requirement);
    }
    match &summary.error {
        Some(e) => eprintln!("error ({}): {}", e.category, e.message),
        None => println!("{scenario}: {}", if summary.passed() { "passed" } else { "failed" }),
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Mesh(a) => run(Scenario::Mesh, a),
        Command::SolveNs(a) => run(Scenario::SolveNs, a),
        Command::SolveFsi(a) => run(Scenario::SolveFsi, a),
        Command::Sensitivity(a) => run(Scenario::Sensitivity, a),
        Command::TaylorTest(a) => run(Scenario::TaylorTest, a),
        Command::Mms(a) => run(Scenario::Mms, a),
        Command::Probes(a) => run(Scenario::Probes, a),
        Command::Describe { scenario } => {
            print!("{}", describe(scenario));
            Ok(0)
        }
        Command::Compare { a, b, tolerance, log_level } => {
            init_logging(log_level.as_deref());
            compare_dirs(&a, &b, tolerance).map(|report| {
                print!("{}", report.render());
                u8::from(!report.passed)
            })
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error ({}): {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
