use clap::{Parser, Subcommand};
use lyapsync_cli::commands::{run, Command, Options};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lyapsync", version, about = "Stochastic Allen-Cahn simulations, Lyapunov exponents and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file (key = value with [sections])
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file and LYAPSYNC_SEED
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "lyapsync-out")]
    out: PathBuf,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write SVG plots next to the CSV files
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate trajectories and record summary statistics
    Simulate,
    /// Estimate the top Lyapunov exponent
    Lyapunov,
    /// Evaluate the analytic upper bounds
    Bound,
    /// Shared-noise synchronization of several initial conditions
    Sync,
    /// Pullback diameters from several start times
    Pullback,
    /// Occupation fractions near the minima
    Concentration,
    /// Compare estimated exponents with the bounds
    Compare {
        /// Run the built-in comparison suite instead of the config sweep
        #[arg(long)]
        suite: bool,
    },
    /// Run the internal consistency checks
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Lyapunov => Command::Lyapunov,
        Cmd::Bound => Command::Bound,
        Cmd::Sync => Command::Sync,
        Cmd::Pullback => Command::Pullback,
        Cmd::Concentration => Command::Concentration,
        Cmd::Compare { suite } => Command::Compare { suite },
        Cmd::Selftest => Command::Selftest,
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let opts = Options { config: cli.config, seed: cli.seed, out: cli.out, workers: cli.workers, plots: cli.plots };
    let env_seed = std::env::var("LYAPSYNC_SEED").ok();
    let mut stdout = std::io::stdout().lock();
    match run(command, &opts, env_seed.as_deref(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
