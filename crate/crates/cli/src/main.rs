use clap::{Args, Parser, Subcommand};
use nfsf_cli::run::{entropy_track, execute, Command, Overrides};
use nfsf_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nfsf",
    version,
    about = "Noisy neural field solvers and stability diagnostics"
)]
struct Cli {
    /// worker threads for data-parallel loops
    #[arg(long, global = true, env = "NFSF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// run directory, replaced atomically on success
    #[arg(long)]
    out: PathBuf,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// overrides solver.snapshot_stride
    #[arg(long)]
    snapshot_stride: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// direct finite-volume solve
    Simulate(RunArgs),
    /// free-boundary (Volterra) solve
    Stefan(RunArgs),
    /// homogeneous stationary state
    Equilibrium(RunArgs),
    /// evaluate the sufficient stability conditions
    StabilityCheck(RunArgs),
    /// relative entropy along an existing run directory
    EntropyTrack {
        #[arg(long)]
        run: PathBuf,
        /// defaults to the run directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// four shifted populations
    Gridcell(RunArgs),
    /// direct and free-boundary solves side by side
    Crosscheck(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result: Result<(), CliError> = match cli.command {
        Sub::EntropyTrack { run, out } => entropy_track(&run, out.as_deref()),
        Sub::Simulate(a) => go(Command::Simulate, a),
        Sub::Stefan(a) => go(Command::Stefan, a),
        Sub::Equilibrium(a) => go(Command::Equilibrium, a),
        Sub::StabilityCheck(a) => go(Command::StabilityCheck, a),
        Sub::Gridcell(a) => go(Command::Gridcell, a),
        Sub::Crosscheck(a) => go(Command::Crosscheck, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nfsf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn go(cmd: Command, a: RunArgs) -> Result<(), CliError> {
    execute(
        cmd,
        &a.config,
        &a.out,
        Overrides {
            seed: a.seed,
            snapshot_stride: a.snapshot_stride,
        },
    )
}
