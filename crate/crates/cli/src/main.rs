use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagbo_cli::commands::{cmd_oracle, cmd_report, cmd_run};
use lagbo_cli::config::{parse_evaluator, parse_range, EvaluatorChoice, ModeName, Overrides};

#[derive(Parser)]
#[command(name = "lagbo", version, about = "Constrained Bayesian optimization campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write its run directory.
    Run {
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeName>,
        #[arg(long, value_name = "VOLTS")]
        target: Option<f64>,
        #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
        target_range: Option<(f64, f64)>,
        #[arg(long, value_name = "N")]
        n_init: Option<usize>,
        #[arg(long, value_name = "N")]
        n_total: Option<usize>,
        /// Builtin name, or `cmd:PROGRAM ARG...` for a subprocess evaluator.
        #[arg(long, value_name = "NAME|cmd:ARGV", value_parser = parse_evaluator)]
        evaluator: Option<EvaluatorChoice>,
        /// Suppress per-iteration progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Render scatter, convergence and frontier outputs into a run directory.
    Report { run_dir: PathBuf },
    /// Brute-force reference optimum of a builtin evaluator.
    Oracle {
        #[arg(long, default_value = "toy2d")]
        evaluator: String,
        #[arg(long, value_name = "VOLTS")]
        target: Option<f64>,
        /// Grid points per axis (toy2d).
        #[arg(long, default_value_t = 1001)]
        resolution: usize,
        /// Random-search seed (ldmos9-surrogate).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            mode,
            target,
            target_range,
            n_init,
            n_total,
            evaluator,
            quiet,
        } => {
            let flags = Overrides {
                seed,
                out,
                mode,
                target,
                target_range,
                n_init,
                n_total,
                evaluator,
            };
            let mut log: Box<dyn io::Write> = if quiet {
                Box::new(io::sink())
            } else {
                Box::new(io::stderr())
            };
            cmd_run(config.as_deref(), flags, &mut stdout, &mut log)
        }
        Command::Report { run_dir } => cmd_report(&run_dir, &mut stdout),
        Command::Oracle {
            evaluator,
            target,
            resolution,
            seed,
        } => cmd_oracle(&evaluator, target, resolution, seed, &mut stdout).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
