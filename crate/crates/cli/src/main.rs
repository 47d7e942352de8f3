use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use collective_cli::presets::{PresetName, PresetOptions};
use collective_cli::{CliError, VerifyLevel};

#[derive(Parser)]
#[command(name = "collective-sim", version, about = "Collective-state simulation of spin-1/2 ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the experiment described by a config file and write a CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a ready-made figure experiment and write CSVs into a directory.
    Preset {
        name: PresetName,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Check the reduced model against the full-space oracle and closed forms.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: VerifyLevel,
        /// Multiply the local scatter weights before the oracle comparison.
        #[arg(long, default_value_t = 1.0, hide = true)]
        perturb_scatter: f64,
    },
    /// Print the irrep dimensions and multiplicities for N particles.
    Dims {
        #[arg(long)]
        n: u32,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out } => collective_cli::run(&config, &out),
        Command::Preset { name, n, gamma, tmax, dt, outdir } => {
            let opts = PresetOptions { n, gamma, t_max: tmax, dt };
            for path in collective_cli::preset(name, &opts, &outdir)? {
                println!("wrote {path}");
            }
            Ok(())
        }
        Command::Verify { level, perturb_scatter } => {
            let result = collective_cli::verify(level, perturb_scatter, |o| println!("{o}"));
            match &result {
                Ok(()) => println!("all checks passed"),
                Err(e) => println!("{e}"),
            }
            result
        }
        Command::Dims { n } => {
            print!("{}", collective_cli::dims(n)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Verification(_)) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
