use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedsamp_cli::presets::{preset, PRESETS};
use fedsamp_cli::{parse_config, run_sweep, CliError, ExperimentConfig, Overrides, Plan};

/// Adaptive client sampling experiments.
///
/// Settings are resolved as: flags, then FEDSAMP_OUT for the output
/// directory, then the config file or preset.
#[derive(Parser)]
#[command(name = "fedsamp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a named preset.
    Preset {
        name: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a config file and report the number of runs.
    Validate { config: PathBuf },
    /// List the available presets.
    Presets,
}

#[derive(Args)]
struct Flags {
    /// Output directory.
    #[arg(long, env = "FEDSAMP_OUT")]
    out: Option<PathBuf>,
    /// Use seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Rounds per run.
    #[arg(long)]
    rounds: Option<usize>,
}

impl Flags {
    fn overrides(self) -> Overrides {
        Overrides {
            out: self.out,
            seeds: self.seeds,
            rounds: self.rounds,
        }
    }
}

fn sweep(mut cfg: ExperimentConfig, flags: Flags) -> Result<i32, CliError> {
    flags.overrides().apply(&mut cfg)?;
    let report = run_sweep(&cfg)?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    let failed = report.failed();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see runs.csv", report.outcomes.len());
    }
    Ok(report.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, flags } => sweep(parse_config(&config)?, flags),
        Command::Preset { name, flags } => sweep(preset(&name)?, flags),
        Command::Validate { config } => {
            let plan = Plan::new(&parse_config(&config)?)?;
            println!("ok: {} runs", plan.runs.len());
            Ok(0)
        }
        Command::Presets => {
            for p in &PRESETS {
                println!("{:<22}{}", p.name, p.summary);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
