use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cqbandit::cli::{self, CliError};
use cqbandit::config::{ExperimentConfig, ScheduleSpec, SeedSpec};

/// Constrained stochastic linear bandit simulator.
#[derive(Parser)]
#[command(name = "cqbandit", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config: replications, trajectory CSVs,
    /// aggregate CSV, JSON summary on stdout.
    Run(RunArgs),
    /// Solve the baseline (or tightened) LP for an instance and print the
    /// objective, solution, constraint slacks, and Slater margin.
    Baseline(BaselineArgs),
    /// Instance file utilities.
    Instance(InstanceArgs),
    /// Run the acceptance battery (suite: quick or full).
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    config: PathBuf,
    /// Override the horizon T.
    #[arg(long)]
    horizon: Option<usize>,
    /// Override the replication count (keeps base_seed).
    #[arg(long)]
    replications: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Override the policy.
    #[arg(long)]
    policy: Option<String>,
    /// Override the schedule.
    #[arg(long)]
    schedule: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Dump per-round confidence trace columns.
    #[arg(long)]
    trace_confidence: bool,
    /// Account regret with realized rewards instead of means.
    #[arg(long)]
    realized_regret: bool,
}

#[derive(Args)]
struct BaselineArgs {
    /// Instance: `mab`, `ward`, or a path to an instance file.
    instance: String,
    /// Tightness constant for the tightened program.
    #[arg(long)]
    eps: Option<f64>,
    /// Seed for synthetic presets.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
}

#[derive(Args)]
struct InstanceArgs {
    #[command(subcommand)]
    command: InstanceCommand,
}

#[derive(Subcommand)]
enum InstanceCommand {
    /// Parse an instance file and check every invariant.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct VerifyArgs {
    /// quick (trimmed seeds/horizons) or full (reference parameters).
    #[arg(default_value = "quick")]
    suite: String,
}

fn apply_overrides(config: &mut ExperimentConfig, args: &RunArgs) -> Result<(), CliError> {
    if let Some(t) = args.horizon {
        config.horizon = t;
    }
    if let Some(n) = args.replications {
        let base = match config.seeds {
            SeedSpec::Base { base_seed, .. } => base_seed,
            SeedSpec::Explicit(_) => 0,
        };
        config.seeds = SeedSpec::Base {
            base_seed: base,
            replications: n,
        };
    }
    if let Some(b) = args.base_seed {
        let replications = config.seeds.seeds().len();
        config.seeds = SeedSpec::Base {
            base_seed: b,
            replications,
        };
    }
    if let Some(p) = &args.policy {
        let parsed = ExperimentConfig::parse(&format!("policy = {p}\n"))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        config.policy = parsed.policy;
    }
    if let Some(s) = &args.schedule {
        config.schedule = ScheduleSpec::parse(s).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    if args.trace_confidence {
        config.trace_confidence = true;
    }
    if args.realized_regret {
        config.realized_regret = true;
    }
    config
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run(args) => {
            let text = std::fs::read_to_string(&args.config)
                .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
            let mut config =
                ExperimentConfig::parse(&text).map_err(|e| CliError::Validation(e.to_string()))?;
            apply_overrides(&mut config, &args)?;
            let artifacts = cli::cmd_run(&config)?;
            println!("{}", artifacts.summary_json);
            Ok(ExitCode::SUCCESS)
        }
        Command::Baseline(args) => {
            let out = cli::cmd_baseline(&args.instance, args.eps, args.instance_seed)?;
            print!("{out}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Instance(args) => match args.command {
            InstanceCommand::Validate { file } => {
                let out = cli::cmd_instance_validate(&file)?;
                print!("{out}");
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Verify(args) => {
            let (report, all_pass) = cli::cmd_verify(&args.suite)?;
            print!("{report}");
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
