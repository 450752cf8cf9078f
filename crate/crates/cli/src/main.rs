use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use smalltime_cli::config::{AcceptSection, OUTPUT_DIR_ENV};
use smalltime_cli::{run, Command, ExperimentConfig, Failure, Suite};

#[derive(Parser)]
#[command(name = "smalltime", version, about = "Small-time SPDE experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the coefficient hypotheses of the configured set.
    Validate(ConfigArgs),
    /// Simulate one path and write per-step diagnostics.
    Simulate(ConfigArgs),
    /// Monte Carlo tail scan.
    Scan(ConfigArgs),
    /// Evaluate the rate function on a named path family.
    Rate(ConfigArgs),
    /// Run the acceptance suite.
    Accept {
        #[arg(long, value_enum, default_value = "fast")]
        suite: SuiteArg,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Fast,
    Full,
}

fn load(args: &ConfigArgs, command: Command) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .map_err(Failure::config)?;
    let mut cfg = ExperimentConfig::from_toml(&text)
        .with_context(|| format!("in {}", args.config.display()))
        .map_err(Failure::config)?;
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Failure::config(anyhow::anyhow!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                command.name()
            )));
        }
    }
    cfg.command = Some(command);
    if args.output_dir.is_some() {
        cfg.output_dir = args.output_dir.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, fallback_dir) = match cli.command {
        Sub::Accept { suite, output_dir } => {
            let mut cfg = ExperimentConfig::for_command(Command::Accept);
            cfg.accept = Some(AcceptSection {
                suite: match suite {
                    SuiteArg::Fast => Suite::Fast,
                    SuiteArg::Full => Suite::Full,
                },
            });
            cfg.output_dir = output_dir;
            (Ok(cfg), None)
        }
        Sub::Validate(a) => (load(&a, Command::Validate), a.output_dir),
        Sub::Simulate(a) => (load(&a, Command::Simulate), a.output_dir),
        Sub::Scan(a) => (load(&a, Command::Scan), a.output_dir),
        Sub::Rate(a) => (load(&a, Command::Rate), a.output_dir),
    };
    let dir_for_errors = |cfg: Option<&ExperimentConfig>| match cfg {
        Some(c) => c.resolved_output_dir(),
        None => fallback_dir.clone().unwrap_or_else(|| ExperimentConfig::for_command(Command::Validate).resolved_output_dir()),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(failure) => {
            failure.write_record(&dir_for_errors(None));
            eprintln!("{failure}");
            return ExitCode::from(failure.kind.exit_code() as u8);
        }
    };
    match run(&cfg) {
        Ok(summary) => {
            print!("{}", summary.report);
            println!("results: {}", summary.results.display());
            println!("metadata: {}", summary.metadata.display());
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(failure) => {
            failure.write_record(&dir_for_errors(Some(&cfg)));
            eprintln!("{failure}");
            ExitCode::from(failure.kind.exit_code() as u8)
        }
    }
}
