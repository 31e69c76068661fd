use std::path::PathBuf;
use std::process::ExitCode;

use adiv_cli::config::RunConfig;
use adiv_cli::runner::{error_report, run, Command};
use adiv_cli::{list_presets, RunError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adiv", version, about = "Runs matrix-model experiments and writes JSON reports")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config; omit to use `{}`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Print a flat text summary instead of the JSON report.
    #[arg(long)]
    summary: bool,
}

#[derive(Subcommand)]
enum Sub {
    TowerBuild(RunArgs),
    TowerCheck(RunArgs),
    GenConstruct(RunArgs),
    GenVerify(RunArgs),
    Recover(RunArgs),
    StabilizeSweep(RunArgs),
    CoverEstimate(RunArgs),
    CountingCheck(RunArgs),
    Lemma52Check(RunArgs),
    /// Every check with the acceptance defaults.
    All(RunArgs),
    /// Print the preset catalog.
    Presets,
}

fn load(args: &RunArgs) -> Result<RunConfig, RunError> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.display().to_string(), source })?,
        None => "{}".into(),
    };
    let mut config = RunConfig::from_json(&text)?;
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::TowerBuild(a) => (Command::TowerBuild, a),
        Sub::TowerCheck(a) => (Command::TowerCheck, a),
        Sub::GenConstruct(a) => (Command::GenConstruct, a),
        Sub::GenVerify(a) => (Command::GenVerify, a),
        Sub::Recover(a) => (Command::Recover, a),
        Sub::StabilizeSweep(a) => (Command::StabilizeSweep, a),
        Sub::CoverEstimate(a) => (Command::CoverEstimate, a),
        Sub::CountingCheck(a) => (Command::CountingCheck, a),
        Sub::Lemma52Check(a) => (Command::Lemma52Check, a),
        Sub::All(a) => (Command::All, a),
        Sub::Presets => {
            println!("{}", serde_json::to_string_pretty(&list_presets()).expect("catalog serializes"));
            return ExitCode::SUCCESS;
        }
    };
    let report = match load(&args) {
        Ok(config) => run(command, &config, args.out.as_deref()),
        Err(e) => {
            let report = error_report(command, &e);
            if let Some(path) = &args.out {
                if let Err(io) = std::fs::write(path, report.to_json()) {
                    eprintln!("{}: {io}", path.display());
                }
            }
            report
        }
    };
    if args.summary {
        print!("{}", report.summary());
    } else {
        println!("{}", report.to_json());
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
