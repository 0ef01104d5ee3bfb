use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infomapf::validate::{Suite, ValidateOptions};
use infomapf_cli::{cmd_bench, cmd_run, cmd_validate, exit, format_summary, CliError};

#[derive(Parser)]
#[command(name = "infomapf", version, about = "Information-driven multi-agent search missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write its record.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every scenario × algorithm × seed of a sweep file.
    Bench {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Run the planner property suites.
    Validate {
        /// Suite to run; repeatable. Defaults to every suite but `lemma`.
        #[arg(long, value_parser = parse_suite)]
        suite: Vec<Suite>,
        /// Instances per suite; each suite has its own default.
        #[arg(long)]
        trials: Option<usize>,
        /// First instance seed; trial k uses seed + k.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        quadrature_order: usize,
    },
}

fn parse_suite(name: &str) -> Result<Suite, String> {
    Suite::parse(name).ok_or_else(|| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("unknown suite `{name}` (expected one of {})", names.join(", "))
    })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let record = cmd_run(&scenario, seed, &out)?;
            println!(
                "{}: {} unique phenomena, {} nodes generated",
                record.run_id, record.metrics.unique_phenomena_discovered, record.metrics.nodes_generated
            );
            Ok(exit::OK)
        }
        Command::Bench { sweep, out, workers } => {
            let outcome = cmd_bench(&sweep, &out, workers)?;
            print!("{}", format_summary(&outcome.summary));
            for (id, err) in &outcome.failures {
                eprintln!("run {id} failed: {err}");
            }
            println!("{} runs succeeded, {} failed", outcome.records.len(), outcome.failures.len());
            Ok(if outcome.failures.is_empty() { exit::OK } else { exit::RUN_FAILURE })
        }
        Command::Validate { suite, trials, seed, quadrature_order } => {
            let opts = ValidateOptions { trials, seed, quadrature_order };
            let reports = cmd_validate(&suite, &opts)?;
            for r in &reports {
                println!("{r}");
            }
            Ok(if reports.iter().all(|r| r.passed()) { exit::OK } else { exit::RUN_FAILURE })
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    };
    ExitCode::from(code as u8)
}
