use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tan::config::{parse_seeds, ExperimentConfig};
use tan::report;
use tan::runner::{self, SweepParam};
use tan::Result;

/// Train and evaluate task adaptation networks on domain-shift data.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as CSV files.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train every seed and aggregate the validation metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Seeds to run, `0..9` (inclusive) or `1,2,3`; overrides the config.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Train the four objective variants and tabulate them.
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train once per value of a setting.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// lambda,mu | lambda | mu | m | sigma | alpha | beta | pivot_strategy | adaptor_variant | adaptor_hidden
        #[arg(long)]
        param: String,
        /// Comma-separated values; `lambda,mu` uses them for both axes.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for p in runner::cmd_generate(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Train { config, seeds } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s)?;
            }
            let (agg, path) = runner::cmd_train(&cfg)?;
            let (m, s) = (&agg.mean, &agg.std);
            println!("{} ({}, {} seeds)", agg.experiment, agg.variant, agg.seeds.len());
            for (name, mean, std) in [
                ("precision", m.precision, s.precision),
                ("recall", m.recall, s.recall),
                ("f1", m.f1, s.f1),
                ("accuracy", m.accuracy, s.accuracy),
            ] {
                println!("  {name:<9}  {} ± {}", report::percent(mean), report::percent(std));
            }
            println!("{}", path.display());
        }
        Command::Ablate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = runner::cmd_ablate(&cfg)?;
            print!("{}", report::ablation_text(&rows));
        }
        Command::Sweep { config, param, values } => {
            let cfg = ExperimentConfig::load(&config)?;
            let param: SweepParam = param.parse()?;
            let result = runner::cmd_sweep(&cfg, param, &values)?;
            for c in &result.cells {
                match &c.outcome {
                    Ok(a) => println!("{}={}  f1 {}", param, c.values.join(","), report::percent(a.mean.f1)),
                    Err(e) => println!("{}={}  failed: {e}", param, c.values.join(",")),
                }
            }
            println!("{}", result.csv.display());
            if result.failures() > 0 {
                eprintln!("{} of {} sweep cells failed", result.failures(), result.cells.len());
                return Ok(false);
            }
        }
    }
    Ok(true)
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
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

