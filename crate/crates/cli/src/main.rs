use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use divergent_cli::artifacts::sha256_hex;
use divergent_cli::config::RunConfig;
use divergent_cli::pipeline::{self, parse_stages, Stage};

/// Corpus divergence, topic networks and diversity comparisons.
#[derive(Debug, Parser)]
#[command(name = "divergent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed; overrides `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the configuration and report every problem found.
    Validate,
    /// Run the selected stages.
    Run {
        /// Comma-separated subset of timeseries,shift,network,diversity, or `all`.
        #[arg(long, default_value = "all", value_name = "LIST")]
        stages: String,
    },
    /// Word shift reports per window.
    Shift,
    /// Topic networks and centrality tables per window and anchor.
    Network,
    /// Subsampled diversity per month, anchor and kind.
    Diversity,
    /// Tweet counts over time.
    Timeseries,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(execute(cli))
}

fn execute(cli: Cli) -> u8 {
    let Some(path) = cli.config else {
        eprintln!("error: --config PATH is required");
        return 1;
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 1;
        }
    };
    let mut cfg = match RunConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    let stages = match cli.command {
        Command::Validate => {
            let findings = cfg.validate();
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                println!("ok");
                return 0;
            }
            return 1;
        }
        Command::Run { stages } => match parse_stages(&stages) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: --stages: {e}");
                return 1;
            }
        },
        Command::Shift => [Stage::Shift].into(),
        Command::Network => [Stage::Network].into(),
        Command::Diversity => [Stage::Diversity].into(),
        Command::Timeseries => [Stage::Timeseries].into(),
    };

    match pipeline::run(&cfg, &sha256_hex(&bytes), &stages) {
        Ok(m) => {
            println!(
                "wrote {} artifacts to {} ({} slots skipped)",
                m.artifacts.len(),
                cfg.output_dir.display(),
                m.skipped.len()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
