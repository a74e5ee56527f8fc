use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adviser::harness::{commands, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(
    name = "adviser",
    version,
    about = "Keypoint query selection for viewpoint estimation"
)]
struct Cli {
    /// Master seed for data generation, splits and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic advisee records (train.jsonl, test.jsonl).
    Generate,
    /// Validate a record file and compute the non-learned policy rows.
    Ingest { records: Option<PathBuf> },
    /// Train an adviser and write its checkpoint.
    Train {
        #[arg(long)]
        train_records: Option<PathBuf>,
    },
    /// Evaluate a checkpoint against every policy on test records.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Train and evaluate on one split.
    Full {
        #[arg(long)]
        train_records: Option<PathBuf>,
        #[arg(long)]
        test_records: Option<PathBuf>,
    },
    /// Repeated seeded splits of one record set, aggregated as mean ± std.
    Small { records: Option<PathBuf> },
    /// Classification against degree and radian error regression.
    Compare,
    /// Soft-label temperature sweep.
    Sweep {
        /// Comma-separated temperatures.
        #[arg(long)]
        temperatures: Option<String>,
    },
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    for assignment in &cli.overrides {
        cfg.apply_override(assignment)?;
    }
    let path = |p: &PathBuf| p.display().to_string();
    let mut set = |k: &str, v: String| cfg.set(k, &v);
    match &cli.command {
        Command::Ingest { records: Some(p) } | Command::Small { records: Some(p) } => {
            set("records", path(p))?
        }
        Command::Train {
            train_records: Some(p),
        } => set("train_records", path(p))?,
        Command::Evaluate {
            checkpoint,
            records,
        } => {
            if let Some(p) = checkpoint {
                set("checkpoint", path(p))?;
            }
            if let Some(p) = records {
                set("records", path(p))?;
            }
        }
        Command::Full {
            train_records,
            test_records,
        } => {
            if let Some(p) = train_records {
                set("train_records", path(p))?;
            }
            if let Some(p) = test_records {
                set("test_records", path(p))?;
            }
        }
        Command::Sweep {
            temperatures: Some(t),
        } => set("temperatures", t.clone())?,
        _ => {}
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, ExperimentError> {
    let cfg = build_config(cli)?;
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Ingest { .. } => commands::ingest(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg),
        Command::Full { .. } => commands::full(&cfg),
        Command::Small { .. } => commands::small(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Sweep { .. } => commands::sweep(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(ExperimentError::Ingest(err)) if !err.line_errors().is_empty() => {
            for line in err.line_errors() {
                eprintln!("{line}");
            }
            eprintln!("error: {} malformed line(s)", err.line_errors().len());
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
