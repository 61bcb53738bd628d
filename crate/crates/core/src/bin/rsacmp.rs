use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsacmp::empirical::{run_empirical, write_synthetic_norms, EmpiricalConfig};
use rsacmp::harness::{run_experiment, ExperimentConfig};
use rsacmp::Error;

#[derive(Parser)]
#[command(name = "rsacmp", version, about = "Compare regression and RSA for model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation experiment and write results.csv and summary.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Subsample a norm dataset and compare composites.
    Empirical {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the synthetic stand-in norm dataset.
    SynthNorms {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn output_dir(flag: Option<PathBuf>, configured: Option<PathBuf>) -> Result<PathBuf, Error> {
    flag.or(configured)
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            workers,
            seed,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.validate()?;
            let dir = output_dir(out, cfg.output_dir.clone())?;
            let result = run_experiment(&cfg)?;
            result.write(&dir)?;
            eprintln!("wrote {} records and {} summary rows to {}", result.records.len(), result.summary.len(), dir.display());
        }
        Command::Empirical {
            data,
            config,
            out,
            workers,
        } => {
            let mut cfg = EmpiricalConfig::from_path(&config)?;
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            cfg.validate()?;
            let dir = output_dir(out, cfg.output_dir.clone())?;
            let dataset = cfg.load(&data)?;
            eprintln!("loaded {} rows ({} dropped as incomplete)", dataset.n_items(), dataset.dropped);
            let result = run_empirical(&dataset, &cfg)?;
            result.write(&dir)?;
            eprintln!("wrote {} records and {} summary rows to {}", result.records.len(), result.summary.len(), dir.display());
        }
        Command::SynthNorms { out, rows, seed } => {
            write_synthetic_norms(&out, rows, seed)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::MissingColumn(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
