use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "needlets", version, about = "Needlet polyspectra: constants, exact variances and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Asymptotic constants c_q by every available route.
    Constants(Common),
    /// Exact finite-scale variances and their convergence to q! c_q.
    Variance(Common),
    /// Monte Carlo polyspectra: variances, cumulants and distances.
    Mc(Common),
    /// Excursion area, defect and truncated chaos expansion.
    Excursion(Common),
    /// Print the tables found in the output directory.
    Report(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated q list (overrides the config).
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<usize>>,
    /// Comma-separated j list (overrides the config).
    #[arg(long, value_delimiter = ',')]
    j: Option<Vec<u32>>,
    /// Validate and print the compute plan without computing.
    #[arg(long)]
    dry_run: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(CliError::Config("threads must be >= 1".into()));
            }
            cfg.experiment.threads = Some(t);
        }
        if let Some(s) = self.seed {
            cfg.experiment.master_seed = s;
        }
        if let Some(q) = &self.q {
            cfg.experiment.q = q.clone();
        }
        if let Some(j) = &self.j {
            cfg.experiment.j = j.clone();
        }
        Ok(cfg)
    }
}

type Handler = fn(&RunConfig, bool) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Constants(c) => (c, commands::constants),
        Command::Variance(c) => (c, commands::variance),
        Command::Mc(c) => (c, commands::mc),
        Command::Excursion(c) => (c, commands::excursion),
        Command::Report(c) => (c, commands::report),
    };
    let cfg = common.resolve()?;
    if let Some(t) = cfg.experiment.threads {
        // fails only if the pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    cmd(&cfg, common.dry_run)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
