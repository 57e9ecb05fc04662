use balmet::{jobs, CliError, Overrides, RunConfig};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "balmet", version, about = "Balanced metrics on polarized curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the job described by a JSON configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Validate a configuration without running it.
    Check { config: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BALMET_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::validation("BALMET_THREADS", format!("expected a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation("BALMET_THREADS", e.to_string()))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Run { config, seed, output_dir, max_iters } => {
            let cfg = RunConfig::load(&config, &Overrides { seed, output_dir, max_iters })?;
            jobs::run(&cfg)?;
            println!("{}", serde_json::json!({ "status": "ok", "output_dir": cfg.output_dir }));
        }
        Command::Check { config } => {
            let cfg = RunConfig::load(&config, &Overrides::default())?;
            println!("{}", serde_json::json!({ "status": "ok", "job": cfg.job }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                e.exit();
            }
            eprintln!("{}", CliError::validation("arguments", e.to_string().trim()).to_json());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
