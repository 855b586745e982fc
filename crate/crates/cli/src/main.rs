use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use kslab::config::{parse_config, parse_sweep_config, ExperimentConfig};
use kslab::runner::{error_exit_code, run_experiment, EXIT_CONFIG, EXIT_IO};
use kslab::Error;

/// Overrides the root that relative output directories are resolved against.
const OUTPUT_ROOT_VAR: &str = "KSLAB_OUTPUT_ROOT";

#[derive(Parser)]
#[command(
    name = "kslab",
    version,
    about = "Experiments for the screened Riesz active scalar"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write into this directory instead of the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file and print the resolved settings.
    Validate { config: PathBuf },
    /// Run the inequality sweep of a config file, whatever its mode.
    Sweep { config: PathBuf },
}

fn load(path: &Path, sweep: bool) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if sweep {
        parse_sweep_config(&text)
    } else {
        parse_config(&text)
    }
}

fn output_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if cfg.output.dir.is_relative() => PathBuf::from(root).join(&cfg.output.dir),
        _ => cfg.output.dir.clone(),
    }
}

fn fail(err: &Error) -> ExitCode {
    error!("{err}");
    eprintln!("error: {err}");
    ExitCode::from(error_exit_code(err) as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }

    let (path, sweep, validate_only) = match &cli.command {
        Command::Run { config } => (config, false, false),
        Command::Validate { config } => (config, false, true),
        Command::Sweep { config } => (config, true, false),
    };
    let cfg = match load(path, sweep) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    if validate_only {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }

    let dir = output_dir(&cfg, cli.out);
    info!("{} -> {}", cfg.mode.name(), dir.display());
    match run_experiment(&cfg, &dir) {
        Ok(outcome) => {
            println!("{}", outcome.manifest_path.display());
            if let Some(reason) = &outcome.manifest.stop_reason {
                println!("stop_reason = {reason}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e @ Error::Io { .. }) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO as u8)
        }
        Err(e) => fail(&e),
    }
}
