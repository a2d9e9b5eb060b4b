use clap::{Parser, Subcommand};
use pool_al::config::{load_config, ConfigError};
use pool_al::data::{save_lut, synthetic_generate};
use pool_al::report::{run_spec, write_outputs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Pool-based active learning experiments for kernel regression retrieval.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Print progress and debug messages.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and write curve and summary files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the configured synthetic dataset as a LUT file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const RUNTIME_FAILURE: u8 = 1;
const CONFIG_FAILURE: u8 = 2;

fn config_error(path: &Path, e: &ConfigError) -> ExitCode {
    eprintln!("error: {}: {e}", path.display());
    ExitCode::from(CONFIG_FAILURE)
}

fn runtime_error(e: &pool_al::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(RUNTIME_FAILURE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(spec) => {
                let kinds = spec.strategies().unwrap_or_default();
                println!(
                    "{}: ok ({} strategies, target {}, regressor {})",
                    config.display(),
                    kinds.len(),
                    spec.experiment.target,
                    spec.experiment.regressor
                );
                ExitCode::SUCCESS
            }
            Err(e) => config_error(&config, &e),
        },
        Command::Synth { config, out } => {
            let spec = match load_config(&config) {
                Ok(s) => s,
                Err(e) => return config_error(&config, &e),
            };
            let Some(syn) = &spec.data.synthetic else {
                let e = ConfigError {
                    line: None,
                    column: None,
                    message: "synth needs a [data.synthetic] table".into(),
                };
                return config_error(&config, &e);
            };
            match synthetic_generate(syn).and_then(|ds| save_lut(&out, &ds)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => runtime_error(&e),
            }
        }
        Command::Run { config, out } => {
            let spec = match load_config(&config) {
                Ok(s) => s,
                Err(e) => return config_error(&config, &e),
            };
            let (learning, validation, prep) = match spec.learning_validation() {
                Ok(d) => d,
                // a column or target the data does not have
                Err(pool_al::Error::Usage(m)) => {
                    let e = ConfigError {
                        line: None,
                        column: None,
                        message: m,
                    };
                    return config_error(&config, &e);
                }
                Err(e) => return runtime_error(&e),
            };
            let result =
                run_spec(&spec, &learning, &validation, &prep).and_then(|run| write_outputs(&spec, &run, &out));
            match result {
                Ok(files) => {
                    log::info!("wrote {} files to {}", files.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => runtime_error(&e),
            }
        }
    }
}
