use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use linstab_cli::{load_config, run, EnvEcho, Overrides, OUTPUT_DIR_ENV};

/// Exit status when the run finished but a contract failed.
const CONTRACT_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "linstab", version, about = "Run linstab experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` and the LINSTAB_OUTPUT_DIR variable.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a config and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        ExitCode::from(5)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env_dir = std::env::var(OUTPUT_DIR_ENV).ok();
    match cli.command {
        Command::Validate { config } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(code) => return code,
            };
            match load_config(&text, &Overrides { env_output_dir: env_dir, ..Default::default() }) {
                Ok(c) => {
                    println!("{}", serde_json::to_string_pretty(&c).expect("config serialises"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprint!("{e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Run { config, output_dir, seed } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let overrides = Overrides { output_dir, seed, env_output_dir: env_dir.clone() };
            let cfg = match load_config(&text, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprint!("{e}");
                    return ExitCode::from(3);
                }
            };
            match run(&cfg, EnvEcho { output_dir: env_dir }) {
                Ok(report) => {
                    for c in &report.checks {
                        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                    println!("report: {}", cfg.output_dir.join("report.json").display());
                    if report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(CONTRACT_FAILED)
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
