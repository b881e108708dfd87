//! `cylconvex`: run configs and builtin examples, write JSON reports and
//! polyline CSVs.
//!
//! Exit codes: 0 all checks passed, 1 config or I/O error, 2 non-closed
//! holonomy, 3 a check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cylconvex::config::RunConfig;
use cylconvex::registry;
use cylconvex::report::{self, RunReport, EXIT_CONFIG, REPORT_SCHEMA};

#[derive(Parser, Debug)]
#[command(name = "cylconvex", version, about = "Cylinder-valued momentum maps and convexity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a builtin example.
    Example {
        name: String,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the builtin examples.
    ListExamples,
    /// Print the JSON schema of the report.
    Schema,
}

fn finish(result: cylconvex::Result<RunReport>, out: &Path) -> ExitCode {
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(report::exit_code_for(&e) as u8);
        }
    };
    match report.write_outputs(out) {
        Ok(path) => {
            for c in &report.checks {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            println!("report: {}", path.display());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CYLCONVEX_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(report::exit_code_for(&e) as u8);
                }
            };
            let base = config.parent().unwrap_or(Path::new("."));
            let out = out.unwrap_or_else(|| base.join(&cfg.output.dir));
            log::info!("running {} into {}", config.display(), out.display());
            finish(report::run(&cfg, base), &out)
        }
        Command::Example { name, resolution, out } => {
            let cfg = match registry::lookup(&name) {
                Ok(ex) => ex.config(resolution),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            finish(report::run(&cfg, Path::new(".")), &out)
        }
        Command::ListExamples => {
            for ex in registry::examples() {
                println!("{:<18} {}", ex.name, ex.description);
            }
            ExitCode::SUCCESS
        }
        Command::Schema => {
            print!("{REPORT_SCHEMA}");
            ExitCode::SUCCESS
        }
    }
}
