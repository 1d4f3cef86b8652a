//! `kirchlab`: configuration-driven runner for the Kirchhoff toolkit.
//!
//! Exit status: 0 when every certificate passes, 2 on a scientific failure
//! (violated certificate, non-convergence, breakdown), 1 on a usage or
//! configuration error.

mod config;
mod output;
mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use scenarios::{Failure, Outcome, Scenario};

#[derive(Debug, Parser)]
#[command(name = "kirchlab", version, about = "Spectral simulation and certification for damped Kirchhoff equations")]
struct Cli {
    #[arg(value_enum)]
    scenario: Scenario,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SCIENCE: u8 = 2;

fn write_outcome(dir: &Path, o: &Outcome, plots: bool) -> Result<(), String> {
    output::write_summary(dir, &o.summary)?;
    output::write_csv(dir, &o.table)?;
    if plots {
        for p in &o.plots {
            output::write_plot(dir, &o.table, p)?;
        }
        for (t, p) in &o.extra_plots {
            output::write_plot(dir, t, p)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut cfg = match config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(EXIT_CONFIG);
    }

    match scenarios::run(cli.scenario, &cfg) {
        Ok(o) => {
            if let Err(e) = write_outcome(&cli.out, &o, cli.plots) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            println!("{}: {}", cli.scenario.name(), if o.pass { "pass" } else { "FAIL" });
            if o.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SCIENCE)
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {}: {msg}", cli.config.display());
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Science { message, mut summary }) => {
            summary["seed"] = json!(cfg.seed);
            if let Err(e) = output::write_summary(&cli.out, &summary) {
                eprintln!("error: {e}");
            }
            eprintln!("{}: FAIL: {message}", cli.scenario.name());
            ExitCode::from(EXIT_SCIENCE)
        }
    }
}
