//! `voi`: run, validate and extract plot data from VoI experiments.
//!
//! Exit status: 0 when the run passes, 1 on usage or configuration errors,
//! 2 when a scenario's acceptance checks fail.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voi_core::cli::{emit_plotdata, run, ExperimentConfig, Figure, Scenario};

#[derive(Parser)]
#[command(name = "voi", version, about = "Value-of-information experiments for vehicle following and C-V2X")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run(ConfigArgs),
    /// Check a configuration without running it.
    Validate(ConfigArgs),
    /// Extract figure-shaped series from a run directory.
    Plot {
        /// Run directory holding trajectory.csv.
        #[arg(long)]
        out: PathBuf,
        /// fig4_style or fig5_style.
        #[arg(long)]
        figure: String,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// case8_voi, case11_comm, tabular_properties or custom.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    seed: Option<i64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override such as `network.t_slots=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(args: &ConfigArgs) -> voi_core::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| voi_core::Error::io(p, e))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::new(Scenario::TabularProperties),
    };
    if let Some(s) = &args.scenario {
        cfg.scenario = Scenario::parse(s)?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.episodes {
        cfg.episodes = e;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    for a in &args.set {
        cfg.set(a)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match load(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            match run(&cfg) {
                Ok(outcome) => {
                    for a in &outcome.artifacts {
                        println!("{}", a.display());
                    }
                    println!("{}: {}", cfg.scenario.name(), if outcome.pass { "PASS" } else { "FAIL" });
                    ExitCode::from(outcome.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Validate(args) => match load(&args) {
            Ok(cfg) => {
                let report = cfg.validate();
                if report.valid {
                    println!("valid");
                    ExitCode::SUCCESS
                } else {
                    for v in &report.violations {
                        println!("violation: {v}");
                    }
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Plot { out, figure } => {
            let Some(fig) = Figure::parse(&figure) else {
                eprintln!("error: unknown figure {figure:?}; expected fig4_style or fig5_style");
                return ExitCode::from(1);
            };
            match emit_plotdata(&out, fig) {
                Ok(p) => {
                    println!("{}", p.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
