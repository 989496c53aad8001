use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpde::pipeline::{self, Layout, Stage};
use qpde::{report, QpdeError, Result, RunConfig};

/// Compressed-circuit quantum phase difference estimation.
#[derive(Parser)]
#[command(name = "qpde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Builds the Hamiltonian, DMRG states, superposition MPS and U_ref.
    Prepare(ConfigArgs),
    /// Compresses U_prep and U_evol into brick-wall circuits.
    Compress(ConfigArgs),
    /// Runs the Bayesian estimation loop on the compressed circuits.
    Estimate(ConfigArgs),
    /// Runs prepare, compress and estimate.
    Run(ConfigArgs),
    /// Finds a low-cost orbital ordering for an FCIDUMP file.
    Reorder {
        fcidump: PathBuf,
        /// Takes the `[ga]` section from this configuration.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Writes the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints the default configuration.
    Defaults,
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn print_stage(cfg: &RunConfig, outcome: &pipeline::StageOutcome) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    println!("{}", report::stage_line(outcome));
    match outcome.stage {
        Stage::Prepare => print!("{}", report::prepare_report(&pipeline::read_prepare_summary(&layout)?)),
        Stage::Compress => print!("{}", report::compress_report(&pipeline::read_metrics(&layout)?)),
        Stage::Estimate => {
            let s = pipeline::read_estimate_summary(&layout)?;
            print!(
                "{}",
                report::estimate_report(s.mode, s.mu, s.sigma, s.energy, s.gate_counts.len(), s.converged)
            );
        }
    }
    Ok(())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| QpdeError::io(p, e)),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => {
            let cfg = load(&a)?;
            print_stage(&cfg, &pipeline::prepare(&cfg)?)
        }
        Command::Compress(a) => {
            let cfg = load(&a)?;
            print_stage(&cfg, &pipeline::compress_stage(&cfg)?)
        }
        Command::Estimate(a) => {
            let cfg = load(&a)?;
            print_stage(&cfg, &pipeline::estimate_stage(&cfg)?)
        }
        Command::Run(a) => {
            let cfg = load(&a)?;
            for o in pipeline::run_all(&cfg)? {
                print_stage(&cfg, &o)?;
            }
            Ok(())
        }
        Command::Reorder {
            fcidump,
            config,
            seed,
            out,
        } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            let r = pipeline::reorder(&fcidump, &cfg.ga_config(), seed.unwrap_or(cfg.ga.seed))?;
            eprint!("{}", report::reorder_report(&r));
            let mut text = serde_json::to_string_pretty(&r)?;
            text.push('\n');
            write_out(out.as_deref(), &text)
        }
        Command::Defaults => write_out(None, &RunConfig::default().to_toml_string()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
