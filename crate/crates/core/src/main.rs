use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use robust_ocp::harness::config::parse_seed_list;
use robust_ocp::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "robust-ocp",
    version,
    about = "Online conformal prediction under uniform label noise",
    after_help = "Output directory: --out, else output_dir from the config, else $ROBUST_OCP_OUT_DIR, else ./out"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over its seeds and write summaries and per-step records.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds or ranges, e.g. "1,2,10-20"; overrides the config.
        #[arg(long)]
        seed: Option<String>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write steps.csv even for horizons above 100,000.
        #[arg(long)]
        emit_steps: bool,
    },
    /// Run every sweep cell and print the comparison table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        /// Output directory for sweep.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the exact identities and the run-level theory bounds.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path, seed: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(config)
        .with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seeds = parse_seed_list(s)?;
    }
    Ok(cfg)
}

/// `--out`, then the config's `output_dir`, then `ROBUST_OCP_OUT_DIR`, then `./out`.
fn out_dir(cli: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    harness::resolve_out_dir(cli.as_deref(), cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out, emit_steps } => {
            let mut cfg = load(&config, seed.as_deref())?;
            cfg.emit_steps |= emit_steps;
            let runs = harness::run_experiment(&cfg)?;
            let dir = out_dir(out, &cfg);
            harness::write_run_outputs(&dir, &cfg, &runs)
                .with_context(|| format!("writing outputs to {}", dir.display()))?;
            print!("{}", harness::output::aggregate_csv(&runs));
            let failed: Vec<String> = runs
                .iter()
                .flat_map(|r| {
                    r.summary
                        .theory_checks
                        .values()
                        .filter(|v| !v.passed)
                        .map(move |v| format!("seed {}: {v}", r.summary.seed))
                })
                .collect();
            for line in &failed {
                eprintln!("{line}");
            }
            eprintln!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Sweep { config, seed, out } => {
            let cfg = load(&config, seed.as_deref())?;
            let cells = harness::run_sweep(&cfg)?;
            let table = harness::sweep_table(&cfg, &cells);
            let dir = out_dir(out, &cfg);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("sweep.csv"), &table)?;
            print!("{table}");
            Ok(true)
        }
        Command::Verify { config, seed, out } => {
            let cfg = load(&config, seed.as_deref())?;
            let report = harness::verify(&cfg)?;
            for line in report.lines() {
                println!("{line}");
            }
            let dir = out_dir(out, &cfg);
            std::fs::create_dir_all(&dir)?;
            let mut json = serde_json::to_string_pretty(&report)?;
            json.push('\n');
            std::fs::write(dir.join("verify.json"), json)?;
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
