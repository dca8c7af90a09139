use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddl_cli::experiments::{compare, denoise, run_synthetic};
use ddl_cli::validate::run_checks;
use ddl_cli::{CliError, Config, Overrides, Result};
use ddl_core::image::{write_pgm, PgmFormat};
use ddl_core::metrics::write_labeled_csv;
use ddl_core::MetricsTrace;

/// Distributed dictionary learning over simulated agent networks.
#[derive(Parser)]
#[command(name = "ddl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file; defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rounds to run (for `denoise`, rounds of the denoising run).
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// plain | linearized
    #[arg(long, global = true)]
    variant: Option<String>,
    #[arg(long, global = true)]
    agents: Option<usize>,
    /// Graph schedule kind, e.g. static_ring or tv_ring_partition.
    #[arg(long, global = true)]
    graph: Option<String>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Learn on the synthetic instance and write the metrics trace.
    Run,
    /// Denoise an image with the learned dictionary.
    Denoise,
    /// Both variants against the diffusion baseline at equal message budgets.
    Compare,
    /// Graph, weight, gradient and prox self-checks.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common, denoising: bool) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let overrides = Overrides {
        seed: common.seed,
        rounds: common.rounds,
        variant: common.variant.clone(),
        agents: common.agents,
        graph: common.graph.clone(),
    };
    cfg.apply(&overrides, denoising)?;
    Ok(cfg)
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::Write(dir.to_path_buf(), e))?;
    Ok(dir.join(name))
}

fn write_trace(path: &Path, trace: &MetricsTrace) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::Write(path.to_path_buf(), e))?;
    trace.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let dir = &cli.common.out_dir;
    match cli.command {
        Command::Run => {
            let cfg = load_config(&cli.common, false)?;
            let trace = run_synthetic(&cfg)?;
            let path = out_file(dir, "trace.csv")?;
            write_trace(&path, &trace)?;
            if let Some(last) = trace.last() {
                println!(
                    "rounds {} messages {} objective {:.6} delta {:.3e} cons_err {:.3e}",
                    last.nu, last.messages, last.objective, last.delta, last.cons_err
                );
                if last.unconverged > 0 {
                    eprintln!(
                        "note: {} inner solves hit their iteration cap",
                        last.unconverged
                    );
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Denoise => {
            let cfg = load_config(&cli.common, true)?;
            let out = denoise(&cfg)?;
            for (name, img) in [
                ("clean.pgm", &out.clean),
                ("noisy.pgm", &out.noisy),
                ("denoised.pgm", &out.denoised),
            ] {
                write_pgm(out_file(dir, name)?, img, PgmFormat::Binary)?;
            }
            write_trace(&out_file(dir, "denoise_trace.csv")?, &out.trace)?;
            let report = format!(
                "messages {}\ninput  psnr {:.2} dB  mse {:.2}\noutput psnr {:.2} dB  mse {:.2}\n",
                out.messages, out.input.psnr, out.input.mse, out.output.psnr, out.output.mse
            );
            let path = out_file(dir, "report.txt")?;
            fs::write(&path, &report).map_err(|e| CliError::Write(path.clone(), e))?;
            print!("{report}");
        }
        Command::Compare => {
            let cfg = load_config(&cli.common, false)?;
            let out = compare(&cfg)?;
            let path = out_file(dir, "compare.csv")?;
            let file = File::create(&path).map_err(|e| CliError::Write(path.clone(), e))?;
            let labeled: Vec<(&str, &MetricsTrace)> =
                out.traces.iter().map(|(n, t)| (n.as_str(), t)).collect();
            write_labeled_csv(&labeled, BufWriter::new(file))?;
            println!(
                "{:<16} {:>8} {:>6} {:>12} {:>11} {:>11}",
                "method", "budget", "round", "objective", "delta", "cons_err"
            );
            for e in &out.entries {
                println!(
                    "{:<16} {:>8} {:>6} {:>12.5} {:>11.3e} {:>11.3e}",
                    e.method, e.budget, e.row.nu, e.row.objective, e.row.delta, e.row.cons_err
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Validate => {
            let cfg = load_config(&cli.common, false)?;
            let checks = run_checks(&cfg);
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
