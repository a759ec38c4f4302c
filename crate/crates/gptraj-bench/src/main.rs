//! Command-line experiment runner.
//!
//! `gptraj-bench run <config> [--out dir] [--seed N] [--threads N]
//! [--strict]` executes the grid described by the config file and writes
//! `results.csv` plus any auxiliary reports into the output directory.
//!
//! Exit status: 0 on success, 1 on configuration or runtime errors, 2 when
//! `--strict` is set and any grid point failed to converge.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gptraj_bench::config::BenchConfig;
use gptraj_bench::runner;

#[derive(Parser)]
#[command(name = "gptraj-bench", version, about = "Synthetic estimator benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment grid described by a config file.
    Run {
        /// Path to the key-value config file.
        config: PathBuf,
        /// Output directory (overrides the config's `out` key).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config's `seed` key).
        #[arg(long)]
        seed: Option<u64>,
        /// Cap the data-parallel thread count.
        #[arg(long)]
        threads: Option<usize>,
        /// Exit with status 2 if any grid point fails to converge.
        #[arg(long)]
        strict: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            seed,
            threads,
            strict,
        } => run_cmd(&config, out, seed, threads, strict),
    }
}

fn run_cmd(
    config: &PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
    strict: bool,
) -> ExitCode {
    let mut cfg = match BenchConfig::load(config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out = out.display().to_string();
    }
    if let Some(n) = threads {
        if let Err(e) = limit_threads(n) {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }

    let outcome = match runner::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let out_dir = PathBuf::from(&cfg.out);
    if let Err(e) = write_outputs(&out_dir, &outcome) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    println!(
        "wrote {} rows to {}",
        outcome.records.len(),
        out_dir.join("results.csv").display()
    );

    let stragglers: Vec<String> = outcome
        .records
        .iter()
        .filter(|r| !r.result.converged)
        .map(|r| {
            format!(
                "omega={} dt={} {}/{}",
                r.result.omega,
                r.result.dt,
                gptraj_bench::config::repr_name(r.result.repr),
                gptraj_bench::config::mode_name(r.result.mode)
            )
        })
        .collect();
    if !stragglers.is_empty() {
        eprintln!("non-converged grid points: {}", stragglers.join(", "));
        if strict {
            return ExitCode::from(2);
        }
    }
    ExitCode::SUCCESS
}

fn write_outputs(out_dir: &PathBuf, outcome: &runner::Outcome) -> anyhow::Result<()> {
    use anyhow::Context;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let csv_path = out_dir.join("results.csv");
    std::fs::write(&csv_path, &outcome.csv)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    for (name, contents) in &outcome.aux {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Apply `--threads` to the data-parallel pool. Without the parallel
/// feature everything already runs on one thread, so the flag is accepted
/// and ignored.
#[cfg(feature = "parallel")]
fn limit_threads(n: usize) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow::anyhow!("configuring the thread pool: {e}"))
}

#[cfg(not(feature = "parallel"))]
fn limit_threads(_n: usize) -> anyhow::Result<()> {
    log::warn!("--threads has no effect in a build without the parallel feature");
    Ok(())
}
