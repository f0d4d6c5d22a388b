//! `pqvi`: config-driven experiment runner for the parabolic QVI lab.
//!
//! `pqvi run <config> [--jobs k] [--out dir] [--seed n]` executes one
//! experiment; `pqvi check` runs the built-in acceptance suite and prints a
//! pass/fail table.

use clap::{Parser, Subcommand};
use pqvi_cli::{acceptance, config, runner};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pqvi", about = "Parabolic QVI laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the flat key-value config file.
        config: PathBuf,
        /// Parallel workers for independent sub-runs (s-values, refinement
        /// levels). Results are collected in deterministic order.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides `output.dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override for randomised checks (recorded in the summary).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in acceptance suite and print one line per criterion.
    Check,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            jobs,
            out,
            seed,
        } => run_command(config, jobs, out, seed),
        Command::Check => check_command(),
    }
}

fn run_command(
    config_path: PathBuf,
    jobs: usize,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> ExitCode {
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config parse failed: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.raw.insert("seed".into(), s.to_string());
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    match runner::run(&cfg, &out_dir, jobs) {
        Ok(outcome) => {
            println!(
                "{}: {} (summary: {})",
                cfg.kind,
                if outcome.ok { "ok" } else { "FAILED ASSERTIONS" },
                out_dir.join("summary.json").display()
            );
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let record = serde_json::json!({
                "error": format!("{e:#}"),
                "run_kind": cfg.kind.to_string(),
            });
            let _ = std::fs::create_dir_all(&out_dir);
            let _ = std::fs::write(
                out_dir.join("error.json"),
                serde_json::to_string_pretty(&record).unwrap_or_default(),
            );
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn check_command() -> ExitCode {
    let results = acceptance::run_all();
    let mut all_ok = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2}. {} — {}", r.id, r.name, r.detail);
        all_ok &= r.passed;
    }
    println!(
        "{} of {} acceptance criteria passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
