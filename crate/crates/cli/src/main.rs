use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orgfw::verify::run_suite;
use orgfw_cli::experiment::{build_problem, comparator, comparator_cache_dir};
use orgfw_cli::{compare, run_experiment, Result, RunConfig};

/// Online Frank-Wolfe experiments.
#[derive(Parser)]
#[command(name = "orgfw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm of a config and write CSV and JSON outputs.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set T=512` or `--set synthetic.n=4000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run several configs on shared streams and write a joint summary.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory for the joint summary and per-config outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in numerical self-checks.
    Verify,
    /// Solve and cache the comparator of every seed's stream.
    Comparator {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let out = run_experiment(&cfg)?;
            for (a, p) in out.summary.algorithms.iter().zip(&out.csv_paths) {
                let regret = a
                    .final_regret
                    .as_ref()
                    .map_or_else(|| "n/a".to_owned(), |q| format!("{:.4}", q.median));
                println!(
                    "{:<7} median final regret {regret:>12}  median round time {:>10.0} ns  -> {}",
                    a.algorithm,
                    a.median_round_time_ns,
                    p.display()
                );
            }
            println!("summary -> {}", out.summary_path.display());
        }
        Command::Compare {
            configs,
            overrides,
            out,
        } => {
            let cfgs = configs
                .iter()
                .map(|p| RunConfig::load(p, &overrides))
                .collect::<Result<Vec<_>>>()?;
            let (summary, path) = compare(&cfgs, out.as_deref())?;
            for e in &summary.entries {
                println!(
                    "{:<10} median cumulative loss {:>12.4}  median round time {:>10.0} ns",
                    e.label, e.median_cumulative_loss, e.median_round_time_ns
                );
            }
            for w in &summary.win_rates {
                println!("{} beats {} on {:.0}% of seeds", w.a, w.b, 100.0 * w.win_rate);
            }
            println!("joint summary -> {}", path.display());
        }
        Command::Verify => {
            let outcomes = run_suite();
            let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
            for o in &outcomes {
                let mark = if o.passed { "PASS" } else { "FAIL" };
                println!("{mark}  {:<width$}  {}", o.name, o.detail);
            }
            if outcomes.iter().any(|o| !o.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Comparator { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let p = build_problem(&cfg)?;
            for &seed in &cfg.seeds {
                match comparator(&cfg, &p, seed, cfg.rounds)? {
                    Some(c) => println!(
                        "seed {seed}: objective {:.10}  gap {:.3e}  ({})",
                        c.objective_value, c.gap, c.method_note
                    ),
                    None => println!("seed {seed}: loss is nonconvex, no comparator"),
                }
            }
            println!("cache -> {}", comparator_cache_dir(&cfg).display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
