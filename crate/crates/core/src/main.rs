use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pricing_lab::config::ExperimentConfig;
use pricing_lab::repro::{self, Figure};
use pricing_lab::sim;
use pricing_lab::PricingError;

#[derive(Parser)]
#[command(
    name = "pricing-lab",
    version,
    about = "Contextual pricing with biased offline data: simulate and compare policies"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Threads {
    /// Worker threads for replications.
    #[arg(long, env = "PRICING_LAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write traces, aggregates and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        threads: Threads,
    },
    /// Repeat an experiment over a grid of squared bias values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `T^{-n/5}:0..9` or a comma-separated list of values.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
    /// Run a canned experiment: fig2a, fig2b or fig2c.
    Repro {
        figure: String,
        #[arg(long, default_value = "repro")]
        out: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
}

fn threads(t: &Threads) -> usize {
    t.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run(cfg: &ExperimentConfig, out: &Path, threads: usize) -> pricing_lab::Result<()> {
    let res = sim::run_experiment_threads(cfg, threads)?;
    let outputs = sim::render_outputs(cfg, &res)?;
    sim::write_outputs(out, &outputs)?;
    for a in &res.aggregates {
        println!(
            "{:<16} final regret {:>10.3} (+/- {:.3})",
            a.policy,
            a.mean_final(),
            a.band_high.last().unwrap_or(&0.0) - a.mean_final()
        );
    }
    println!("wrote {} (digest {})", out.display(), outputs.manifest.digest);
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, grid: &str, out: &Path, threads: usize) -> pricing_lab::Result<()> {
    let values = sim::parse_grid(grid, cfg.run.horizon)?;
    let (rows, results) = sim::with_pool(threads, || sim::bias_sweep(cfg, &values))?;
    std::fs::create_dir_all(out)?;
    let mut buf = Vec::new();
    sim::write_sweep_csv(&mut buf, &rows)?;
    std::fs::write(out.join("sweep.csv"), &buf)?;
    let reps: Vec<_> = results.iter().map(|r| (r.v_true, &r.reps)).collect();
    let manifest = serde_json::json!({ "config": cfg, "grid": grid, "v_true_sq": values, "points": reps });
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializes") + "\n")?;
    for r in &rows {
        println!("{:<16} V_true^2 {:<12.4e} final regret {:>10.3}", r.policy, r.v_true_sq, r.mean_final_regret);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn execute(cli: Cli) -> pricing_lab::Result<()> {
    match cli.cmd {
        Cmd::Run { config, out, seed, threads: t } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            run(&cfg, &out, threads(&t))
        }
        Cmd::Sweep { config, grid, out, threads: t } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            sweep(&cfg, &grid, &out, threads(&t))
        }
        Cmd::Repro { figure, out, threads: t } => {
            let fig: Figure = figure.parse()?;
            let cfg = repro::config(fig)?;
            let dir = out.join(&figure);
            match fig {
                Figure::Fig2c => sweep(&cfg, repro::FIG2C_GRID, &dir, threads(&t)),
                _ => run(&cfg, &dir, threads(&t)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PricingError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
