use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand};
use prelude_harness::{
    effectiveness, run_effectiveness, run_microbench, run_pathlen, run_verify_fixture, to_csv, write_file,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "prelude", about = "Loop-detection experiments over simulated exchanges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// False-positive rates of each detector per path threshold.
    Effectiveness(Common),
    /// CDF of exchanges per deflected path.
    Pathlen(Common),
    /// Distinct-Match rounds, bytes and wall time.
    Microbench(Common),
    /// Replays the two-exchange example.
    VerifyFixture(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    Ok(match &c.config {
        Some(path) => ExperimentConfig::load(path, c.seed, c.out.clone())?,
        None => ExperimentConfig::from_toml("", c.seed, c.out.clone())?,
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Effectiveness(c) => {
            let cfg = load(&c)?;
            let run = run_effectiveness(&cfg).context("effectiveness run")?;
            let out = &cfg.out_dir;
            let rows = write_file(out, "effectiveness.csv", &to_csv(&run.rows)?)?;
            write_file(out, "effectiveness_summary.csv", &to_csv(std::slice::from_ref(&run.summary))?)?;
            write_file(out, "effectiveness_log.txt", effectiveness::render_log(&run.log).as_bytes())?;
            println!("{}", rows.display());
        }
        Command::Pathlen(c) => {
            let cfg = load(&c)?;
            let run = run_pathlen(&cfg)?;
            println!("{}", write_file(&cfg.out_dir, "pathlen.csv", &to_csv(&run.rows)?)?.display());
        }
        Command::Microbench(c) => {
            let cfg = load(&c)?;
            let rows = run_microbench(&cfg)?;
            println!("{}", write_file(&cfg.out_dir, "microbench.csv", &to_csv(&rows)?)?.display());
        }
        Command::VerifyFixture(c) => {
            let cfg = load(&c)?;
            let budget = *cfg.path_thresholds.last().expect("validated non-empty");
            let rows = run_verify_fixture(cfg.evaluation(), budget)?;
            let rejected = rows.iter().filter(|r| r.prelude.starts_with("reject")).count();
            ensure!(rejected == 1, "expected exactly one rejection, got {rejected}");
            println!("{}", write_file(&cfg.out_dir, "verify_fixture.csv", &to_csv(&rows)?)?.display());
        }
    }
    Ok(())
}
