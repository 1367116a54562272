use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ric_core::campaign::{compare_dirs, run_campaign, LiveSession, Mode, Trained};
use ric_core::netsim::Simulator;
use ric_core::ScenarioConfig;
use ric_service::{router, spawn_session, LoopOptions};

#[derive(Parser)]
#[command(name = "ric", about = "Intent-driven RIC simulator: campaigns and live control")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train and evaluate over several seeds, writing CSVs and a JSON summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// orchestrated, non_ml or single:<ts|cs|bf>
        #[arg(long, default_value = "orchestrated")]
        mode: Mode,
        /// Comma-separated; defaults to the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Serve a live session from trained checkpoints.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Print a comparison of finished campaign directories.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { config, mode, seeds, out } => {
            let cfg = load_config(config.as_ref())?;
            let seeds = if seeds.is_empty() { cfg.seeds.clone() } else { seeds };
            let result = run_campaign(&cfg, mode, &seeds, Some(&out))?;
            println!("{}", serde_json::to_string_pretty(&result.runs)?);
            println!("results in {}", out.display());
        }
        Cmd::Serve { config, checkpoints, port } => {
            let cfg = load_config(config.as_ref())?;
            let sim = Simulator::new(&cfg, cfg.seed, 0)?;
            let trained = Trained::load(&cfg, &sim, cfg.seed, &checkpoints)
                .with_context(|| format!("loading checkpoints from {}", checkpoints.display()))?;
            let session = LiveSession::new(&cfg, cfg.seed, trained)?;
            let opts = LoopOptions { slots_per_second: cfg.live.slots_per_second, ..Default::default() };
            let (handle, join) = spawn_session(session, opts);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                axum::serve(listener, router(handle)).await
            })?;
            if join.join().is_err() {
                bail!("simulation thread panicked");
            }
        }
        Cmd::Compare { runs } => print!("{}", compare_dirs(&runs)?),
    }
    Ok(())
}
