use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mimo_relay::sim::{self, SimConfig};

mod oracle;
mod validate;

const GIT_DESCRIBE: &str = env!("RELAY_SIM_GIT_DESCRIBE");

#[derive(Parser)]
#[command(name = "relay-sim", version, about = "MIMO amplify-and-forward relay designs and link simulations")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "RELAY_SIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON simulation config.
    config: PathBuf,

    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV; overrides the config `output`. Without either, CSV goes to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the channel and every design of one trial as JSON.
    Design {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep point index.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Trial index.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// BER sweep.
    Ber(RunArgs),
    /// Equal-QoS power sweep over the config's `eta` list.
    Power(RunArgs),
    /// Compare the allocations against grid-search references on one channel.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Grid points per simplex edge.
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Random restarts of the alternating allocation.
        #[arg(long, default_value_t = 5)]
        restarts: usize,
    },
    /// Run the invariant suite on random instances.
    Validate {
        /// Random instances per check.
        #[arg(long, default_value_t = 20)]
        draws: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load(run: &RunArgs) -> Result<SimConfig> {
    let text = fs::read_to_string(&run.config).with_context(|| format!("reading {}", run.config.display()))?;
    let mut cfg = SimConfig::from_json(&text)?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &run.output {
        cfg.output = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes `csv` to the configured output with its JSON sidecar, or to stdout.
fn emit(cfg: &SimConfig, csv: &[u8]) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            let path = PathBuf::from(path);
            fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            let sidecar = json!({
                "config": cfg,
                "seed": cfg.seed,
                "config_hash": format!("{:016x}", cfg.hash()),
                "git_describe": GIT_DESCRIBE,
            });
            fs::write(sidecar_path(&path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
            eprintln!("wrote {}", path.display());
        }
        None => stdout(csv)?,
    }
    Ok(())
}

/// Writes to stdout, treating a closed pipe as success.
fn stdout(bytes: &[u8]) -> io::Result<()> {
    match io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Design { run, point, trial } => {
            let cfg = load(&run)?;
            let instances = sim::realize_instance(&cfg, point, trial)?;
            let text = serde_json::to_string_pretty(&json!({
                "scenario": cfg.scenario,
                "seed": cfg.seed,
                "point": point,
                "trial": trial,
                "instances": instances,
            }))?;
            match &run.output {
                Some(p) => fs::write(p, text + "\n")?,
                None => stdout((text + "\n").as_bytes())?,
            }
        }
        Command::Ber(run) => {
            let cfg = load(&run)?;
            let curves = sim::simulate_ber(&cfg)?;
            let mut csv = Vec::new();
            sim::write_ber_csv(&curves, &mut csv)?;
            emit(&cfg, &csv)?;
        }
        Command::Power(run) => {
            let cfg = load(&run)?;
            let table = sim::power_experiment(&cfg)?;
            let mut csv = Vec::new();
            sim::write_power_csv(&table, &mut csv)?;
            emit(&cfg, &csv)?;
        }
        Command::Oracle { run, resolution, restarts } => {
            let cfg = load(&run)?;
            let report = oracle::report(&cfg, resolution, restarts)?;
            let text = serde_json::to_string_pretty(&report)?;
            match &run.output {
                Some(p) => fs::write(p, text + "\n")?,
                None => stdout((text + "\n").as_bytes())?,
            }
        }
        Command::Validate { draws, seed } => return Ok(validate::run(draws, seed)),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
