//! Command-line front end for running and analysing memex episodes.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "memex", version, about = "Indexed experience memory episodes on a seeded household world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run episodes over a seed list and write trajectories, stores and a summary.
    Run(RunArgs),
    /// Recompute the return of a trajectory file.
    Score {
        path: PathBuf,
        #[arg(long)]
        tau: Option<usize>,
    },
    /// Split a trajectory at its compression steps.
    Segment {
        path: PathBuf,
        /// Write segments here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a trajectory against a fresh world and check for divergence.
    Replay { path: PathBuf },
    /// Print the contents of a persisted experience store.
    StoreDump { path: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat key = value configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed range `a..b`, `a..=b` or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long = "tau-sigma")]
    tau_sigma: Option<usize>,
    /// oracle_full, oracle_indexed or gateway.
    #[arg(long)]
    policy: Option<String>,
    /// Reads per decision after a compression (oracle_indexed).
    #[arg(long = "B")]
    reads: Option<usize>,
    #[arg(long = "compress-every")]
    compress_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "token-env")]
    token_env: Option<String>,
    #[arg(long = "max-retries")]
    max_retries: Option<u32>,
}

impl RunArgs {
    fn overlay(&self, map: &mut BTreeMap<String, String>) {
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        };
        set("seed", self.seed.map(|v| v.to_string()));
        set("seeds", self.seeds.clone());
        set("tmax", self.tmax.map(|v| v.to_string()));
        set("tau", self.tau.map(|v| v.to_string()));
        set("tau-sigma", self.tau_sigma.map(|v| v.to_string()));
        set("policy", self.policy.clone());
        set("B", self.reads.map(|v| v.to_string()));
        set("compress-every", self.compress_every.map(|v| v.to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("workers", self.workers.map(|v| v.to_string()));
        set("endpoint", self.endpoint.clone());
        set("model", self.model.clone());
        set("token-env", self.token_env.clone());
        set("max-retries", self.max_retries.map(|v| v.to_string()));
    }
}

/// Parse `args` (including the program name) and run the chosen subcommand.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(args) => {
            let mut map = match &args.config {
                Some(path) => match config::load_config_file(path) {
                    Ok(map) => map,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_USAGE;
                    }
                },
                None => BTreeMap::new(),
            };
            args.overlay(&mut map);
            match config::resolve(&map) {
                Ok(config) => commands::cmd_run(&config),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Command::Score { path, tau } => commands::cmd_score(&path, tau),
        Command::Segment { path, out } => commands::cmd_segment(&path, out.as_deref()),
        Command::Replay { path } => commands::cmd_replay(&path),
        Command::StoreDump { path } => commands::cmd_store_dump(&path),
    }
}
