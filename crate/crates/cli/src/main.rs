use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use securecache::config::{Check, ExperimentConfig, SEED_ENV};
use securecache::output::{
    fragment_map_json, write_keymem_csv, write_payload_dump, write_rate_csv,
};
use securecache::simulate;
use securecache_core::analysis::{
    default_grid, gap_sweep, keymem_tradeoff, rate_report, tradeoff_curve,
};
use securecache_core::{Error, Scheme};

#[derive(Parser)]
#[command(
    name = "securecache",
    version,
    about = "Secure coded caching simulator and rate analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Centralized,
    Decentralized,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Centralized => Scheme::Centralized,
            SchemeArg::Decentralized => Scheme::Decentralized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemesArg {
    Centralized,
    Decentralized,
    Both,
}

impl SchemesArg {
    fn list(self) -> Vec<Scheme> {
        match self {
            SchemesArg::Centralized => vec![Scheme::Centralized],
            SchemesArg::Decentralized => vec![Scheme::Decentralized],
            SchemesArg::Both => vec![Scheme::Centralized, Scheme::Decentralized],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Achievable rate, lower bound and gap at one cache size, as JSON.
    Rate {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, allow_negative_numbers = true)]
        m: f64,
    },
    /// Placement, delivery and decoding for every user, then checks.
    Simulate(SimulateArgs),
    /// Rate-memory curves as CSV.
    Tradeoff {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "both")]
        scheme: SchemesArg,
        /// Evenly spaced cache sizes added to the centralized grid.
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest in-regime gap for every (N, K) up to the limits, as CSV.
    Gap {
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        k_max: usize,
        #[arg(long, value_enum, default_value = "both")]
        scheme: SchemesArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Key/data memory split along the centralized grid, as CSV.
    Keymem {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config; flags override its fields.
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    f: Option<usize>,
    #[arg(long, conflicts_with = "t", allow_negative_numbers = true)]
    m: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Falls back to the config file, then SECURECACHE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Requested file per user, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    demand: Option<Vec<usize>>,
    /// Subset of decode,secrecy,memory,rate (default: all).
    #[arg(long, value_delimiter = ',')]
    check: Option<Vec<Check>>,
    /// Report destination (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Binary dump of the delivered payload.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Fragment sizes of a decentralized run, as JSON.
    #[arg(long)]
    fragments: Option<PathBuf>,
}

/// Writes to `path`, or standard output when absent.
fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate_cmd(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let file_config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            ExperimentConfig::from_json(&text)
                .with_context(|| format!("invalid config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    let flags = ExperimentConfig {
        scheme: args.scheme.map(Into::into),
        files: args.n,
        users: args.k,
        file_bits: args.f,
        t: args.t,
        m: args.m,
        seed: args.seed,
        demand: args.demand,
        checks: args.check,
    };
    let mut config = file_config;
    if flags.m.is_some() {
        config.t = None;
    }
    if flags.t.is_some() {
        config.m = None;
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    let experiment = config.overlay(flags).resolve(env_seed.as_deref())?;
    let sim = simulate::run(&experiment)?;

    if let Some(path) = &args.dump {
        let file =
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        write_payload_dump(BufWriter::new(file), &sim.payload)?;
    }
    if let Some(path) = &args.fragments {
        let map = sim
            .fragment_map
            .as_ref()
            .context("--fragments applies to decentralized runs only")?;
        let mut w = sink(Some(path))?;
        serde_json::to_writer_pretty(&mut w, &fragment_map_json(map))?;
        writeln!(w)?;
        w.flush()?;
    }
    let mut w = sink(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &sim.report)?;
    writeln!(w)?;
    w.flush()?;

    for c in sim.report.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {}: {}", c.name, c.detail);
    }
    Ok(if sim.report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Rate { scheme, n, k, m } => {
            let report = rate_report(scheme.into(), n, k, m)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Simulate(args) => return simulate_cmd(args),
        Command::Tradeoff {
            n,
            k,
            scheme,
            points,
            out,
        } => {
            let rows = tradeoff_curve(n, k, &scheme.list(), &default_grid(n, k, points))?;
            let w = sink(out.as_deref())?;
            write_rate_csv(w, &rows)?;
        }
        Command::Gap {
            n_max,
            k_max,
            scheme,
            out,
        } => {
            let rows = gap_sweep(n_max, k_max, &scheme.list())?;
            let w = sink(out.as_deref())?;
            write_rate_csv(w, &rows)?;
        }
        Command::Keymem { n, k, out } => {
            let rows = keymem_tradeoff(n, k)?;
            let w = sink(out.as_deref())?;
            write_keymem_csv(w, n, k, &rows)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            // Core errors carry their own complete message.
            match err.downcast_ref::<Error>() {
                Some(core) => eprintln!("{core}"),
                None => eprintln!("error: {err:#}"),
            }
            ExitCode::from(2)
        }
    }
}
