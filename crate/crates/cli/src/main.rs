mod commands;
mod output;

use clap::{Parser, Subcommand};
use commands::{Ctx, Failure};
use flatbill::{Table, TableConfig};
use output::{unix_millis, Outputs, SCHEMA_VERSION};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "flatbill", version, about = "Experiments on semidispersing billiards with flat points")]
struct Cli {
    /// JSON table configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configured one).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Configuration override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Table constants and the window table.
    TableInfo(commands::TableInfoArgs),
    /// Trace one orbit of the collision map.
    Orbit(commands::OrbitArgs),
    /// Determinant, reversibility and cone checks on random points.
    MapCheck(commands::MapCheckArgs),
    /// Cell-measure profile and singularity curves.
    Cells(commands::CellsArgs),
    /// Return-time tails.
    Tails(commands::TailsArgs),
    /// Trap-measure table.
    Traps(commands::TrapsArgs),
    /// Correlation functions along one orbit.
    Corr(commands::CorrArgs),
    /// One-step expansion sums.
    Onestep(commands::OnestepArgs),
    /// Channel recursion sweeps and the cocycle cross-check.
    Jacobi(commands::JacobiArgs),
    /// Measure of neighbourhoods of the singularity set.
    Neighborhood(commands::NeighborhoodArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::TableInfo(_) => "table-info",
            Self::Orbit(_) => "orbit",
            Self::MapCheck(_) => "map-check",
            Self::Cells(_) => "cells",
            Self::Tails(_) => "tails",
            Self::Traps(_) => "traps",
            Self::Corr(_) => "corr",
            Self::Onestep(_) => "onestep",
            Self::Jacobi(_) => "jacobi",
            Self::Neighborhood(_) => "neighborhood",
        }
    }
}

/// Keys accepted on top of the table configuration.
#[derive(Clone, Debug, Serialize)]
struct RunConfig {
    table: TableConfig,
    threads: usize,
    /// Largest tolerated fraction of numerically failed evaluations.
    failure_budget: f64,
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let bad = |_| Failure::Usage(format!("{key}: cannot parse {value:?}"));
        match key {
            "threads" => self.threads = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "failure_budget" => self.failure_budget = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            _ => self.table.set(key, value)?,
        }
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut run = RunConfig { table: TableConfig::default(), threads: 0, failure_budget: 1e-3 };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let mut doc: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        for key in ["threads", "failure_budget"] {
            if let Some(v) = doc.remove(key) {
                run.set(key, &v.to_string())?;
            }
        }
        run.table = TableConfig::from_json(&serde_json::Value::Object(doc).to_string())?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("override {kv:?} is not KEY=VALUE")))?;
        run.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        run.table.seed = seed;
    }
    if let Some(t) = cli.threads {
        run.threads = t;
    }
    if !(run.failure_budget >= 0.0 && run.failure_budget <= 1.0) {
        return Err(Failure::Usage(format!("failure_budget must lie in [0, 1], got {}", run.failure_budget)));
    }
    run.table.validate()?;
    Ok(run)
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    seed: u64,
    overrides: &'a [String],
    started_unix_ms: u128,
    finished_unix_ms: u128,
    files: Vec<output::FileEntry>,
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let started = unix_millis();
    let run = load(cli)?;
    let table = Table::new(run.table.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.threads)
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    let mut out = Outputs::create(cli.out.clone())?;
    let ctx = Ctx { table, seed: run.table.seed, failure_budget: run.failure_budget, command: cli.command.name() };
    eprintln!("flatbill {}: seed {}, {} thread(s), output in {}", ctx.command, ctx.seed, pool.current_num_threads(), cli.out.display());
    let summary = pool.install(|| match &cli.command {
        Command::TableInfo(a) => commands::table_info(&ctx, a, &mut out),
        Command::Orbit(a) => commands::orbit(&ctx, a, &mut out),
        Command::MapCheck(a) => commands::map_check(&ctx, a, &mut out),
        Command::Cells(a) => commands::cells(&ctx, a, &mut out),
        Command::Tails(a) => commands::tails(&ctx, a, &mut out),
        Command::Traps(a) => commands::traps(&ctx, a, &mut out),
        Command::Corr(a) => commands::corr(&ctx, a, &mut out),
        Command::Onestep(a) => commands::onestep(&ctx, a, &mut out),
        Command::Jacobi(a) => commands::jacobi(&ctx, a, &mut out),
        Command::Neighborhood(a) => commands::neighborhood(&ctx, a, &mut out),
    });
    // The summary and manifest are written even when a check fails, so the failure can be inspected.
    let (summary, status) = match summary {
        Ok(s) => (Some(s), Ok(())),
        Err(Failure::Checks(s, msg)) => (Some(*s), Err(Failure::Numerical(msg))),
        Err(e) => (None, Err(e)),
    };
    if let Some(s) = &summary {
        out.json("summary.json", s)?;
        println!("{}", serde_json::to_string(s).map_err(|e| Failure::Io(e.to_string()))?);
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command: ctx.command,
        config: &run,
        seed: ctx.seed,
        overrides: &cli.set,
        started_unix_ms: started,
        finished_unix_ms: unix_millis(),
        files: out.entries()?,
    };
    out.write_manifest(&manifest)?;
    status
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flatbill: {e}");
            ExitCode::from(e.code())
        }
    }
}
