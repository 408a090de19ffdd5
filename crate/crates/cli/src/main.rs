//! `ppde`: experiment runner for the path-dependent obstacle solvers.

mod artifacts;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppde_core::{Error, ExperimentConfig, Result};

use artifacts::{error_record, write_outcome, Outcome};

#[derive(Debug, Parser)]
#[command(name = "ppde", version, about = "Solvers for path-dependent obstacle problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "PPDE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Value functional at the origin with a confidence interval.
    Value,
    /// Sweeps over steps, paths, penalty and level.
    Converge,
    /// Frozen-scheme envelopes around the value.
    Sandwich,
    /// Nonlinear Snell envelope and stopping region on the lattice.
    Snell,
    /// Dynamic programming residuals.
    Dpp,
    /// Hitting-time gap diagnostic.
    DiagnoseHitting,
    /// Assumption report; exits nonzero when a clause fails.
    Validate,
    /// Reflection placement on frozen data.
    Replay,
    /// Prints the effective configuration as TOML.
    PrintConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Value => "value",
            Command::Converge => "converge",
            Command::Sandwich => "sandwich",
            Command::Snell => "snell",
            Command::Dpp => "dpp",
            Command::DiagnoseHitting => "diagnose-hitting",
            Command::Validate => "validate",
            Command::Replay => "replay",
            Command::PrintConfig => "print-config",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let seed = cli.seed.unwrap_or(cfg.seed);
    let cfg = cfg.with_seed(seed);
    cfg.check()?;
    Ok(cfg)
}

fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match cmd {
        Command::Value => commands::value(cfg),
        Command::Converge => commands::converge(cfg),
        Command::Sandwich => commands::sandwich(cfg),
        Command::Snell => commands::snell(cfg),
        Command::Dpp => commands::dpp(cfg),
        Command::DiagnoseHitting => commands::diagnose_hitting(cfg),
        Command::Validate => commands::validate(cfg),
        Command::Replay => commands::replay(cfg),
        Command::PrintConfig => unreachable!("handled before dispatch"),
    }
}

fn fail(sub: &str, out: Option<&Path>, e: &Error) -> ExitCode {
    let rec = error_record(sub, e.kind(), &e.to_string());
    let text = serde_json::to_string(&rec).expect("json");
    eprintln!("{text}");
    if let Some(out) = out {
        if std::fs::create_dir_all(out).is_ok() {
            let _ = std::fs::write(out.join("error.json"), text + "\n");
        }
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let sub = cli.command.name();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => return fail(sub, cli.out.as_deref(), &e),
    };
    let out = PathBuf::from(&cfg.out);
    if let Command::PrintConfig = cli.command {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(sub, Some(&out), &Error::Config(e.to_string()));
        }
    }
    let outcome = match run(cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => return fail(sub, Some(&out), &e),
    };
    match write_outcome(&out, sub, &cfg, &outcome) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => return fail(sub, Some(&out), &e),
    }
    if outcome.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        let msg = format!("failed checks: {}", outcome.failed.join(", "));
        eprintln!("{}", serde_json::to_string(&error_record(sub, "check", &msg)).expect("json"));
        ExitCode::from(2)
    }
}
