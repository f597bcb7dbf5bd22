mod commands;
mod config;
mod output;
mod validate;

use clap::{Parser, ValueEnum};
use config::{parse_config, RunConfig};
use output::{Outcome, Output, RunManifest};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    Forward,
    Dnmap,
    Reconstruct,
    Entangle,
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Dnmap => "dnmap",
            Command::Reconstruct => "reconstruct",
            Command::Entangle => "entangle",
            Command::Validate => "validate",
        }
    }
}

/// Fractional parabolic operators, exterior value problems and their
/// Dirichlet-to-Neumann maps.
#[derive(Debug, Parser)]
#[command(name = "fracpara", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized steps; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

/// Failures that stop a run, by exit-code category.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<fracpara_core::Error> for Failure {
    fn from(e: fracpara_core::Error) -> Self {
        if e.is_solver() || matches!(e, fracpara_core::Error::Io(_)) {
            Failure::Solver(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("FRACPARA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("FRACPARA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    configure_threads()?;
    let mut cfg = parse_config(&cli.config)?;
    if let Some(c) = &cfg.command {
        if c != cli.command.name() {
            return Err(Failure::Config(format!("config is for `{c}`, not `{}`", cli.command.name())));
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn dispatch(command: Command, cfg: &RunConfig, out: &mut Output) -> Result<Outcome, Failure> {
    match command {
        Command::Forward => commands::forward(cfg, out),
        Command::Dnmap => commands::dnmap(cfg, out),
        Command::Reconstruct => commands::reconstruct(cfg, out),
        Command::Entangle => commands::entangle(cfg, out),
        Command::Validate => validate::run(cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("fracpara-out"));
    let mut out = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: output directory {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let result = dispatch(cli.command, &cfg, &mut out);
    let total = start.elapsed().as_secs_f64();
    let (outcome, error, code) = match result {
        Ok(o) => {
            let code = if o.checks.iter().all(|c| c.pass) { 0 } else { 4 };
            (o, None, code)
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            let code = e.code();
            (Outcome::default(), Some(e.message().to_string()), code)
        }
    };
    for c in &outcome.checks {
        println!("{} {}: {:.3e} ({} {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.relation, c.threshold);
    }
    let manifest = RunManifest::new(cli.command.name(), &cfg, out.artifacts(), outcome, total, code, error);
    if let Err(e) = out.write_manifest(&manifest) {
        eprintln!("error: manifest: {e}");
        return ExitCode::from(3);
    }
    println!("wrote {}", dir.join(output::MANIFEST).display());
    ExitCode::from(code)
}
