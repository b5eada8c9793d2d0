//! `colombeau`: batch driver for generalized-function checks.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use colombeau_core::records::{write_csv, write_jsonl, VerdictRecord};

use commands::{Outcome, Run, RunError};
use config::{ConfigError, Registry, RunConfig, DEFAULT_CONFIG};

#[derive(Parser)]
#[command(name = "colombeau", version, about = "Run Colombeau generalized-function checks from a config file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML); the shipped default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV output and verdict records.
    #[arg(long, global = true, default_value = "colombeau-out")]
    out: PathBuf,
    #[arg(long, global = true)]
    eps_min: Option<f64>,
    #[arg(long, global = true)]
    eps_max: Option<f64>,
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for compact-set jitter and random generalized points.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Moderate / negligible classification of nets.
    Classify,
    /// Equivalence of manifold-valued nets by the distance, bank and chart routes.
    Equiv,
    /// Equivalence of vector bundle homomorphisms.
    VbEquiv,
    /// Equivalence of hybrid nets.
    HybridEquiv,
    /// Point-value characterization on generalized points.
    Pointvals,
    /// Association, k-association and shadows.
    Associate,
    /// Geodesics of the regularized impulsive pp-wave.
    Ppwave,
    /// The full acceptance run.
    Suite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Equiv => "equiv",
            Command::VbEquiv => "vb-equiv",
            Command::HybridEquiv => "hybrid-equiv",
            Command::Pointvals => "pointvals",
            Command::Associate => "associate",
            Command::Ppwave => "ppwave",
            Command::Suite => "suite",
        }
    }
}

fn fail(kind: &str, code: u8, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn report(err: RunError) -> ExitCode {
    match err {
        RunError::Config(ConfigError::Parse(m)) => fail("config-parse-error", 2, m),
        RunError::Config(ConfigError::UnknownNet(l)) => fail("unknown-net", 3, format!("unknown net `{l}`")),
        RunError::Io(m) => fail("io-error", 4, m),
    }
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf), RunError> {
    let (text, base) = match &cli.config {
        Some(path) => (
            fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (DEFAULT_CONFIG.to_string(), PathBuf::from(".")),
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(v) = cli.eps_min {
        cfg.grid.eps_min = v;
    }
    if let Some(v) = cli.eps_max {
        cfg.grid.eps_max = v;
    }
    if let Some(v) = cli.grid_points {
        cfg.grid.points = v;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok((cfg, base))
}

fn execute(cli: &Cli) -> Result<Vec<Outcome>, RunError> {
    let (cfg, base) = load(cli)?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Io(e.to_string()))?;
    }
    let reg = Registry::build(&cfg, &base)?;
    fs::create_dir_all(&cli.out).map_err(|e| RunError::Io(format!("{}: {e}", cli.out.display())))?;
    let run = Run {
        cfg: &cfg,
        reg: &reg,
        check: cfg.check_config()?,
        out: &cli.out,
    };
    match cli.command {
        Command::Classify => commands::classify(&run),
        Command::Equiv => commands::equiv(&run),
        Command::VbEquiv => commands::vb_equiv(&run),
        Command::HybridEquiv => commands::hybrid_equiv(&run),
        Command::Pointvals => commands::pointvals(&run),
        Command::Associate => commands::associate(&run, &cfg.assoc_grid()?),
        Command::Ppwave => commands::ppwave(&cfg, &cli.out),
        Command::Suite => commands::suite(&cfg, run.check.clone()),
    }
}

fn write_records(out: &Path, records: &[VerdictRecord]) -> std::io::Result<()> {
    let mut csv = Vec::new();
    write_csv(&mut csv, records)?;
    fs::write(out.join("records.csv"), csv)?;
    let mut jsonl = Vec::new();
    write_jsonl(&mut jsonl, records)?;
    fs::write(out.join("records.jsonl"), jsonl)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcomes = match execute(&cli) {
        Ok(o) => o,
        Err(e) => return report(e),
    };
    for o in &outcomes {
        println!("{}", o.line);
    }
    let records: Vec<VerdictRecord> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    if let Err(e) = write_records(&cli.out, &records) {
        return fail("io-error", 4, e.to_string());
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.line.as_str()).collect();
    println!("{}: {}/{} checks passed", cli.command.name(), outcomes.len() - failed.len(), outcomes.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "{}",
            json!({ "error": "check-failure", "command": cli.command.name(), "failed": failed })
        );
        ExitCode::from(1)
    }
}
