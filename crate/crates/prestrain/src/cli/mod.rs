//! Command-line front end: scenario loading, pipeline runs and report files.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 configuration
//! error, 3 a task failed.

mod config;
mod report;
mod run;

pub use config::{
    from_toml_str, from_value, load_config, CommutatorConfig, ConfigError, CurvatureConfig, MinimizeConfig, ProbeConfig,
    ScenarioConfig, Task,
};
pub use report::{CommutatorSummary, MinimizeSummary, ProbeSummary, RunOutcome, RunReport, Status, TaskStatus};
pub use run::run;

use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "prestrain", version, about = "Prestrained thin-film scaling toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, clap::Args)]
struct Overrides {
    /// Grid nodes per axis (overrides the config).
    #[arg(long)]
    grid: Option<usize>,
    /// RNG seed for the random minimizer starts.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run every task listed in a scenario config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Classify a scenario and print its regime as JSON.
    Classify {
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Run every .toml and .json config in a directory.
    Sweep {
        dir: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
}

fn load_with(path: &Path, o: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = load_config(path)?;
    if let Some(n) = o.grid {
        cfg.set_grid(n)?;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(out) = &o.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn run_one(path: &Path, o: &Overrides, out_override: Option<PathBuf>) -> i32 {
    let mut cfg = match load_with(path, o) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    if let Some(dir) = out_override {
        cfg.output = dir;
    }
    let outcome = run(&cfg);
    let r = &outcome.report;
    for t in &r.tasks {
        let msg = t.message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default();
        eprintln!("{}: {} {:?}{msg}", cfg.name, t.task, t.status);
    }
    if let Err(e) = outcome.write(&cfg.output) {
        eprintln!("error: writing {}: {e}", cfg.output.display());
        return EXIT_IO;
    }
    eprintln!("{}: wrote {}", cfg.name, cfg.output.join("report.json").display());
    if r.failed() {
        EXIT_SOLVER
    } else {
        EXIT_OK
    }
}

fn classify_one(path: &Path, o: &Overrides) -> i32 {
    let mut cfg = match load_with(path, o) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    cfg.tasks = vec![Task::Classify];
    let outcome = run(&cfg);
    match &outcome.report.regime {
        Some(spec) => {
            let json = serde_json::to_string_pretty(spec).expect("regime serializes");
            match writeln!(std::io::stdout(), "{json}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => EXIT_IO,
                _ => EXIT_OK,
            }
        }
        None => {
            let msg = outcome.report.tasks.first().and_then(|t| t.message.clone()).unwrap_or_default();
            eprintln!("error: classification failed: {msg}");
            EXIT_SOLVER
        }
    }
}

fn sweep(dir: &Path, o: &Overrides) -> i32 {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return EXIT_CONFIG;
        }
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml" || x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        eprintln!("error: no .toml or .json configs in {}", dir.display());
        return EXIT_CONFIG;
    }
    let mut code = EXIT_OK;
    for f in files {
        let out = o.out.as_ref().map(|base| base.join(f.file_stem().unwrap_or_default()));
        let c = run_one(&f, &Overrides { out: None, ..o.clone() }, out);
        code = code.max(c);
    }
    code
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Run { config, o } => run_one(&config, &o, None),
        Cmd::Classify { config, o } => classify_one(&config, &o),
        Cmd::Sweep { dir, o } => sweep(&dir, &o),
    }
}
