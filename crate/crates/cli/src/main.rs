//! `equifocal` command-line driver: runs scenario documents and writes a
//! JSON report plus CSV profiles.
//!
//! Exit status: 0 when every requested check passes or fails as declared,
//! 1 when a check fails or the engine reports an error, 2 on usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use equifocal::scenario::{self, Scenario};

#[derive(Parser)]
#[command(name = "equifocal", version, about = "Focal structure, polar slice groups and partial tubes in symmetric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a built-in scenario by name.
    Run {
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the report and CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Show a built-in scenario and what it realizes.
    Describe { name: String },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load(arg: &str) -> Result<Scenario, String> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {arg}: {e}"))?;
        Scenario::from_json(&text).map_err(|e| format!("{arg}: {e}"))
    } else if scenario::builtin_source(arg).is_some() {
        scenario::builtin(arg).map_err(|e| e.to_string())
    } else {
        Err(format!("no scenario file or built-in scenario named '{arg}'"))
    }
}

fn run(arg: &str, seed: Option<u64>, out: &Path) -> ExitCode {
    let sc = match load(arg) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let report = match scenario::run(&sc, seed) {
        Ok(r) => r,
        Err(equifocal::Error::Invalid(e)) => return usage(format!("{}: {e}", sc.name)),
        Err(e) => {
            eprintln!("error: scenario {} aborted: {e}", sc.name);
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&report, &sc.name, out) {
        eprintln!("error: cannot write to {}: {e}", out.display());
        return ExitCode::from(1);
    }
    let mut text = report.summary();
    text.push_str(&format!("  report: {}\n", out.join(format!("{}.report.json", sc.name)).display()));
    emit(&text);
    if report.passed {
        ExitCode::SUCCESS
    } else {
        for c in report.checks.iter().filter(|c| !c.ok()) {
            eprintln!("check failed: {} ({})", c.check, c.detail);
        }
        ExitCode::from(1)
    }
}

fn write_outputs(report: &scenario::Report, name: &str, out: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(format!("{name}.report.json")), report.to_json())?;
    for (suffix, body) in report.csv_files() {
        std::fs::write(out.join(format!("{name}.{suffix}")), body)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, seed, out } => run(&scenario, seed, &out),
        Command::ListScenarios => {
            let mut text = String::new();
            for name in scenario::builtin_names() {
                let sc = scenario::builtin(name).expect("built-in scenarios are valid");
                text.push_str(&format!("{name:<30} {}\n", sc.provenance));
            }
            emit(&text);
            ExitCode::SUCCESS
        }
        Command::Describe { name } => match scenario::builtin(&name) {
            Ok(sc) => {
                let mut text = format!("{}\n  {}\n  pair: {}\n\n{}\n\n", sc.name, sc.provenance, sc.pair_name(), sc.description);
                let checks: Vec<_> = sc.checks.iter().map(|c| c.name()).collect();
                text.push_str(&format!("checks: {}\n", if checks.is_empty() { "none".into() } else { checks.join(", ") }));
                for a in &sc.assumptions {
                    text.push_str(&format!("assumes: {a}\n"));
                }
                text.push_str(&format!("\n{}\n", scenario::builtin_source(&name).expect("listed").trim_end()));
                emit(&text);
                ExitCode::SUCCESS
            }
            Err(e) => usage(format!("{e}; run list-scenarios for the catalogue")),
        },
    }
}
