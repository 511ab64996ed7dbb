mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::Diagnostic;
use run::Failure;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Linear spectroscopy of a spin ensemble coupled to a lossy cavity.
#[derive(Parser)]
#[command(name = "cavspec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for CSV outputs and the manifest.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Worker threads for parameter sweeps (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a JSON config.
    Run { config: PathBuf },
    /// Check a config without computing anything.
    Validate { config: PathBuf },
}

fn report(path: &Path, diags: &[Diagnostic]) -> ExitCode {
    eprintln!("{}: {} problem(s)", path.display(), diags.len());
    for d in diags {
        eprintln!("  error: {d}");
    }
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let path = match &cli.command {
        Command::Run { config } | Command::Validate { config } => config.clone(),
    };
    let loaded = match config::load(&path, cli.seed) {
        Ok(l) => l,
        Err(diags) => return report(&path, &diags),
    };
    if let Command::Validate { .. } = cli.command {
        println!("{}: ok (task {})", path.display(), loaded.config.task.name());
        return ExitCode::SUCCESS;
    }

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let outcome = match run::run(&loaded, &cli.output_dir) {
        Ok(o) => o,
        Err(Failure::Config(diags)) => return report(&path, &diags),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::FAILURE;
        }
    };

    let status = if outcome.flags.is_empty() {
        "ok"
    } else {
        "numerical_failure"
    };
    let manifest = json!({
        "tool": "cavspec",
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": path.display().to_string(),
        "config": loaded.raw,
        "units": loaded.config.units,
        "seed": loaded.seed,
        "task": loaded.config.task.name(),
        "threads": rayon::current_num_threads(),
        "status": status,
        "outputs": outcome.outputs,
        "summary": outcome.summary,
        "warnings": outcome.warnings,
        "flags": outcome.flags,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let name = format!("{}manifest.json", loaded.config.output);
    let manifest_path = cli.output_dir.join(name);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = std::fs::write(&manifest_path, text) {
        eprintln!("error: {}: {e}", manifest_path.display());
        return ExitCode::FAILURE;
    }

    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for f in &outcome.flags {
        eprintln!("numerical failure: {f}");
    }
    println!(
        "{}: {} file(s) written to {}",
        loaded.config.task.name(),
        outcome.outputs.len() + 1,
        cli.output_dir.display()
    );
    if outcome.flags.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    }
}
