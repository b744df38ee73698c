//! Command line front end. Parses flags, loads and overrides the run
//! configuration, resolves the cache, and dispatches to the command
//! bodies in `commands`. `run` returns the process exit code so tests
//! can drive the whole binary in process.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use commands::{Ctx, Format};
use config::parse_config;
use error::{CliError, Result};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "polaron", version, about = "Bogoliubov-Frohlich polaron laboratory")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set model.g=0.3 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides output.directory)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker thread count
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Skip cache lookups and stores for this invocation
    #[arg(long, global = true)]
    no_cache: bool,
    /// Empty the artifact cache before running
    #[arg(long, global = true)]
    clear_cache: bool,
    /// Output format: csv or json (overrides output.format)
    #[arg(long, global = true, value_name = "FMT")]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Ground state at one total momentum
    Solve,
    /// Ground state curve over a momentum schedule
    ScanP,
    /// Counterterm integrals over a cutoff schedule, with divergence fits
    Counterterm,
    /// Renormalized energies over a cutoff schedule
    UvScan,
    /// Ground state flow as the phonon mass is lowered
    IrScan,
    /// HVZ gap between the ground state and the one phonon threshold
    Gap,
    /// Critical momentum from the dressed dispersion
    Pstar,
    /// Reduced invariant suite; exits nonzero on any violation
    Check,
}

/// Run the CLI against an argv-style iterator and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // best effort: the global pool can only be sized once per process
        if let Err(e) = polaron_core::set_thread_count(n) {
            eprintln!("warning: --threads ignored: {e}");
        }
    }
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, &cli.set)?;
    if let Some(out) = &cli.out {
        cfg.output.directory = out.display().to_string();
    }
    if let Some(fmt) = &cli.format {
        cfg.output.format = fmt.clone();
    }
    let format = match cfg.output.format.as_str() {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => {
            return Err(CliError::Config(format!(
                "output.format must be csv or json, got {other:?}"
            )))
        }
    };
    if cli.clear_cache {
        let n = cache::clear(&cache::cache_root(&cfg))?;
        eprintln!("cleared {n} cached artifacts");
    }
    let ctx = Ctx {
        out_dir: PathBuf::from(&cfg.output.directory),
        format,
        no_cache: cli.no_cache,
        cfg,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::ScanP => commands::scan_p(&ctx),
        Command::Counterterm => commands::counterterm(&ctx),
        Command::UvScan => commands::uv_scan(&ctx),
        Command::IrScan => commands::ir_scan(&ctx),
        Command::Gap => commands::gap(&ctx),
        Command::Pstar => commands::pstar(&ctx),
        Command::Check => commands::check(&ctx),
    }
}
