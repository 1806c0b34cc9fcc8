//! `pdmverify` — run verification suites for pseudo-Hermitian PDM models
//! described by a JSON config, or export plot data derived from them.
//!
//! Exit codes: 0 when every requested suite passes, 1 when at least one
//! suite fails, 2 for configuration or usage errors.

mod config;
mod export;
mod report;
mod scenario;
mod suites;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{load, resolve_suites, resolve_tolerances, ConfigError, Format};
use report::RunReport;

#[derive(Parser)]
#[command(name = "pdmverify", version, about = "Verification suites for \
pseudo-Hermitian position-dependent-mass Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and report pass/fail per suite.
    Verify {
        /// JSON config file.
        #[arg(long)]
        config: PathBuf,
        /// Run only these suites (repeatable); replaces the config list.
        #[arg(long = "suite")]
        suites: Vec<String>,
        /// Override a suite tolerance, e.g. --tol intertwine_plus=1e-3
        /// (repeatable).
        #[arg(long = "tol")]
        tolerances: Vec<String>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format: json, csv, or table (default from config).
        #[arg(long)]
        format: Option<String>,
    },
    /// Write a CSV table derived from the configured model.
    Export {
        /// JSON config file.
        #[arg(long)]
        config: PathBuf,
        /// One of: potential, eigenfunctions, coordmap, conservation.
        #[arg(long)]
        what: String,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify { config, suites, tolerances, out, format } => {
            cmd_verify(&config, &suites, &tolerances, out.as_deref(), format.as_deref())
        }
        Command::Export { config, what, out } => {
            cmd_export(&config, &what, out.as_deref())
        }
    };
    std::process::exit(code);
}

fn fail_config(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    2
}

fn cmd_verify(
    config_path: &std::path::Path,
    cli_suites: &[String],
    cli_tols: &[String],
    out: Option<&std::path::Path>,
    format: Option<&str>,
) -> i32 {
    let cfg = match load(config_path) {
        Ok(c) => c,
        Err(e) => return fail_config(e),
    };
    let selected = match resolve_suites(&cfg, cli_suites) {
        Ok(s) => s,
        Err(e) => return fail_config(e),
    };
    let tols = match resolve_tolerances(&cfg, cli_tols) {
        Ok(t) => t,
        Err(e) => return fail_config(e),
    };
    let format = match format {
        Some(name) => match Format::parse(name) {
            Ok(f) => f,
            Err(e) => return fail_config(e),
        },
        None => cfg.output.format,
    };
    let scenario = match scenario::assemble(&cfg) {
        Ok(s) => s,
        Err(e) => return fail_config(e),
    };

    let reports: Vec<_> = selected
        .iter()
        .map(|&suite| suites::run(&scenario, suite, tols[&suite]))
        .collect();
    let report = RunReport::new(&cfg.model, &cfg.grid, reports);
    let rendered = match format {
        Format::Json => report.render_json(),
        Format::Csv => report.render_csv(),
        Format::Table => report.render_table(),
    };

    let target = out
        .map(|p| p.to_path_buf())
        .or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match target {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, rendered) {
                return fail_config(ConfigError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                });
            }
        }
        None => print!("{rendered}"),
    }
    if report.passed {
        0
    } else {
        1
    }
}

fn cmd_export(
    config_path: &std::path::Path,
    what: &str,
    out: Option<&std::path::Path>,
) -> i32 {
    let cfg = match load(config_path) {
        Ok(c) => c,
        Err(e) => return fail_config(e),
    };
    let kind = match export::Kind::parse(what) {
        Ok(k) => k,
        Err(e) => return fail_config(e),
    };
    let scenario = match scenario::assemble(&cfg) {
        Ok(s) => s,
        Err(e) => return fail_config(e),
    };
    let table = match export::render(&scenario, kind) {
        Ok(t) => t,
        Err(e) => return fail_config(e),
    };
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, table) {
                return fail_config(ConfigError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                });
            }
        }
        None => print!("{table}"),
    }
    0
}
