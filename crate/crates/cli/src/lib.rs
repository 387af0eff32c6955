//! The `solsurf` command line: `verify`, `surface` and `models`.

pub mod args;
pub mod config;
pub mod surface;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use solsurf_core::geometry::write_atomic;
use solsurf_core::report::to_json;
use solsurf_core::{builtin, Error, Result};

use args::{Cli, Command, ModelsAction};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Names accepted by `--model`.
pub const MODELS: &[&str] = solsurf_core::models::BUILTIN_MODELS;

fn models(action: &ModelsAction) -> Result<String> {
    match action {
        ModelsAction::List => Ok(MODELS.iter().map(|m| format!("{m}\n")).collect()),
        ModelsAction::Show { name } => Ok(builtin(name)?.to_toml()),
    }
}

fn verdict(passed: bool) -> i32 {
    if passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Models { action } => {
            print!("{}", models(action)?);
            Ok(EXIT_PASS)
        }
        Command::Verify(a) => {
            let (cfg, report) = verify::verify(a)?;
            for line in verify::summary(&report) {
                eprintln!("{line}");
            }
            let json = to_json(&report);
            match &cfg.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_atomic(&dir.join("verify.json"), &json)?;
                }
                None => std::io::stdout().write_all(json.as_bytes())?,
            }
            Ok(verdict(report.passed))
        }
        Command::Surface(a) => {
            let (dir, report) = surface::surface(a)?;
            write_atomic(&dir.join("surface.json"), &to_json(&report))?;
            eprintln!(
                "{} tangent consistency interior max {:.3e} (< {:.0e})",
                if report.consistency_passed {
                    "PASS"
                } else {
                    "FAIL"
                },
                report.consistency.max(),
                report.consistency_threshold.0
            );
            if let Some(c) = &report.cross_check {
                eprintln!(
                    "{} cross-check against {}: {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.other_route,
                    c.max_interior_difference.0
                );
            }
            if let Some(c) = &report.closure {
                eprintln!(
                    "{} closure audit {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.max_relative.0
                );
            }
            eprintln!("wrote {} to {}", report.files.join(", "), dir.display());
            Ok(verdict(report.passed))
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args = args::preprocess(args.into_iter().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::BlowUp(..) | Error::SingularMatrix { .. } => EXIT_FAIL,
                _ => EXIT_CONFIG,
            }
        }
    }
}
