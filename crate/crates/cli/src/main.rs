//! `cns`: run, verify, resume and inspect simulations.
//!
//! Any configuration key can be overridden on the command line as
//! `--section.key=value` (or `--section.key value`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::warn;

use cns_core::config::RunConfig;
use cns_core::harness::{exit_code_for, resume_config, resume_simulation, run_simulation, RunOutcome, EXIT_PROPERTY};
use cns_core::io::{read_snapshot, CheckpointMeta};
use cns_core::lp::DyadicBank;
use cns_core::make_grid;
use cns_core::verify::{verify_suite, VerifyOptions};
use cns_core::CnsError;

#[derive(Parser, Debug)]
#[command(name = "cns", version, about = "Chemotaxis-Navier-Stokes simulator with regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation from a configuration file (defaults if omitted).
    Run {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Run the self-check suite and print a JSON report.
    Verify {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable dealiasing in the budget check; the suite must then fail.
        #[arg(long)]
        break_dealias: bool,
        /// Also write the report to this file.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Continue a run from a checkpoint directory.
    Resume {
        checkpoint: PathBuf,
        /// Configuration to continue with; by default it is rebuilt from the
        /// checkpoint manifest.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Print snapshot metadata and shell spectra of a snapshot file or
    /// checkpoint directory.
    Inspect { path: PathBuf },
}

/// Splits `--section.key=value` / `--section.key value` overrides from the
/// arguments clap understands.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|body| body.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(body) => match body.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().ok_or_else(|| format!("--{body} needs a value"))?;
                    overrides.push((body.to_string(), v));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> cns_core::Result<RunConfig> {
    let (cfg, warnings) = match path {
        Some(p) => RunConfig::from_path_with_overrides(p, overrides)?,
        None => RunConfig::from_text_with_overrides("", overrides)?,
    };
    for w in warnings {
        warn!("{w}");
    }
    Ok(cfg)
}

fn report(outcome: &RunOutcome) -> ExitCode {
    println!(
        "{}: step {}/{}, t = {}, {} diagnostic rows in {}",
        outcome.summary.get("status").unwrap_or("?"),
        outcome.last_step,
        outcome.steps_scheduled,
        outcome.final_state.time,
        outcome.rows,
        outcome.output_dir.display()
    );
    if let Some(err) = &outcome.error {
        eprintln!("error: {err}");
    }
    ExitCode::from(outcome.exit_code() as u8)
}

fn fail(err: CnsError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(&err) as u8)
}

fn inspect_file(path: &Path) -> cns_core::Result<()> {
    let snap = read_snapshot(path)?;
    println!(
        "{}: dim = {}, N = {}, components = {}, time = {}",
        path.display(),
        snap.dim,
        snap.n,
        snap.components,
        snap.time
    );
    let grid = make_grid(snap.dim, snap.n)?;
    let field = snap.into_field(&grid)?.to_spectral();
    let bank = DyadicBank::new(grid);
    println!("  {:>3} {:>8} {:>14} {:>14}", "q", "lambda_q", "l2_norm", "linf_norm");
    for s in bank.shell_norms(&field, 2.0).shells {
        println!("  {:>3} {:>8} {:>14.6e} {:>14.6e}", s.q, s.lambda, s.l2, s.linf);
    }
    Ok(())
}

fn inspect(path: &Path) -> cns_core::Result<()> {
    if path.is_dir() {
        let manifest = std::fs::read_to_string(path.join("manifest.txt"))?;
        CheckpointMeta::from_manifest(&manifest)?;
        print!("{manifest}");
        for name in ["n.bin", "c.bin", "u.bin"] {
            inspect_file(&path.join(name))?;
        }
        Ok(())
    } else {
        inspect_file(path)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let takes_overrides = matches!(cli.command, Command::Run { .. } | Command::Resume { .. });
    if !overrides.is_empty() && !takes_overrides {
        eprintln!("error: configuration overrides only apply to 'run' and 'resume'");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run { config } => match load_config(config.as_deref(), &overrides).and_then(|c| run_simulation(&c)) {
            Ok(outcome) => report(&outcome),
            Err(e) => fail(e),
        },
        Command::Resume { checkpoint, config } => {
            let cfg = match config {
                Some(p) => load_config(Some(&p), &overrides),
                None => resume_config(&checkpoint, &overrides).map(|(c, w)| {
                    w.iter().for_each(|w| warn!("{w}"));
                    c
                }),
            };
            match cfg.and_then(|c| resume_simulation(&checkpoint, &c)) {
                Ok(outcome) => report(&outcome),
                Err(e) => fail(e),
            }
        }
        Command::Verify {
            dim,
            n,
            seed,
            break_dealias,
            output,
        } => {
            let opts = VerifyOptions {
                dim,
                n,
                seed,
                break_dealias,
            };
            let rep = match verify_suite(&opts) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let json = rep.to_json();
            println!("{json}");
            if let Some(p) = output {
                if let Err(e) = std::fs::write(&p, format!("{json}\n")) {
                    return fail(e.into());
                }
            }
            if rep.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PROPERTY as u8)
            }
        }
        Command::Inspect { path } => match inspect(&path) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
    }
}
