//! Command-line entry point for the spin-bus transfer pipelines.
//!
//! Every subcommand reads one TOML config (schema documented in the
//! spinbus crate and the repository README), applies `--set` overrides,
//! validates, runs, and writes its artifacts atomically together with a
//! deterministic `manifest.json`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spinbus::eigen::SectorSpectra;
use spinbus::experiments::config::{parse_with_overrides, ExperimentFile};
use spinbus::experiments::{
    run_disorder_scan, run_lambda_scan, run_mixed_node_check, run_position_scan, run_theta_scan,
    System,
};
use spinbus::model::{build_bus_hamiltonian, build_total_hamiltonian};
use spinbus::observables::{find_first_maximum, find_pst_optimum, transfer_fidelity, FirstMaxOptions};
use spinbus::report::{
    render_disorder_csv, render_json, render_lambda_csv, render_optimum_json,
    render_position_csv, render_spectrum_csv, render_theta_csv, render_trace_csv, sha256_hex,
    write_atomic, ArtifactRecord, Manifest,
};
use spinbus::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spinbus",
    version,
    about = "Exact-diagonalization experiments for state transfer through Heisenberg spin buses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key before validation, e.g. --set model.lambda=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory receiving the artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (falls back to SPINBUS_THREADS, then all cores).
    /// Results are identical for any value.
    #[arg(long)]
    threads: Option<usize>,
    /// Print per-artifact detail.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimumSearch {
    /// Parity-appropriate default: global in window for odd buses,
    /// ripple-filtered first maximum for even buses.
    Auto,
    /// Bare first interior maximum.
    First,
    /// Global maximum in the window.
    Global,
}

#[derive(Subcommand)]
enum Command {
    /// Sector-resolved spectrum of the isolated bus (or full register).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Diagonalize the bus plus both qubits instead of the bus alone.
        #[arg(long)]
        full_system: bool,
    },
    /// Fidelity trace F_B(t) plus its transfer optimum.
    Trace {
        #[command(flatten)]
        common: Common,
    },
    /// Transfer optimum only.
    Optimum {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        kind: OptimumSearch,
    },
    /// Effective couplings of the parity-appropriate low-energy model.
    Effective {
        #[command(flatten)]
        common: Common,
    },
    /// Infidelity vs coupling-ratio scan with log-log slope.
    ScanLambda {
        #[command(flatten)]
        common: Common,
    },
    /// Initial-state scan: first-order and second-order transfer times.
    ScanTheta {
        #[command(flatten)]
        common: Common,
    },
    /// Effective coupling and transfer time vs attachment position.
    ScanPosition {
        #[command(flatten)]
        common: Common,
    },
    /// Disorder ensembles, calibrated and uncalibrated.
    ScanDisorder {
        #[command(flatten)]
        common: Common,
    },
    /// Mixed-parity vs same-parity attachment comparison.
    CheckMixed {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Spectrum { common, .. }
            | Command::Trace { common }
            | Command::Optimum { common, .. }
            | Command::Effective { common }
            | Command::ScanLambda { common }
            | Command::ScanTheta { common }
            | Command::ScanPosition { common }
            | Command::ScanDisorder { common }
            | Command::CheckMixed { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Trace { .. } => "trace",
            Command::Optimum { .. } => "optimum",
            Command::Effective { .. } => "effective",
            Command::ScanLambda { .. } => "scan-lambda",
            Command::ScanTheta { .. } => "scan-theta",
            Command::ScanPosition { .. } => "scan-position",
            Command::ScanDisorder { .. } => "scan-disorder",
            Command::CheckMixed { .. } => "check-mixed",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_)
                | Error::InvalidModel(_)
                | Error::InvalidSector { .. }
                | Error::SiteCount { .. }
                | Error::SiteOutOfRange { .. } => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(command: &Command) -> Result<()> {
    let started = Instant::now();
    let common = command.common();

    let text = std::fs::read_to_string(&common.config).map_err(|e| {
        Error::InvalidConfig(format!("cannot read {}: {e}", common.config.display()))
    })?;
    let file = parse_with_overrides(&text, &common.overrides)?;
    let config_hash = sha256_hex(file.canonical_json()?.as_bytes());

    let threads = common
        .threads
        .or_else(|| {
            std::env::var("SPINBUS_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let artifacts = pool.install(|| produce_artifacts(command, &file))?;

    let mut written: Vec<PathBuf> = Vec::new();
    let mut records = Vec::new();
    for (name, bytes) in &artifacts {
        match write_atomic(&common.out, name, bytes) {
            Ok(path) => {
                records.push(ArtifactRecord {
                    name: name.clone(),
                    sha256: sha256_hex(bytes),
                    bytes: bytes.len(),
                });
                written.push(path);
            }
            Err(e) => {
                remove_partial(&written);
                return Err(e);
            }
        }
    }
    let manifest = Manifest {
        command: command.name().to_string(),
        config_hash,
        seed: file.seed,
        package: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: pool.current_num_threads(),
        artifacts: records,
    };
    if let Err(e) = write_atomic(&common.out, "manifest.json", render_json(&manifest)?.as_bytes())
    {
        remove_partial(&written);
        return Err(e);
    }

    if common.verbose > 0 {
        for (name, bytes) in &artifacts {
            println!("  {} ({} bytes)", name, bytes.len());
        }
    }
    println!(
        "{}: wrote {} artifacts + manifest.json to {} in {:.2?}",
        command.name(),
        artifacts.len(),
        common.out.display(),
        started.elapsed()
    );
    Ok(())
}

fn remove_partial(paths: &[PathBuf]) {
    for p in paths {
        let _ = std::fs::remove_file(p);
    }
}

type Artifacts = Vec<(String, Vec<u8>)>;

fn produce_artifacts(command: &Command, file: &ExperimentFile) -> Result<Artifacts> {
    match command {
        Command::Spectrum { full_system, .. } => spectrum_artifacts(file, *full_system),
        Command::Trace { .. } => trace_artifacts(file, None, true),
        Command::Optimum { kind, .. } => trace_artifacts(file, Some(*kind), false),
        Command::Effective { .. } => effective_artifacts(file),
        Command::ScanLambda { .. } => {
            let result = run_lambda_scan(&file.lambda_scan()?)?;
            let summary = serde_json::json!({
                "slope": result.slope,
                "intercept": result.intercept,
                "rows": result.rows.len(),
            });
            Ok(vec![
                ("scan_lambda.csv".into(), render_lambda_csv(&result).into_bytes()),
                ("scan_lambda_summary.json".into(), render_json(&summary)?.into_bytes()),
            ])
        }
        Command::ScanTheta { .. } => {
            let result = run_theta_scan(&file.theta_scan()?)?;
            let summary = serde_json::json!({
                "t0_prime_spread": result.t0_prime_spread,
                "f_prime_spread": result.f_prime_spread,
                "t0_first_order_spread": result.t0_first_order_spread,
                "rows": result.rows.len(),
            });
            Ok(vec![
                ("scan_theta.csv".into(), render_theta_csv(&result).into_bytes()),
                ("scan_theta_summary.json".into(), render_json(&summary)?.into_bytes()),
            ])
        }
        Command::ScanPosition { .. } => {
            let cfg = file.position_scan()?;
            let attach_a = cfg.base.attach.0;
            let result = run_position_scan(&cfg)?;
            let summary = serde_json::json!({
                "non_monotonic_t0": result.non_monotonic_t0,
                "t0_argmax_j": result.t0_argmax_j,
                "antipode": result.antipode,
                "antipodal_sign": result.antipodal_sign,
                "rows": result.rows.len(),
            });
            Ok(vec![
                (
                    "scan_position.csv".into(),
                    render_position_csv(&result, attach_a).into_bytes(),
                ),
                ("scan_position_summary.json".into(), render_json(&summary)?.into_bytes()),
            ])
        }
        Command::ScanDisorder { .. } => {
            let result = run_disorder_scan(&file.disorder_scan()?)?;
            let summary = serde_json::json!({
                "uniform_infidelity": result.uniform_infidelity,
                "uniform_t_opt": result.uniform_t_opt,
                "uncalibrated_added_slope": result.uncalibrated_added_slope,
                "cells": result.summaries.len(),
            });
            Ok(vec![
                ("scan_disorder.csv".into(), render_disorder_csv(&result).into_bytes()),
                ("scan_disorder_summary.json".into(), render_json(&summary)?.into_bytes()),
            ])
        }
        Command::CheckMixed { .. } => {
            let report = run_mixed_node_check(&file.mixed_node()?)?;
            Ok(vec![(
                "mixed_node.json".into(),
                render_json(&report)?.into_bytes(),
            )])
        }
    }
}

fn spectrum_artifacts(file: &ExperimentFile, full_system: bool) -> Result<Artifacts> {
    let spec = file.model.to_spec()?;
    let spectra = if full_system {
        SectorSpectra::compute(spec.n_bus + 2, |b| build_total_hamiltonian(&spec, b))?
    } else {
        SectorSpectra::compute(spec.n_bus, |b| build_bus_hamiltonian(&spec, b))?
    };
    Ok(vec![(
        "spectrum.csv".into(),
        render_spectrum_csv(&spectra).into_bytes(),
    )])
}

fn trace_artifacts(
    file: &ExperimentFile,
    search: Option<OptimumSearch>,
    include_trace: bool,
) -> Result<Artifacts> {
    let spec = file.model.to_spec()?;
    let sys = System::new(spec)?;
    let angles = file.angles()?;
    let window = match file.window() {
        Some(w) => w,
        None => sys.default_window()?,
    };
    let trace = sys.trace(&angles, window, file.grid.dt_factor)?;

    let psi0 = sys.initial_state(&angles)?;
    let evolving = sys.propagator().project(&psi0)?;
    let site_b = sys.site_b();
    let eval = |t: f64| transfer_fidelity(&evolving.at(t), site_b, &angles).expect("valid state");
    let optimum = match search.unwrap_or(OptimumSearch::Auto) {
        OptimumSearch::Auto => sys.extract_optimum(&trace, &angles)?,
        OptimumSearch::First => find_first_maximum(&trace, eval, FirstMaxOptions::default()),
        OptimumSearch::Global => find_pst_optimum(&trace, eval),
    };

    let mut artifacts = Artifacts::new();
    if include_trace {
        artifacts.push(("trace.csv".into(), render_trace_csv(&trace).into_bytes()));
    }
    artifacts.push((
        "optimum.json".into(),
        render_optimum_json(optimum.as_ref(), sys.fingerprint())?.into_bytes(),
    ));
    Ok(artifacts)
}

fn effective_artifacts(file: &ExperimentFile) -> Result<Artifacts> {
    let spec = file.model.to_spec()?;
    let sys = System::new(spec.clone())?;
    let json = if spec.n_bus % 2 == 1 {
        render_json(&sys.odd_coupling()?)?
    } else {
        render_json(&sys.even_coupling()?)?
    };
    Ok(vec![("effective.json".into(), json.into_bytes())])
}
