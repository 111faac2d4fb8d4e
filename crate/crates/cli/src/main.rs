//! Command-line driver for the quantum Brownian motion positivity toolkit.
//!
//! Subcommands: `coeffs` (coefficient tables), `evolve` (one trajectory),
//! `stationary` (fixed-point diagnostics), `scan` (grid verdict maps) and
//! `witness` (search for points separating the Markovian and
//! non-Markovian dynamics). Exit codes: 0 success, 2 configuration
//! error, 3 numerical failure.

mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use hpz_core::coefficients::CoefficientEvaluator;
use hpz_core::output;
use hpz_core::propagator;
use hpz_core::scan::{self, ScanMode, Witness, WitnessReport};
use hpz_core::Error;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hpz",
    version,
    about = "Weak-coupling quantum Brownian motion on Gaussian states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the master-equation coefficients over time.
    Coeffs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Integrate one trajectory and write samples plus a JSON summary.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Solve and report the Markovian stationary state.
    Stationary {
        #[arg(long)]
        config: PathBuf,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a parameter grid (stationary or dynamic mode).
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Search for witness points, or re-verify persisted witnesses.
    Witness {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Re-run the witnesses in this JSON file and check onset times.
        #[arg(long)]
        verify: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidBath { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn create(out_dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let file = File::create(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Coeffs { config, out_dir } => {
            let cfg = RunConfig::load(&config)?;
            let bath = cfg.bath()?;
            let section = cfg
                .coeffs
                .as_ref()
                .ok_or_else(|| Error::Config("missing [coeffs] section".into()))?;
            if !(section.t_max > 0.0) || section.samples < 2 {
                return Err(Error::Config(
                    "coeffs needs t_max > 0 and samples >= 2".into(),
                ));
            }
            let ev = CoefficientEvaluator::new(&bath, &cfg.kernel())?;
            let n = section.samples;
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let t = section.t_max * i as f64 / (n - 1) as f64;
                rows.push((t, ev.set_at(t)?));
            }
            let mut w = create(&out_dir, "coeffs.csv")?;
            output::write_coeffs_csv(&mut w, &bath, &ev.markovian(), &rows)?;
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            println!("wrote {}", out_dir.join("coeffs.csv").display());
            Ok(())
        }
        Command::Evolve { config, out_dir } => {
            let cfg = RunConfig::load(&config)?;
            let bath = cfg.bath()?;
            let (t_end, evo) = cfg.evolution()?;
            let ev = CoefficientEvaluator::new(&bath, &cfg.kernel())?;
            let c0 = cfg
                .initial_state()
                .to_kd(bath.mass, bath.omega0, bath.hbar, bath.k_b)?;
            let traj = propagator::evolve(&c0, &ev, t_end, &evo)?;
            let stationary = if bath.gamma > 0.0 {
                Some(propagator::stationary_state(&ev)?)
            } else {
                None
            };

            let mut w = create(&out_dir, "trajectory.csv")?;
            output::write_trajectory_csv(&mut w, &traj)?;
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            let mut w = create(&out_dir, "ac_ratio.csv")?;
            output::write_ac_ratio_csv(&mut w, &traj)?;
            w.flush().map_err(|e| Error::Config(e.to_string()))?;

            let summary = output::TrajectorySummary::new(&traj, stationary.as_ref());
            write_json(&out_dir.join("summary.json"), &summary)?;
            println!(
                "wrote {}, {}, {}",
                out_dir.join("trajectory.csv").display(),
                out_dir.join("ac_ratio.csv").display(),
                out_dir.join("summary.json").display()
            );
            Ok(())
        }
        Command::Stationary { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let bath = cfg.bath()?;
            let ev = CoefficientEvaluator::new(&bath, &cfg.kernel())?;
            let st = propagator::stationary_state(&ev)?;
            match out {
                Some(path) => {
                    write_json(&path, &st)?;
                    println!("wrote {}", path.display());
                }
                None => {
                    let text = serde_json::to_string_pretty(&st)
                        .map_err(|e| Error::Config(e.to_string()))?;
                    println!("{text}");
                }
            }
            Ok(())
        }
        Command::Scan { config, out_dir } => {
            let cfg = RunConfig::load(&config)?;
            let grid_section = cfg
                .grid
                .as_ref()
                .ok_or_else(|| Error::Config("missing [grid] section".into()))?;
            let grid = grid_section.to_grid(cfg.initial_state());
            let settings = cfg.scan_settings();
            let reports = match grid.mode {
                ScanMode::StationaryOnly => scan::scan_stationary(&grid, &settings)?,
                ScanMode::Dynamic => scan::scan_dynamic(&grid, &settings)?,
            };
            let mut w = create(&out_dir, "scan.csv")?;
            output::write_scan_csv(&mut w, &reports)?;
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            write_json(&out_dir.join("scan.json"), &reports)?;
            println!(
                "wrote {} and {} ({} points)",
                out_dir.join("scan.csv").display(),
                out_dir.join("scan.json").display(),
                reports.len()
            );
            Ok(())
        }
        Command::Witness {
            config,
            out_dir,
            verify,
        } => {
            if let Some(path) = verify {
                return verify_witnesses(&path);
            }
            let cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let grid = match cfg.grid.as_ref() {
                Some(g) => g.to_grid(
                    cfg.initial_state
                        .unwrap_or_else(|| hpz_core::InitialState::squeezed(10.0)),
                ),
                None => scan::default_witness_grid(),
            };
            let settings = cfg.scan_settings();
            let report = scan::find_witnesses(&grid, &settings)?;
            let mut w = create(&out_dir, "witness_scan.csv")?;
            output::write_scan_csv(&mut w, &report.reports)?;
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            write_json(&out_dir.join("witnesses.json"), &report)?;
            println!(
                "scanned {} points: {} markovian-only witnesses, {} stationary-linked, {} nm anomalies at physical stationary",
                report.points_scanned,
                report.markovian_only.len(),
                report.stationary_linked.len(),
                report.nm_anomalies_at_physical_stationary
            );
            println!(
                "wrote {} and {}",
                out_dir.join("witnesses.json").display(),
                out_dir.join("witness_scan.csv").display()
            );
            if report.markovian_only.is_empty() || report.stationary_linked.is_empty() {
                return Err(Error::Config(
                    "witness search found no qualifying points in the configured box".into(),
                ));
            }
            Ok(())
        }
    }
}

fn verify_witnesses(path: &Path) -> Result<(), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let report: WitnessReport = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let witnesses: Vec<&Witness> = report
        .markovian_only
        .iter()
        .chain(report.stationary_linked.iter())
        .collect();
    if witnesses.is_empty() {
        return Err(Error::Config("no witnesses in file".into()));
    }
    let mut failures = 0usize;
    for (i, w) in witnesses.iter().enumerate() {
        let (m, nm) = scan::rerun_witness(w)?;
        let ok_m = onset_matches(w.markovian_first_violation, m);
        let ok_nm = onset_matches(w.non_markovian_first_violation, nm);
        let status = if ok_m && ok_nm { "ok" } else { "MISMATCH" };
        println!(
            "witness {i} ({:?} at gamma={}, cutoff={}, temperature={}): {status}",
            w.kind, w.point.gamma, w.point.cutoff, w.point.temperature
        );
        if !(ok_m && ok_nm) {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Error::IntegrationFailure {
            t: 0.0,
            reason: format!("{failures} witness(es) failed to reproduce"),
        });
    }
    println!("all {} witnesses reproduced", witnesses.len());
    Ok(())
}

fn onset_matches(stored: Option<f64>, rerun: Option<f64>) -> bool {
    match (stored, rerun) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= 1e-6 * a.abs().max(1e-12),
        _ => false,
    }
}
