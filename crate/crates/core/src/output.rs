//! Run artifacts: ledger CSVs, nodal snapshots, the deterministic
//! `summary.json`, and study files.  All floating-point output uses 17
//! significant digits; the summary deliberately excludes wall time so a
//! repeated run of the same config on the same build is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::analysis::StudyReport;
use crate::config::RunConfig;
use crate::error::{CoreError, Result};
use crate::grid::{fmt17, Grid};
use crate::linear::LinearRunResult;
use crate::scheme::RunResult;

/// ledger.csv for the nonlinear solver.
pub fn ledger_csv(run: &RunResult) -> String {
    let mut out = String::from(
        "k,t,M,Win,E,Eeps,F_k,V_k,diss_step,res_mech,res_therm,min_theta,ebal_res,flux\n",
    );
    for r in &run.ledger {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt17(r.t),
            fmt17(r.m),
            fmt17(r.win),
            fmt17(r.e),
            fmt17(r.eeps),
            fmt17(r.f_k),
            fmt17(r.v_k),
            fmt17(r.diss_step),
            fmt17(r.res_mech),
            fmt17(r.res_therm),
            fmt17(r.min_theta),
            fmt17(r.ebal_res),
            fmt17(r.flux),
        );
    }
    out
}

/// ledger.csv for the linearized solver.
pub fn linear_ledger_csv(run: &LinearRunResult) -> String {
    let mut out = String::from("k,t,Elin,diss_step,mu_mass,min_mu,res_mech,res_therm\n");
    for r in &run.ledger {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k,
            fmt17(r.t),
            fmt17(r.elin),
            fmt17(r.diss_step),
            fmt17(r.mu_mass),
            fmt17(r.min_mu),
            fmt17(r.res_mech),
            fmt17(r.res_therm),
        );
    }
    out
}

/// Deterministic run summary (no wall time: byte-identical reruns).
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub solver: String,
    pub steps: usize,
    pub final_energies: BTreeMap<String, f64>,
    pub max_res_mech: f64,
    pub max_res_therm: f64,
    pub min_theta: f64,
    pub failed_step: Option<usize>,
    pub error: Option<String>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }

    pub fn from_nonlinear(run: &RunResult) -> Summary {
        let last = run.ledger.last().unwrap();
        let mut fe = BTreeMap::new();
        fe.insert("M".into(), last.m);
        fe.insert("Win".into(), last.win);
        fe.insert("E".into(), last.e);
        fe.insert("Eeps".into(), last.eeps);
        fe.insert("F_k".into(), last.f_k);
        fe.insert("V_k".into(), last.v_k);
        Summary {
            solver: "nonlinear".into(),
            steps: run.ledger.len() - 1,
            final_energies: fe,
            max_res_mech: run.ledger.iter().map(|r| r.res_mech).fold(0.0, f64::max),
            max_res_therm: run.ledger.iter().map(|r| r.res_therm).fold(0.0, f64::max),
            min_theta: run
                .ledger
                .iter()
                .map(|r| r.min_theta)
                .fold(f64::INFINITY, f64::min),
            failed_step: None,
            error: None,
        }
    }

    pub fn from_linear(run: &LinearRunResult) -> Summary {
        let last = run.ledger.last().unwrap();
        let mut fe = BTreeMap::new();
        fe.insert("Elin".into(), last.elin);
        fe.insert("mu_mass".into(), last.mu_mass);
        Summary {
            solver: "linear".into(),
            steps: run.ledger.len() - 1,
            final_energies: fe,
            max_res_mech: run.ledger.iter().map(|r| r.res_mech).fold(0.0, f64::max),
            max_res_therm: run.ledger.iter().map(|r| r.res_therm).fold(0.0, f64::max),
            min_theta: run
                .ledger
                .iter()
                .map(|r| r.min_mu)
                .fold(f64::INFINITY, f64::min),
            failed_step: None,
            error: None,
        }
    }

    /// Summary of a failed run with the offending step when the error
    /// carries one.
    pub fn from_error(solver: &str, err: &CoreError) -> Summary {
        let failed_step = match err {
            CoreError::LineSearchFailed { step }
            | CoreError::MaxIterExceeded { step, .. }
            | CoreError::NewtonDiverged { step, .. } => Some(*step),
            _ => None,
        };
        Summary {
            solver: solver.into(),
            steps: 0,
            final_energies: BTreeMap::new(),
            max_res_mech: f64::NAN,
            max_res_therm: f64::NAN,
            min_theta: f64::NAN,
            failed_step,
            error: Some(format!("{err}")),
        }
    }
}

fn snapshot_name(k: usize) -> String {
    format!("snap_{k:06}.csv")
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

/// Writes the full artifact set of a completed nonlinear run; returns the
/// summary that was written.
pub fn write_nonlinear_run(
    dir: &Path,
    cfg: &RunConfig,
    grid: &Grid,
    run: &RunResult,
) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;
    write_file(dir, "config.resolved.toml", &cfg.resolved_toml())?;
    write_file(dir, "ledger.csv", &ledger_csv(run))?;
    let cadence = cfg.output.snapshot_every;
    let last = run.steps.len() - 1;
    for (k, s) in run.steps.iter().enumerate() {
        if k != last && (cadence == 0 || k % cadence != 0) {
            continue;
        }
        let yx: Vec<f64> = s.y.0.iter().map(|p| p[0]).collect();
        let yy: Vec<f64> = s.y.0.iter().map(|p| p[1]).collect();
        let csv = grid.snapshot_csv(&["yx", "yy", "theta"], &[&yx, &yy, &s.theta.0])?;
        write_file(dir, &snapshot_name(k), &csv)?;
    }
    let summary = Summary::from_nonlinear(run);
    write_file(dir, "summary.json", &summary.to_json())?;
    Ok(summary)
}

/// Writes the artifact set of a completed linear run.
pub fn write_linear_run(
    dir: &Path,
    cfg: &RunConfig,
    grid: &Grid,
    run: &LinearRunResult,
) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;
    write_file(dir, "config.resolved.toml", &cfg.resolved_toml())?;
    write_file(dir, "ledger.csv", &linear_ledger_csv(run))?;
    let cadence = cfg.output.snapshot_every;
    let last = run.steps.len() - 1;
    for (k, s) in run.steps.iter().enumerate() {
        if k != last && (cadence == 0 || k % cadence != 0) {
            continue;
        }
        let ux: Vec<f64> = s.u.0.iter().map(|p| p[0]).collect();
        let uy: Vec<f64> = s.u.0.iter().map(|p| p[1]).collect();
        let csv = grid.snapshot_csv(&["ux", "uy", "mu"], &[&ux, &uy, &s.mu.0])?;
        write_file(dir, &snapshot_name(k), &csv)?;
    }
    let summary = Summary::from_linear(run);
    write_file(dir, "summary.json", &summary.to_json())?;
    Ok(summary)
}

/// Writes summary.json for a failed run.
pub fn write_failure(dir: &Path, cfg: &RunConfig, solver: &str, err: &CoreError) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;
    write_file(dir, "config.resolved.toml", &cfg.resolved_toml())?;
    let summary = Summary::from_error(solver, err);
    write_file(dir, "summary.json", &summary.to_json())?;
    Ok(summary)
}

/// Writes study.json and study.csv.
pub fn write_study(dir: &Path, report: &StudyReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_file(dir, "study.json", &report.to_json())?;
    write_file(dir, "study.csv", &report.to_csv())?;
    Ok(())
}
