//! Command-line front end: material self-check, single simulations, and
//! convergence studies.
//!
//! Exit codes: 0 pass, 1 assertion/invariant failure, 2 usage/config
//! error, 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use thermovisco::analysis;
use thermovisco::config::RunConfig;
use thermovisco::error::CoreError;
use thermovisco::linear::LinearScheme;
use thermovisco::material::assumption_report;
use thermovisco::norms::NormSpec;
use thermovisco::output;
use thermovisco::scheme::Scheme;

#[derive(Parser)]
#[command(name = "thermovisco", version, about = "Finite-strain thermoviscoelasticity solver and verification harness")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding [output].dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for study rungs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Nonlinear,
    Linear,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Tau,
    Epsilon,
    Commute,
    Scaling,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate the constitutive assumptions of the configured material.
    CheckMaterial,
    /// Run one simulation and write its artifact directory.
    Simulate {
        /// Solver selection; defaults to [linear].enabled in the config.
        #[arg(long)]
        solver: Option<Solver>,
    },
    /// Run a convergence study over the configured ladders.
    Study {
        #[arg(long)]
        kind: StudyKind,
    },
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn is_solver_error(err: &CoreError) -> bool {
    matches!(
        err,
        CoreError::LineSearchFailed { .. }
            | CoreError::MaxIterExceeded { .. }
            | CoreError::NewtonDiverged { .. }
            | CoreError::SingularSystem(_)
            | CoreError::NonPositiveDeterminant { .. }
            | CoreError::NegativeTemperature { .. }
    )
}

fn load_config(cli: &Cli) -> Result<RunConfig, u8> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => RunConfig::from_path(path).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_CONFIG
        })?,
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    Ok(cfg)
}

fn cmd_check_material(cfg: &RunConfig) -> u8 {
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CHECK_FAILED;
        }
    };
    let (checks, c0, c0_upper) = assumption_report(&model);
    let mut all_ok = true;
    for c in &checks {
        println!(
            "{} {:10} {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.label,
            c.description,
            c.detail
        );
        all_ok &= c.passed;
    }
    println!("admissible heat-capacity window: c0 = {c0:.6e}, C0 = {c0_upper:.6e}");
    match model.linearized_tensors(1.0) {
        Ok(t) => println!(
            "thermal expansion matrix B(1) = [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]",
            t.b_alpha.0[0][0], t.b_alpha.0[0][1], t.b_alpha.0[1][0], t.b_alpha.0[1][1]
        ),
        Err(e) => {
            eprintln!("error: {e}");
            all_ok = false;
        }
    }
    if all_ok {
        0
    } else {
        EXIT_CHECK_FAILED
    }
}

fn cmd_simulate(cfg: &RunConfig, solver: Option<Solver>) -> u8 {
    let use_linear = match solver {
        Some(Solver::Linear) => true,
        Some(Solver::Nonlinear) => false,
        None => cfg.linear.enabled,
    };
    let grid = match cfg.build_grid() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (u0, mu0) = match cfg.initial_fields(&grid) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = cfg.output.dir.clone();
    let solver_name = if use_linear { "linear" } else { "nonlinear" };

    let outcome: Result<output::Summary, CoreError> = if use_linear {
        LinearScheme::new(&grid, &model, cfg.scheme.clone())
            .and_then(|ls| ls.run(&cfg.loads, &u0, &mu0))
            .and_then(|run| output::write_linear_run(&dir, cfg, &grid, &run))
    } else {
        Scheme::new(&grid, &model, cfg.scheme.clone())
            .and_then(|sch| sch.run(&cfg.loads, &u0, &mu0))
            .and_then(|run| output::write_nonlinear_run(&dir, cfg, &grid, &run))
    };
    match outcome {
        Ok(summary) => {
            println!(
                "{} run complete: {} steps, max residuals ({:.3e}, {:.3e}), artifacts in {}",
                solver_name,
                summary.steps,
                summary.max_res_mech,
                summary.max_res_therm,
                dir.display()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            let _ = output::write_failure(&dir, cfg, solver_name, &e);
            if is_solver_error(&e) {
                EXIT_SOLVER
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn cmd_study(cfg: &RunConfig, kind: StudyKind) -> u8 {
    let grid = match cfg.build_grid() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let spec = NormSpec {
        r: cfg.study.r,
        s: cfg.study.s,
        ..NormSpec::temperature()
    };
    let result = match kind {
        StudyKind::Tau => analysis::tau_refinement_study(
            &grid,
            &model,
            &cfg.scheme,
            &cfg.loads,
            &cfg.study.tau,
            &spec,
        ),
        StudyKind::Epsilon => analysis::epsilon_linearization_study(
            &grid,
            &model,
            &cfg.scheme,
            &cfg.loads,
            &cfg.study.eps,
        ),
        StudyKind::Commute => analysis::commutativity_study(
            &grid,
            &model,
            &cfg.scheme,
            &cfg.loads,
            &cfg.study.eps,
            &cfg.study.tau,
            &spec,
        ),
        StudyKind::Scaling => analysis::check_apriori_scaling(
            &grid,
            &model,
            &cfg.scheme,
            &cfg.loads,
            &cfg.study.eps,
        ),
    };
    match result {
        Ok(report) => {
            if let Err(e) = output::write_study(&cfg.output.dir, &report) {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
            println!(
                "{} study: {} ({} rungs), artifacts in {}",
                report.kind,
                if report.passed { "PASS" } else { "FAIL" },
                report.ladder.len(),
                cfg.output.dir.display()
            );
            for note in &report.notes {
                println!("  note: {note}");
            }
            if report.passed {
                0
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_solver_error(&e) {
                EXIT_SOLVER
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(code) => return ExitCode::from(code),
    };
    let code = match &cli.cmd {
        Cmd::CheckMaterial => cmd_check_material(&cfg),
        Cmd::Simulate { solver } => cmd_simulate(&cfg, *solver),
        Cmd::Study { kind } => cmd_study(&cfg, *kind),
    };
    ExitCode::from(code)
}
