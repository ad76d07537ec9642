//! C ABI for the solver: opaque configuration handles, integer status
//! codes, and a thread-local last-error message.  The contract is declared
//! in `include/thermovisco.h`; status codes mirror the CLI exit codes
//! (0 ok, 1 check failure, 2 config error, 3 solver failure) plus 4 for
//! invalid arguments.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::Path;

use thermovisco::analysis;
use thermovisco::config::RunConfig;
use thermovisco::error::CoreError;
use thermovisco::linear::LinearScheme;
use thermovisco::material::assumption_report;
use thermovisco::norms::NormSpec;
use thermovisco::output;
use thermovisco::scheme::Scheme;

pub const TV_OK: c_int = 0;
pub const TV_ERR_CHECK: c_int = 1;
pub const TV_ERR_CONFIG: c_int = 2;
pub const TV_ERR_SOLVER: c_int = 3;
pub const TV_ERR_ARGUMENT: c_int = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &CoreError) -> c_int {
    match err {
        CoreError::LineSearchFailed { .. }
        | CoreError::MaxIterExceeded { .. }
        | CoreError::NewtonDiverged { .. }
        | CoreError::SingularSystem(_)
        | CoreError::NonPositiveDeterminant { .. }
        | CoreError::NegativeTemperature { .. } => TV_ERR_SOLVER,
        _ => TV_ERR_CONFIG,
    }
}

/// Opaque configuration handle.
pub struct TvConfig(RunConfig);

/// Linearized material tensors in row-major layout; the rank-4 tensors map
/// 2x2 matrices indexed (i*2+j).
#[repr(C)]
#[derive(Clone, Copy)]
pub struct TvLinearTensors {
    pub cw: [f64; 16],
    pub cd: [f64; 16],
    pub b_alpha: [f64; 4],
    pub k0: [f64; 4],
    pub c_v_bar: f64,
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `cap`); returns the full message length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn tv_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() - 1
    })
}

/// Parses and validates a TOML configuration; returns null on error.
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tv_config_parse(text: *const c_char) -> *mut TvConfig {
    if text.is_null() {
        set_error("null configuration text");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("configuration text is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    match RunConfig::from_str(text).and_then(|c| c.validate().map(|_| c)) {
        Ok(cfg) => Box::into_raw(Box::new(TvConfig(cfg))),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Releases a configuration handle.
///
/// # Safety
/// `cfg` must come from `tv_config_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tv_config_free(cfg: *mut TvConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the constitutive assumption battery; TV_OK iff every check passes.
///
/// # Safety
/// `cfg` must be a live handle from `tv_config_parse`.
#[no_mangle]
pub unsafe extern "C" fn tv_material_check(cfg: *const TvConfig) -> c_int {
    let Some(cfg) = cfg.as_ref() else {
        set_error("null configuration handle");
        return TV_ERR_ARGUMENT;
    };
    let model = match cfg.0.build_model() {
        Ok(m) => m,
        Err(e) => {
            set_error(&e.to_string());
            return TV_ERR_CHECK;
        }
    };
    let (checks, _, _) = assumption_report(&model);
    for c in &checks {
        if !c.passed {
            set_error(&format!("{}: {} ({})", c.label, c.description, c.detail));
            return TV_ERR_CHECK;
        }
    }
    TV_OK
}

/// Fills the linearized tensors of the configured material at the given
/// temperature exponent.
///
/// # Safety
/// `cfg` must be a live handle; `out` must point to a writable
/// `TvLinearTensors`.
#[no_mangle]
pub unsafe extern "C" fn tv_linearized_tensors(
    cfg: *const TvConfig,
    alpha: f64,
    out: *mut TvLinearTensors,
) -> c_int {
    let (Some(cfg), Some(out)) = (cfg.as_ref(), out.as_mut()) else {
        set_error("null argument");
        return TV_ERR_ARGUMENT;
    };
    let tensors = match cfg.0.build_model().and_then(|m| m.linearized_tensors(alpha)) {
        Ok(t) => t,
        Err(e) => {
            set_error(&e.to_string());
            return TV_ERR_CONFIG;
        }
    };
    for i in 0..2 {
        for j in 0..2 {
            out.b_alpha[i * 2 + j] = tensors.b_alpha.0[i][j];
            out.k0[i * 2 + j] = tensors.k0.0[i][j];
            for k in 0..2 {
                for l in 0..2 {
                    out.cw[(i * 2 + j) * 4 + k * 2 + l] = tensors.cw.0[i][j][k][l];
                    out.cd[(i * 2 + j) * 4 + k * 2 + l] = tensors.cd.0[i][j][k][l];
                }
            }
        }
    }
    out.c_v_bar = tensors.c_v_bar;
    TV_OK
}

unsafe fn dir_arg(out_dir: *const c_char) -> Result<String, c_int> {
    if out_dir.is_null() {
        set_error("null output directory");
        return Err(TV_ERR_ARGUMENT);
    }
    CStr::from_ptr(out_dir)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| {
            set_error("output directory is not valid UTF-8");
            TV_ERR_ARGUMENT
        })
}

/// Runs one simulation (`use_linear` selects the solver) and writes the
/// artifact directory.
///
/// # Safety
/// `cfg` must be a live handle; `out_dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn tv_simulate(
    cfg: *const TvConfig,
    use_linear: c_int,
    out_dir: *const c_char,
) -> c_int {
    let Some(cfg) = cfg.as_ref() else {
        set_error("null configuration handle");
        return TV_ERR_ARGUMENT;
    };
    let dir = match dir_arg(out_dir) {
        Ok(d) => d,
        Err(s) => return s,
    };
    let cfg = &cfg.0;
    let run = || -> Result<(), CoreError> {
        let grid = cfg.build_grid()?;
        let model = cfg.build_model()?;
        let (u0, mu0) = cfg.initial_fields(&grid)?;
        let dir = Path::new(&dir);
        if use_linear != 0 {
            let out = LinearScheme::new(&grid, &model, cfg.scheme.clone())?
                .run(&cfg.loads, &u0, &mu0)?;
            output::write_linear_run(dir, cfg, &grid, &out)?;
        } else {
            let out =
                Scheme::new(&grid, &model, cfg.scheme.clone())?.run(&cfg.loads, &u0, &mu0)?;
            output::write_nonlinear_run(dir, cfg, &grid, &out)?;
        }
        Ok(())
    };
    match run() {
        Ok(()) => TV_OK,
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Study kinds for `tv_study`.
pub const TV_STUDY_TAU: c_int = 0;
pub const TV_STUDY_EPSILON: c_int = 1;
pub const TV_STUDY_COMMUTE: c_int = 2;
pub const TV_STUDY_SCALING: c_int = 3;

/// Runs a convergence study over the configured ladders and writes
/// study.json / study.csv; TV_OK iff the study passed.
///
/// # Safety
/// `cfg` must be a live handle; `out_dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn tv_study(
    cfg: *const TvConfig,
    kind: c_int,
    out_dir: *const c_char,
) -> c_int {
    let Some(cfg) = cfg.as_ref() else {
        set_error("null configuration handle");
        return TV_ERR_ARGUMENT;
    };
    let dir = match dir_arg(out_dir) {
        Ok(d) => d,
        Err(s) => return s,
    };
    let cfg = &cfg.0;
    let run = || -> Result<analysis::StudyReport, CoreError> {
        let grid = cfg.build_grid()?;
        let model = cfg.build_model()?;
        let spec = NormSpec {
            r: cfg.study.r,
            s: cfg.study.s,
            ..NormSpec::temperature()
        };
        let report = match kind {
            TV_STUDY_TAU => analysis::tau_refinement_study(
                &grid,
                &model,
                &cfg.scheme,
                &cfg.loads,
                &cfg.study.tau,
                &spec,
            )?,
            TV_STUDY_EPSILON => analysis::epsilon_linearization_study(
                &grid,
                &model,
                &cfg.scheme,
                &cfg.loads,
                &cfg.study.eps,
            )?,
            TV_STUDY_COMMUTE => analysis::commutativity_study(
                &grid,
                &model,
                &cfg.scheme,
                &cfg.loads,
                &cfg.study.eps,
                &cfg.study.tau,
                &spec,
            )?,
            TV_STUDY_SCALING => analysis::check_apriori_scaling(
                &grid,
                &model,
                &cfg.scheme,
                &cfg.loads,
                &cfg.study.eps,
            )?,
            _ => {
                return Err(CoreError::InvalidConfig(format!(
                    "unknown study kind {kind}"
                )))
            }
        };
        output::write_study(Path::new(&dir), &report)?;
        Ok(report)
    };
    match run() {
        Ok(report) => {
            if report.passed {
                TV_OK
            } else {
                set_error(&report.notes.join("; "));
                TV_ERR_CHECK
            }
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}
