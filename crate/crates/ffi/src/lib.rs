//! C interface to the srm-mec solver.
//!
//! Every function returns an [`SrmStatus`]. On failure a message is kept per
//! thread and can be read with [`srm_last_error`]. Handles are created by a
//! `*_new` or producing function and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use srm_mec::config::RunConfig;
use srm_mec::metrics::{derive_metrics, MotorRecord};
use srm_mec::model::OperatingPoint;
use srm_mec::saturation::NonlinearSolver;
use srm_mec::torque::{TorqueCurve, TorqueModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    SolveFailed = 4,
    OutOfRange = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn fail(status: SrmStatus, msg: impl Into<String>) -> SrmStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`SrmStatus::Panic`].
fn guard(f: impl FnOnce() -> SrmStatus) -> SrmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SrmStatus::Panic, "internal panic"),
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn srm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srm_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// A configured motor: geometry, materials, B-H curve and solver settings.
pub struct SrmModel {
    config: RunConfig,
    solver: NonlinearSolver,
    torque: TorqueModel,
}

impl SrmModel {
    fn build(config: RunConfig) -> Result<Self, String> {
        let solver = NonlinearSolver::new(&config.geometry, &config.materials, &config.curve, &config.solver)
            .map_err(|e| e.to_string())?;
        let torque = TorqueModel::new(&config.geometry, &config.materials, &config.curve, &config.solver)
            .map_err(|e| e.to_string())?
            .with_winding(config.winding);
        Ok(Self { config, solver, torque })
    }
}

fn emit<T>(out: *mut *mut T, value: T) -> SrmStatus {
    // SAFETY: callers check `out` for null before calling.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    SrmStatus::Ok
}

/// Model with the built-in prototype configuration.
#[no_mangle]
pub extern "C" fn srm_model_new_default(out: *mut *mut SrmModel) -> SrmStatus {
    guard(|| {
        if out.is_null() {
            return fail(SrmStatus::NullPointer, "out is null");
        }
        match SrmModel::build(RunConfig::default()) {
            Ok(m) => emit(out, m),
            Err(e) => fail(SrmStatus::Config, e),
        }
    })
}

/// Model from a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn srm_model_from_config(path: *const c_char, out: *mut *mut SrmModel) -> SrmStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(SrmStatus::NullPointer, "path or out is null");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(SrmStatus::InvalidArgument, "path is not UTF-8");
        };
        match RunConfig::from_path(Path::new(path)).map_err(|e| e.to_string()).and_then(SrmModel::build) {
            Ok(m) => emit(out, m),
            Err(e) => fail(SrmStatus::Config, e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn srm_model_free(model: *mut SrmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Rotor pole pitch and aligned position, degrees.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn srm_model_angles(
    model: *const SrmModel,
    pitch_deg: *mut f64,
    aligned_deg: *mut f64,
) -> SrmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SrmStatus::NullPointer, "model is null");
        };
        if pitch_deg.is_null() || aligned_deg.is_null() {
            return fail(SrmStatus::NullPointer, "output pointer is null");
        }
        *pitch_deg = m.config.geometry.rotor_pole_pitch();
        *aligned_deg = m.config.geometry.aligned_angle();
        SrmStatus::Ok
    })
}

/// Flux solution at one operating point. Fluxes in Wb.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrmFluxResult {
    pub mesh: [f64; 5],
    pub yoke: f64,
    pub pole: f64,
    pub gap: f64,
    pub coil_gap: f64,
    pub magnet_gap: f64,
    pub iterations: u32,
    pub residual: f64,
}

/// Saturating solve at `current` A and `angle_deg` from unaligned.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srm_model_solve(
    model: *const SrmModel,
    current: f64,
    angle_deg: f64,
    out: *mut SrmFluxResult,
) -> SrmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SrmStatus::NullPointer, "model is null");
        };
        if out.is_null() {
            return fail(SrmStatus::NullPointer, "out is null");
        }
        let op = match OperatingPoint::new(&m.config.geometry, current, angle_deg) {
            Ok(op) => op,
            Err(e) => return fail(SrmStatus::InvalidArgument, e.to_string()),
        };
        match m.solver.solve(&op, None) {
            Ok(sol) => {
                *out = SrmFluxResult {
                    mesh: sol.mesh,
                    yoke: sol.branch.yoke,
                    pole: sol.branch.pole,
                    gap: sol.branch.gap,
                    coil_gap: sol.coil.gap,
                    magnet_gap: sol.magnet.gap,
                    iterations: u32::try_from(sol.iterations).unwrap_or(u32::MAX),
                    residual: sol.residual,
                };
                SrmStatus::Ok
            }
            Err(e) => fail(SrmStatus::SolveFailed, e.to_string()),
        }
    })
}

/// Static torque over one rotor pole pitch.
pub struct SrmTorqueCurve(TorqueCurve);

/// Torque curve at `current` A using the model's sweep settings.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srm_model_torque_curve(
    model: *const SrmModel,
    current: f64,
    out: *mut *mut SrmTorqueCurve,
) -> SrmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SrmStatus::NullPointer, "model is null");
        };
        if out.is_null() {
            return fail(SrmStatus::NullPointer, "out is null");
        }
        if !(current >= 0.0 && current.is_finite()) {
            return fail(SrmStatus::InvalidArgument, format!("current must be non-negative, got {current}"));
        }
        match m.torque.torque_curve(current, &m.config.sweep) {
            Ok(c) => emit(out, SrmTorqueCurve(c)),
            Err(e) => fail(SrmStatus::SolveFailed, e.to_string()),
        }
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `curve` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srm_torque_curve_len(curve: *const SrmTorqueCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.torque.len())
}

/// Sample `index`: angle in degrees and torque in N·m.
///
/// # Safety
/// `curve` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn srm_torque_curve_sample(
    curve: *const SrmTorqueCurve,
    index: usize,
    angle_deg: *mut f64,
    torque_nm: *mut f64,
) -> SrmStatus {
    guard(|| {
        let Some(c) = curve.as_ref() else {
            return fail(SrmStatus::NullPointer, "curve is null");
        };
        if angle_deg.is_null() || torque_nm.is_null() {
            return fail(SrmStatus::NullPointer, "output pointer is null");
        }
        if index >= c.0.torque.len() {
            return fail(SrmStatus::OutOfRange, format!("index {index} beyond {} samples", c.0.torque.len()));
        }
        *angle_deg = c.0.angles[index];
        *torque_nm = c.0.torque[index];
        SrmStatus::Ok
    })
}

/// Mean of |T| over the period and peak |T|, N·m.
///
/// # Safety
/// `curve` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn srm_torque_curve_stats(
    curve: *const SrmTorqueCurve,
    mean_nm: *mut f64,
    peak_nm: *mut f64,
) -> SrmStatus {
    guard(|| {
        let Some(c) = curve.as_ref() else {
            return fail(SrmStatus::NullPointer, "curve is null");
        };
        if mean_nm.is_null() || peak_nm.is_null() {
            return fail(SrmStatus::NullPointer, "output pointer is null");
        }
        *mean_nm = c.0.mean_torque;
        *peak_nm = c.0.peak_torque;
        SrmStatus::Ok
    })
}

/// # Safety
/// `curve` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn srm_torque_curve_free(curve: *mut SrmTorqueCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrmMetrics {
    /// N·m/L
    pub torque_density: f64,
    /// N·m/A
    pub torque_per_ampere: f64,
    /// N·m/L/A
    pub torque_density_per_ampere: f64,
}

/// Figures of merit from volume (mL), phase current (A) and mean torque (N·m).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srm_metrics(volume_ml: f64, current: f64, mean_torque: f64, out: *mut SrmMetrics) -> SrmStatus {
    guard(|| {
        if out.is_null() {
            return fail(SrmStatus::NullPointer, "out is null");
        }
        let rec = MotorRecord {
            name: String::new(),
            motor_volume: volume_ml,
            pm_volume: None,
            current,
            mean_torque,
        };
        if let Err(e) = rec.validate() {
            return fail(SrmStatus::InvalidArgument, e.to_string());
        }
        let m = derive_metrics(&rec);
        *out = SrmMetrics {
            torque_density: m.torque_density,
            torque_per_ampere: m.torque_per_ampere,
            torque_density_per_ampere: m.torque_density_per_ampere,
        };
        SrmStatus::Ok
    })
}
