//! C ABI over the `twochannel-bell` library.
//!
//! Every fallible function returns a [`TcbStatus`] and writes its result
//! through an out-pointer. On failure, a description is available from
//! [`tcb_last_error_message`] on the calling thread. Configurations live
//! behind the opaque [`TcbConfig`] handle; strings returned by the library
//! must be released with [`tcb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use twochannel_bell::config::ConfigFile;
use twochannel_bell::geometry::Angle;
use twochannel_bell::lhv::{self, Inequality, TheoremInstance, TheoremYs};
use twochannel_bell::{
    bell_expressions, optimizer, qm_model, simulator, Error, ExperimentConfig, Settings,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InconsistentConfig = 4,
    UnsupportedGeometry = 5,
    DegenerateDenominator = 6,
    InvalidInput = 7,
    Internal = 8,
}

/// Opaque experiment configuration.
pub struct TcbConfig {
    inner: ExperimentConfig,
}

/// Analyzer orientations in degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcbSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub r: f64,
    pub s: f64,
}

/// Coincidence probabilities of the four detector pairs.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcbCoincidences {
    pub pp: f64,
    pub mm: f64,
    pub pm: f64,
    pub mp: f64,
}

/// The ten variables of the bilinear lemma.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcbZInstance {
    pub x1p: f64,
    pub x1m: f64,
    pub x2p: f64,
    pub x2m: f64,
    pub y1p: f64,
    pub y1m: f64,
    pub y2p: f64,
    pub y2m: f64,
    pub u: f64,
    pub v: f64,
}

/// Minimum of `Z` over the x variables for fixed y, U, V.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcbCaseMinimum {
    pub value: f64,
    pub x1p: f64,
    pub x1m: f64,
    pub x2p: f64,
    pub x2m: f64,
    pub case_id: u8,
}

/// Summary of the sweep over deterministic local strategies.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcbLhvBound {
    pub min_value: f64,
    pub vertex_count: u32,
    pub attaining: u32,
    pub degenerate_excluded: u32,
    pub violations: u32,
    pub passed: bool,
}

/// Best analyzer angles (degrees, reduced into [0, 180)) and the value there.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcbOptimum {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub value: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(TcbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidConfig { .. } | Error::Json(_) | Error::Domain(_) => {
                TcbStatus::InvalidConfig
            }
            Error::InconsistentConfig { .. } => TcbStatus::InconsistentConfig,
            Error::UnsupportedGeometry { .. } => TcbStatus::UnsupportedGeometry,
            Error::DegenerateDenominator => TcbStatus::DegenerateDenominator,
            Error::InvalidInput(_) | Error::InvalidInstance(_) | Error::IncompleteBundle(_) => {
                TcbStatus::InvalidInput
            }
            Error::Io(_) | Error::Csv(_) => TcbStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TcbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            TcbStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            TcbStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TcbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn config_ref<'a>(config: *const TcbConfig) -> Result<&'a ExperimentConfig, Failure> {
    config
        .as_ref()
        .map(|c| &c.inner)
        .ok_or_else(|| null("config"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(text: String) -> *mut c_char {
    CString::new(text).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tcb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn tcb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Default configuration: η = 0.2, φ = 30°, F = 1, the 120° reference settings.
/// Release with [`tcb_config_free`].
#[no_mangle]
pub extern "C" fn tcb_config_new_default() -> *mut TcbConfig {
    Box::into_raw(Box::new(TcbConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Parses a JSON config document (same format as the command-line tool).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_config_from_json(
    json: *const c_char,
    out: *mut *mut TcbConfig,
) -> TcbStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(TcbStatus::InvalidUtf8, e.to_string()))?;
        let inner = ConfigFile::from_json(text)?.to_config()?;
        write_out(out, Box::into_raw(Box::new(TcbConfig { inner })))
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tcb_config_free(config: *mut TcbConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_config_get_settings(
    config: *const TcbConfig,
    out: *mut TcbSettings,
) -> TcbStatus {
    guard(|| {
        let s = config_ref(config)?.settings;
        let settings = TcbSettings {
            a: s.a.degrees(),
            a_prime: s.a_prime.degrees(),
            b: s.b.degrees(),
            b_prime: s.b_prime.degrees(),
            r: s.r.degrees(),
            s: s.s.degrees(),
        };
        write_out(out, settings)
    })
}

/// Replaces the analyzer settings. Angles must be finite.
///
/// # Safety
/// `config` must be a live handle and `settings` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_config_set_settings(
    config: *mut TcbConfig,
    settings: *const TcbSettings,
) -> TcbStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        let s = settings.as_ref().ok_or_else(|| null("settings"))?;
        let values = [s.a, s.a_prime, s.b, s.b_prime, s.r, s.s];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Failure(
                TcbStatus::InvalidInput,
                "settings must be finite".into(),
            ));
        }
        config.inner.settings = Settings {
            a: Angle::from_degrees(s.a),
            a_prime: Angle::from_degrees(s.a_prime),
            b: Angle::from_degrees(s.b),
            b_prime: Angle::from_degrees(s.b_prime),
            r: Angle::from_degrees(s.r),
            s: Angle::from_degrees(s.s),
        };
        Ok(())
    })
}

/// Probability that one channel of one side fires, `ηΩ/8π`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_singles_probability(
    config: *const TcbConfig,
    out: *mut f64,
) -> TcbStatus {
    guard(|| write_out(out, qm_model::singles_probability(config_ref(config)?)?))
}

/// Coincidence probabilities for analyzers at `first_deg` and `second_deg`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_joint_probabilities(
    config: *const TcbConfig,
    first_deg: f64,
    second_deg: f64,
    out: *mut TcbCoincidences,
) -> TcbStatus {
    guard(|| {
        let p = qm_model::joint_probabilities(
            config_ref(config)?,
            Angle::from_degrees(first_deg),
            Angle::from_degrees(second_deg),
        )?;
        write_out(
            out,
            TcbCoincidences {
                pp: p.pp,
                mm: p.mm,
                pm: p.pm,
                mp: p.mp,
            },
        )
    })
}

/// Quantum value of the ratio inequality (local bound −1) at the config's settings.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_ratio_lhs(config: *const TcbConfig, out: *mut f64) -> TcbStatus {
    guard(|| {
        let bundle = bell_expressions::qm_bundle(config_ref(config)?)?;
        write_out(out, bell_expressions::ratio_lhs(&bundle)?.value)
    })
}

/// Quantum value of the singles-based inequality (local bound −1).
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_expression22_lhs(
    config: *const TcbConfig,
    out: *mut f64,
) -> TcbStatus {
    guard(|| {
        let bundle = bell_expressions::qm_bundle(config_ref(config)?)?;
        write_out(out, bell_expressions::expression22_lhs(&bundle)?.value)
    })
}

/// CHSH value at the config's `a`, `a′`, `b`, `b′`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_chsh_value(config: *const TcbConfig, out: *mut f64) -> TcbStatus {
    guard(|| {
        let c = config_ref(config)?;
        c.check_parameters()?;
        let s = c.settings;
        write_out(
            out,
            bell_expressions::chsh_value(c, s.a, s.a_prime, s.b, s.b_prime),
        )
    })
}

/// Margin of the factor-1.5 violation relative to the CHSH margin `√2 − 1`.
#[no_mangle]
pub extern "C" fn tcb_violation_margin_ratio() -> f64 {
    bell_expressions::violation_margin_ratio()
}

/// `Z` of the bilinear lemma. Fails if the instance is outside `x ≤ U`, `y ≤ V`.
///
/// # Safety
/// `instance` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tcb_z_value(instance: *const TcbZInstance, out: *mut f64) -> TcbStatus {
    guard(|| {
        let i = instance.as_ref().ok_or_else(|| null("instance"))?;
        let inst = TheoremInstance {
            x1p: i.x1p,
            x1m: i.x1m,
            x2p: i.x2p,
            x2m: i.x2m,
            y1p: i.y1p,
            y1m: i.y1m,
            y2p: i.y2p,
            y2m: i.y2m,
            u: i.u,
            v: i.v,
        };
        write_out(out, lhv::z_value(&inst)?)
    })
}

/// Closed-form minimum of `Z` over the x variables; the x fields of
/// `instance` are ignored.
///
/// # Safety
/// `instance` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tcb_z_min_analytic(
    instance: *const TcbZInstance,
    out: *mut TcbCaseMinimum,
) -> TcbStatus {
    guard(|| {
        let i = instance.as_ref().ok_or_else(|| null("instance"))?;
        let ys = TheoremYs {
            y1p: i.y1p,
            y1m: i.y1m,
            y2p: i.y2p,
            y2m: i.y2m,
            u: i.u,
            v: i.v,
        };
        let m = lhv::z_min_analytic(&ys)?;
        write_out(
            out,
            TcbCaseMinimum {
                value: m.value,
                x1p: m.argmin.x1p,
                x1m: m.argmin.x1m,
                x2p: m.argmin.x2p,
                x2m: m.argmin.x2m,
                case_id: m.case_id,
            },
        )
    })
}

/// Sweeps all deterministic local strategies for expression 22 or 28.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_lhv_bound(expression: u32, out: *mut TcbLhvBound) -> TcbStatus {
    guard(|| {
        let inequality = Inequality::from_id(expression).ok_or_else(|| {
            Failure(
                TcbStatus::InvalidInput,
                format!("unknown expression {expression}"),
            )
        })?;
        let b = lhv::lhv_bound(inequality);
        let count = |n: usize| u32::try_from(n).unwrap_or(u32::MAX);
        write_out(
            out,
            TcbLhvBound {
                min_value: b.min_value,
                vertex_count: count(b.vertex_count),
                attaining: count(b.attaining),
                degenerate_excluded: count(b.degenerate_excluded),
                violations: count(b.violations),
                passed: b.passed,
            },
        )
    })
}

/// Runs the Monte Carlo pipeline and returns the run result as a JSON string.
/// Release the string with [`tcb_string_free`].
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_simulate_json(
    config: *const TcbConfig,
    bootstrap: u32,
    out: *mut *mut c_char,
) -> TcbStatus {
    guard(|| {
        let result = simulator::simulate(config_ref(config)?, bootstrap)?;
        let text = serde_json::to_string(&result).map_err(Error::from)?;
        write_out(out, into_c_string(text))
    })
}

/// # Safety
/// `text` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tcb_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Minimizes the ratio inequality over `a`, `a′`, `b`, `b′` (grid scan plus
/// coordinate descent). `grid_step_deg` must divide 180.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcb_optimize_ratio(
    config: *const TcbConfig,
    grid_step_deg: f64,
    starts: u32,
    refine_iters: u32,
    out: *mut TcbOptimum,
) -> TcbStatus {
    guard(|| {
        let r = optimizer::optimize_ratio(
            config_ref(config)?,
            grid_step_deg,
            starts as usize,
            refine_iters as usize,
        )?;
        let [a, a_prime, b, b_prime] = r.best_settings.degrees();
        write_out(
            out,
            TcbOptimum {
                a,
                a_prime,
                b,
                b_prime,
                value: r.best_value,
            },
        )
    })
}
