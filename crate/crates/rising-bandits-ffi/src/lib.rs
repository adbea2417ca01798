//! C ABI surface for the rising-bandits simulator.
//!
//! All functions follow the same conventions:
//! - objects cross the boundary as opaque pointers created by `*_from_json`
//!   constructors and released by the matching `*_free`,
//! - every fallible call returns an [`RbStatus`] and writes its result through
//!   an out-pointer that is touched only on `RB_STATUS_OK`,
//! - on failure a thread-local message is set, readable via
//!   [`rb_last_error`] until the next failing call on the same thread.
//!
//! The generated header lives at `include/rising_bandits.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use rising_bandits::harness::{
    run_experiment_with_threads, write_outputs, ExperimentConfig, ExperimentResult,
};
use rising_bandits::payoff::PayoffCurve;

/// Result code of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    RbStatusOk = 0,
    /// A required pointer argument was null.
    RbStatusNullArgument = 1,
    /// A string argument was not valid UTF-8.
    RbStatusInvalidUtf8 = 2,
    /// The JSON did not describe a valid experiment config.
    RbStatusBadConfig = 3,
    /// The JSON did not describe a valid payoff curve.
    RbStatusBadCurve = 4,
    /// The simulation itself failed.
    RbStatusRunFailed = 5,
    /// A policy/replication/arm index was out of range.
    RbStatusOutOfRange = 6,
    /// Writing result files failed.
    RbStatusIo = 7,
}

use RbStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: RbStatus, message: impl std::fmt::Display) -> RbStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
    status
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn read_utf8<'a>(text: *const c_char) -> Result<&'a str, RbStatus> {
    if text.is_null() {
        return Err(fail(RbStatusNullArgument, "string argument is null"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|e| fail(RbStatusInvalidUtf8, e))
}

/// Opaque experiment configuration.
pub struct RbConfig(ExperimentConfig);

/// Opaque simulation result (owns its config snapshot and label storage).
pub struct RbResult {
    config: ExperimentConfig,
    result: ExperimentResult,
    labels: Vec<CString>,
}

/// Opaque payoff curve.
pub struct RbCurve(PayoffCurve);

/// Parses and validates an experiment config from JSON. On success `*out`
/// owns a new config; release it with `rb_config_free`.
#[no_mangle]
pub unsafe extern "C" fn rb_config_from_json(
    json: *const c_char,
    out: *mut *mut RbConfig,
) -> RbStatus {
    if out.is_null() {
        return fail(RbStatusNullArgument, "out pointer is null");
    }
    let text = match read_utf8(json) {
        Ok(text) => text,
        Err(status) => return status,
    };
    let config = match ExperimentConfig::from_json(text) {
        Ok(config) => config,
        Err(e) => return fail(RbStatusBadConfig, e),
    };
    if let Err(e) = config.validate() {
        return fail(RbStatusBadConfig, e);
    }
    *out = Box::into_raw(Box::new(RbConfig(config)));
    RbStatusOk
}

#[no_mangle]
pub unsafe extern "C" fn rb_config_free(config: *mut RbConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Overrides the master seed.
#[no_mangle]
pub unsafe extern "C" fn rb_config_set_seed(config: *mut RbConfig, seed: u64) -> RbStatus {
    match config.as_mut() {
        Some(config) => {
            config.0.seed = seed;
            RbStatusOk
        }
        None => fail(RbStatusNullArgument, "config is null"),
    }
}

/// Overrides the replication count (must stay ≥ 1).
#[no_mangle]
pub unsafe extern "C" fn rb_config_set_replications(
    config: *mut RbConfig,
    replications: usize,
) -> RbStatus {
    let config = match config.as_mut() {
        Some(config) => config,
        None => return fail(RbStatusNullArgument, "config is null"),
    };
    if replications == 0 {
        return fail(RbStatusBadConfig, "replications must be at least 1");
    }
    config.0.replications = replications;
    RbStatusOk
}

/// Runs the configured experiment. `threads == 0` uses one worker per core.
/// On success `*out` owns the result; release it with `rb_result_free`.
#[no_mangle]
pub unsafe extern "C" fn rb_run(
    config: *const RbConfig,
    threads: usize,
    out: *mut *mut RbResult,
) -> RbStatus {
    if out.is_null() {
        return fail(RbStatusNullArgument, "out pointer is null");
    }
    let config = match config.as_ref() {
        Some(config) => &config.0,
        None => return fail(RbStatusNullArgument, "config is null"),
    };
    let result = match run_experiment_with_threads(config, threads) {
        Ok(result) => result,
        Err(e) => return fail(RbStatusRunFailed, e),
    };
    let labels = result
        .policy_labels
        .iter()
        .map(|label| CString::new(label.as_str()).unwrap_or_default())
        .collect();
    *out = Box::into_raw(Box::new(RbResult {
        config: config.clone(),
        result,
        labels,
    }));
    RbStatusOk
}

#[no_mangle]
pub unsafe extern "C" fn rb_result_free(result: *mut RbResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rb_result_policy_count(
    result: *const RbResult,
    out: *mut usize,
) -> RbStatus {
    match (result.as_ref(), out.as_mut()) {
        (Some(result), Some(out)) => {
            *out = result.labels.len();
            RbStatusOk
        }
        _ => fail(RbStatusNullArgument, "result or out pointer is null"),
    }
}

#[no_mangle]
pub unsafe extern "C" fn rb_result_replication_count(
    result: *const RbResult,
    out: *mut usize,
) -> RbStatus {
    match (result.as_ref(), out.as_mut()) {
        (Some(result), Some(out)) => {
            *out = result.config.replications;
            RbStatusOk
        }
        _ => fail(RbStatusNullArgument, "result or out pointer is null"),
    }
}

/// Label of one policy. The pointer borrows from the result and stays valid
/// until `rb_result_free`.
#[no_mangle]
pub unsafe extern "C" fn rb_result_policy_label(
    result: *const RbResult,
    policy: usize,
    out: *mut *const c_char,
) -> RbStatus {
    let result = match result.as_ref() {
        Some(result) => result,
        None => return fail(RbStatusNullArgument, "result is null"),
    };
    if out.is_null() {
        return fail(RbStatusNullArgument, "out pointer is null");
    }
    match result.labels.get(policy) {
        Some(label) => {
            *out = label.as_ptr();
            RbStatusOk
        }
        None => fail(RbStatusOutOfRange, format!("no policy {policy}")),
    }
}

/// Final cumulative regret of one (policy, replication) run.
#[no_mangle]
pub unsafe extern "C" fn rb_result_final_regret(
    result: *const RbResult,
    policy: usize,
    replication: usize,
    out: *mut f64,
) -> RbStatus {
    let result = match result.as_ref() {
        Some(result) => result,
        None => return fail(RbStatusNullArgument, "result is null"),
    };
    if out.is_null() {
        return fail(RbStatusNullArgument, "out pointer is null");
    }
    let curve = match result
        .result
        .regret
        .get(policy)
        .and_then(|runs| runs.get(replication))
    {
        Some(curve) => curve,
        None => {
            return fail(
                RbStatusOutOfRange,
                format!("no run at policy {policy}, replication {replication}"),
            )
        }
    };
    *out = curve.last().copied().unwrap_or(0.0);
    RbStatusOk
}

/// Final cumulative regret averaged over replications.
#[no_mangle]
pub unsafe extern "C" fn rb_result_mean_final_regret(
    result: *const RbResult,
    policy: usize,
    out: *mut f64,
) -> RbStatus {
    let result = match result.as_ref() {
        Some(result) => result,
        None => return fail(RbStatusNullArgument, "result is null"),
    };
    if out.is_null() {
        return fail(RbStatusNullArgument, "out pointer is null");
    }
    let runs = match result.result.regret.get(policy) {
        Some(runs) if !runs.is_empty() => runs,
        _ => return fail(RbStatusOutOfRange, format!("no policy {policy}")),
    };
    *out = runs
        .iter()
        .map(|curve| curve.last().copied().unwrap_or(0.0))
        .sum::<f64>()
        / runs.len() as f64;
    RbStatusOk
}

/// Writes the standard output files (results.csv, final.csv, manifest.json)
/// into `dir`, creating it if needed.
#[no_mangle]
pub unsafe extern "C" fn rb_result_write(
    result: *const RbResult,
    dir: *const c_char,
) -> RbStatus {
    let result = match result.as_ref() {
        Some(result) => result,
        None => return fail(RbStatusNullArgument, "result is null"),
    };
    let dir = match read_utf8(dir) {
        Ok(dir) => dir,
        Err(status) => return status,
    };
    match write_outputs(&result.config, &result.result, Path::new(dir)) {
        Ok(()) => RbStatusOk,
        Err(e) => fail(RbStatusIo, e),
    }
}

/// Parses a payoff curve from its JSON description
/// (e.g. `{"kind":"exponential","c":0.8,"a":0.01}`).
#[no_mangle]
pub unsafe extern "C" fn rb_curve_from_json(
    json: *const c_char,
    out: *mut *mut RbCurve,
) -> RbStatus {
    if out.is_null() {
        return fail(RbStatusNullArgument, "out pointer is null");
    }
    let text = match read_utf8(json) {
        Ok(text) => text,
        Err(status) => return status,
    };
    match serde_json::from_str::<PayoffCurve>(text) {
        Ok(curve) => {
            *out = Box::into_raw(Box::new(RbCurve(curve)));
            RbStatusOk
        }
        Err(e) => fail(RbStatusBadCurve, e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn rb_curve_free(curve: *mut RbCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Expected payoff after `n` pulls (rested) or at round `n` (restless).
#[no_mangle]
pub unsafe extern "C" fn rb_curve_eval(
    curve: *const RbCurve,
    n: usize,
    out: *mut f64,
) -> RbStatus {
    match (curve.as_ref(), out.as_mut()) {
        (Some(curve), Some(out)) => {
            *out = curve.0.eval(n);
            RbStatusOk
        }
        _ => fail(RbStatusNullArgument, "curve or out pointer is null"),
    }
}

/// Whether the curve is non-decreasing and concave over the first
/// `horizon` pulls.
#[no_mangle]
pub unsafe extern "C" fn rb_curve_is_rising(
    curve: *const RbCurve,
    horizon: usize,
    out: *mut bool,
) -> RbStatus {
    match (curve.as_ref(), out.as_mut()) {
        (Some(curve), Some(out)) => {
            *out = curve.0.check_rising(horizon).is_rising();
            RbStatusOk
        }
        _ => fail(RbStatusNullArgument, "curve or out pointer is null"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstr(text: &str) -> CString {
        CString::new(text).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(rb_last_error()).to_str().unwrap().to_string() }
    }

    const CONFIG: &str = r#"{
        "setting": "restless",
        "k": 3,
        "t": 400,
        "replications": 2,
        "sigma": 0.05,
        "epsilon": 0.25,
        "policies": [
            {"policy": "rising", "mode": "restless", "deterministic": false},
            {"policy": "baseline", "algo": "rexp3"}
        ],
        "environment": {"env": "synthetic_suite", "suite_seed": 7},
        "seed": 11
    }"#;

    #[test]
    fn version_is_non_empty() {
        let version = unsafe { CStr::from_ptr(rb_version()) };
        assert!(!version.to_bytes().is_empty());
    }

    #[test]
    fn config_round_trip_and_run() {
        unsafe {
            let json = cstr(CONFIG);
            let mut config: *mut RbConfig = ptr::null_mut();
            assert_eq!(rb_config_from_json(json.as_ptr(), &mut config), RbStatusOk);
            assert_eq!(rb_config_set_seed(config, 99), RbStatusOk);
            assert_eq!(rb_config_set_replications(config, 3), RbStatusOk);

            let mut result: *mut RbResult = ptr::null_mut();
            assert_eq!(rb_run(config, 1, &mut result), RbStatusOk);

            let mut policies = 0usize;
            assert_eq!(rb_result_policy_count(result, &mut policies), RbStatusOk);
            assert_eq!(policies, 2);
            let mut reps = 0usize;
            assert_eq!(rb_result_replication_count(result, &mut reps), RbStatusOk);
            assert_eq!(reps, 3);

            let mut label: *const c_char = ptr::null();
            assert_eq!(rb_result_policy_label(result, 0, &mut label), RbStatusOk);
            assert_eq!(CStr::from_ptr(label).to_str().unwrap(), "r-less-ucb");

            let mut mean = f64::NAN;
            assert_eq!(rb_result_mean_final_regret(result, 1, &mut mean), RbStatusOk);
            assert!(mean.is_finite() && mean >= 0.0);

            let mut per_rep = f64::NAN;
            assert_eq!(rb_result_final_regret(result, 1, 2, &mut per_rep), RbStatusOk);
            assert!(per_rep.is_finite());

            rb_result_free(result);
            rb_config_free(config);
        }
    }

    #[test]
    fn run_matches_direct_library_call() {
        unsafe {
            let json = cstr(CONFIG);
            let mut config: *mut RbConfig = ptr::null_mut();
            assert_eq!(rb_config_from_json(json.as_ptr(), &mut config), RbStatusOk);
            let mut result: *mut RbResult = ptr::null_mut();
            assert_eq!(rb_run(config, 1, &mut result), RbStatusOk);
            let mut via_ffi = f64::NAN;
            assert_eq!(rb_result_mean_final_regret(result, 0, &mut via_ffi), RbStatusOk);

            let direct_config = ExperimentConfig::from_json(CONFIG).unwrap();
            let direct = run_experiment_with_threads(&direct_config, 1).unwrap();
            let direct_mean = direct.regret[0]
                .iter()
                .map(|curve| *curve.last().unwrap())
                .sum::<f64>()
                / direct.regret[0].len() as f64;
            assert_eq!(via_ffi, direct_mean);

            rb_result_free(result);
            rb_config_free(config);
        }
    }

    #[test]
    fn bad_config_reports_error() {
        unsafe {
            let json = cstr(r#"{"setting": "restless"}"#);
            let mut config: *mut RbConfig = ptr::null_mut();
            assert_eq!(
                rb_config_from_json(json.as_ptr(), &mut config),
                RbStatusBadConfig
            );
            assert!(config.is_null());
            assert!(!last_error().is_empty());
        }
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            let mut config: *mut RbConfig = ptr::null_mut();
            assert_eq!(
                rb_config_from_json(ptr::null(), &mut config),
                RbStatusNullArgument
            );
            assert_eq!(
                rb_run(ptr::null(), 0, ptr::null_mut()),
                RbStatusNullArgument
            );
            assert_eq!(rb_curve_eval(ptr::null(), 1, ptr::null_mut()), RbStatusNullArgument);
        }
    }

    #[test]
    fn out_of_range_indices_are_rejected() {
        unsafe {
            let json = cstr(CONFIG);
            let mut config: *mut RbConfig = ptr::null_mut();
            assert_eq!(rb_config_from_json(json.as_ptr(), &mut config), RbStatusOk);
            let mut result: *mut RbResult = ptr::null_mut();
            assert_eq!(rb_run(config, 1, &mut result), RbStatusOk);
            let mut value = 0.0;
            assert_eq!(
                rb_result_mean_final_regret(result, 5, &mut value),
                RbStatusOutOfRange
            );
            assert_eq!(
                rb_result_final_regret(result, 0, 9, &mut value),
                RbStatusOutOfRange
            );
            rb_result_free(result);
            rb_config_free(config);
        }
    }

    #[test]
    fn curve_eval_and_rising_check() {
        unsafe {
            let json = cstr(r#"{"kind": "constant", "level": 0.75}"#);
            let mut curve: *mut RbCurve = ptr::null_mut();
            assert_eq!(rb_curve_from_json(json.as_ptr(), &mut curve), RbStatusOk);
            let mut value = 0.0;
            assert_eq!(rb_curve_eval(curve, 10, &mut value), RbStatusOk);
            assert_eq!(value, 0.75);
            let mut rising = false;
            assert_eq!(rb_curve_is_rising(curve, 100, &mut rising), RbStatusOk);
            assert!(rising);
            rb_curve_free(curve);

            // A step is non-decreasing but not concave.
            let step = cstr(r#"{"kind": "step", "before": 0.0, "after": 0.5, "threshold": 5}"#);
            let mut curve: *mut RbCurve = ptr::null_mut();
            assert_eq!(rb_curve_from_json(step.as_ptr(), &mut curve), RbStatusOk);
            let mut rising = true;
            assert_eq!(rb_curve_is_rising(curve, 100, &mut rising), RbStatusOk);
            assert!(!rising);
            rb_curve_free(curve);

            let bad = cstr(r#"{"kind": "no-such-curve"}"#);
            let mut curve: *mut RbCurve = ptr::null_mut();
            assert_eq!(rb_curve_from_json(bad.as_ptr(), &mut curve), RbStatusBadCurve);
        }
    }

    #[test]
    fn result_write_produces_files() {
        unsafe {
            let json = cstr(CONFIG);
            let mut config: *mut RbConfig = ptr::null_mut();
            assert_eq!(rb_config_from_json(json.as_ptr(), &mut config), RbStatusOk);
            let mut result: *mut RbResult = ptr::null_mut();
            assert_eq!(rb_run(config, 1, &mut result), RbStatusOk);

            let dir = std::env::temp_dir().join(format!("rb-ffi-{}", std::process::id()));
            let dir_c = cstr(dir.to_str().unwrap());
            assert_eq!(rb_result_write(result, dir_c.as_ptr()), RbStatusOk);
            assert!(dir.join("results.csv").exists());
            assert!(dir.join("final.csv").exists());
            assert!(dir.join("manifest.json").exists());
            std::fs::remove_dir_all(&dir).unwrap();

            rb_result_free(result);
            rb_config_free(config);
        }
    }
}
