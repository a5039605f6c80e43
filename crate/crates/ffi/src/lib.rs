//! C ABI for peeksched.
//!
//! Every fallible function returns a [`PeekschedStatus`]; on failure the
//! message is available from [`peeksched_last_error`] on the same thread.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`peeksched_string_free`]; scenario handles with
//! [`peeksched_scenario_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use peeksched::cli::{run_config_str, CliError};
use peeksched::scoring::{penalty, PenaltyKind, PenaltySpec};
use peeksched::sim::{run_trial, EstimationConfig};
use peeksched::workload::{builtin, ScenarioSpec};
use peeksched::SchedulerSpec;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeekschedStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    RuntimeError = 4,
    Panic = 5,
}

/// Aggregate metrics of one trial.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PeekschedTrialMetrics {
    pub mean_utility: f64,
    pub mean_expected_accuracy: f64,
    pub mean_violation_ms: f64,
    pub violation_count: u64,
    /// Wall-clock milliseconds; not reproducible across runs.
    pub scheduling_overhead_ms: f64,
}

/// Opaque scenario handle.
pub struct PeekschedScenario {
    spec: ScenarioSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (PeekschedStatus, String)>) -> PeekschedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PeekschedStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PeekschedStatus::Panic
        }
    }
}

fn invalid(e: impl ToString) -> (PeekschedStatus, String) {
    (PeekschedStatus::InvalidArgument, e.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PeekschedStatus, String)> {
    if p.is_null() {
        return Err((PeekschedStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next peeksched call on this thread.
#[no_mangle]
pub extern "C" fn peeksched_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn peeksched_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a handle for a built-in scenario (`fall`, `voice`, `heart`,
/// `default_trio`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peeksched_scenario_builtin(name: *const c_char, out: *mut *mut PeekschedScenario) -> PeekschedStatus {
    guard(|| {
        if out.is_null() {
            return Err((PeekschedStatus::NullArgument, "out is null".into()));
        }
        let spec = builtin(text(name, "name")?).map_err(invalid)?;
        *out = Box::into_raw(Box::new(PeekschedScenario { spec }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn peeksched_scenario_free(scenario: *mut PeekschedScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Sets the mean per-request deadline offset, keeping the distribution's
/// shape.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn peeksched_scenario_set_deadline_mean(scenario: *mut PeekschedScenario, mean_ms: f64) -> PeekschedStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or((PeekschedStatus::NullArgument, "scenario is null".to_string()))?;
        if !(mean_ms > 0.0 && mean_ms.is_finite()) {
            return Err(invalid(format!("deadline mean must be positive, got {mean_ms}")));
        }
        s.spec.deadline = s.spec.deadline.with_mean(mean_ms);
        Ok(())
    })
}

/// Runs one seeded trial of a scheduler preset (`maxacc-edf`, `lo-edf`,
/// `lo-priority`, `grouped`, `sneakpeek`) with default estimation settings.
///
/// # Safety
/// `scenario` must be a live handle, `preset` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peeksched_run_trial(
    scenario: *const PeekschedScenario,
    preset: *const c_char,
    worker_count: u32,
    seed: u64,
    out: *mut PeekschedTrialMetrics,
) -> PeekschedStatus {
    guard(|| {
        let s = scenario
            .as_ref()
            .ok_or((PeekschedStatus::NullArgument, "scenario is null".to_string()))?;
        if out.is_null() {
            return Err((PeekschedStatus::NullArgument, "out is null".into()));
        }
        if worker_count == 0 {
            return Err(invalid("worker_count must be positive"));
        }
        let spec = SchedulerSpec::preset(text(preset, "preset")?)
            .map_err(invalid)?
            .with_workers(worker_count as usize);
        let m = run_trial(&s.spec, &spec, &EstimationConfig::default(), seed)
            .map_err(|e| (PeekschedStatus::RuntimeError, e.to_string()))?;
        *out = PeekschedTrialMetrics {
            mean_utility: m.mean_utility,
            mean_expected_accuracy: m.mean_expected_accuracy,
            mean_violation_ms: m.mean_violation_ms,
            violation_count: m.violation_count as u64,
            scheduling_overhead_ms: m.scheduling_overhead_ms,
        };
        Ok(())
    })
}

/// Deadline penalty in [0, 1] for `kind` (`step`, `linear`, `sigmoid`,
/// `zero`).
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peeksched_penalty(
    kind: *const c_char,
    deadline_ms: f64,
    completion_ms: f64,
    out: *mut f64,
) -> PeekschedStatus {
    guard(|| {
        if out.is_null() {
            return Err((PeekschedStatus::NullArgument, "out is null".into()));
        }
        let name = text(kind, "kind")?;
        let kind = PenaltyKind::parse(name).ok_or_else(|| invalid(format!("unknown penalty `{name}`")))?;
        *out = penalty(PenaltySpec::new(kind), deadline_ms, completion_ms).map_err(invalid)?;
        Ok(())
    })
}

/// Runs an experiment configuration (TOML text) and returns the CSV.
///
/// # Safety
/// `config` must be a NUL-terminated string and `csv_out` a valid pointer.
/// On success `*csv_out` must be released with [`peeksched_string_free`].
#[no_mangle]
pub unsafe extern "C" fn peeksched_run_config(config: *const c_char, csv_out: *mut *mut c_char) -> PeekschedStatus {
    guard(|| {
        if csv_out.is_null() {
            return Err((PeekschedStatus::NullArgument, "csv_out is null".into()));
        }
        *csv_out = ptr::null_mut();
        let csv = run_config_str(text(config, "config")?).map_err(|e| match e {
            CliError::Config { .. } => (PeekschedStatus::ConfigError, e.to_string()),
            _ => (PeekschedStatus::RuntimeError, e.to_string()),
        })?;
        *csv_out = CString::new(csv).map_err(invalid)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn peeksched_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(peeksched_last_error()) }.to_str().unwrap().to_string()
    }

    #[test]
    fn trial_round_trip() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(peeksched_scenario_builtin(c("default_trio").as_ptr(), &mut s), PeekschedStatus::Ok);
            let mut a = PeekschedTrialMetrics::default();
            let mut b = PeekschedTrialMetrics::default();
            assert_eq!(peeksched_run_trial(s, c("sneakpeek").as_ptr(), 1, 5, &mut a), PeekschedStatus::Ok);
            assert_eq!(peeksched_run_trial(s, c("sneakpeek").as_ptr(), 1, 5, &mut b), PeekschedStatus::Ok);
            assert!(a.mean_utility > 0.0 && a.mean_utility <= 1.0);
            assert_eq!(a.mean_utility.to_bits(), b.mean_utility.to_bits());
            assert_eq!(peeksched_scenario_set_deadline_mean(s, 400.0), PeekschedStatus::Ok);
            assert_eq!(peeksched_run_trial(s, c("lo-edf").as_ptr(), 2, 5, &mut a), PeekschedStatus::Ok);
            peeksched_scenario_free(s);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(peeksched_scenario_builtin(c("mars").as_ptr(), &mut s), PeekschedStatus::InvalidArgument);
            assert!(last_error().contains("mars"));
            assert!(s.is_null());
            assert_eq!(peeksched_scenario_builtin(ptr::null(), &mut s), PeekschedStatus::NullArgument);

            peeksched_scenario_builtin(c("voice").as_ptr(), &mut s);
            let mut m = PeekschedTrialMetrics::default();
            assert_eq!(peeksched_run_trial(s, c("fifo").as_ptr(), 1, 0, &mut m), PeekschedStatus::InvalidArgument);
            assert_eq!(peeksched_run_trial(s, c("lo-edf").as_ptr(), 0, 0, &mut m), PeekschedStatus::InvalidArgument);
            assert_eq!(peeksched_run_trial(s, c("lo-edf").as_ptr(), 1, 0, &mut m), PeekschedStatus::Ok);
            assert_eq!(last_error(), "");
            peeksched_scenario_free(s);
            peeksched_scenario_free(ptr::null_mut());
        }
    }

    #[test]
    fn penalty_values() {
        let mut v = 0.0;
        unsafe {
            assert_eq!(peeksched_penalty(c("sigmoid").as_ptr(), 100.0, 150.0, &mut v), PeekschedStatus::Ok);
            assert!((v - 0.5).abs() < 1e-12);
            assert_eq!(peeksched_penalty(c("step").as_ptr(), 100.0, 100.0, &mut v), PeekschedStatus::Ok);
            assert_eq!(v, 0.0);
            assert_eq!(peeksched_penalty(c("linear").as_ptr(), 0.0, 10.0, &mut v), PeekschedStatus::InvalidArgument);
        }
    }

    #[test]
    fn config_runs_to_csv() {
        unsafe {
            let mut csv = ptr::null_mut();
            let status = peeksched_run_config(c("trials = 2\nschedulers = [\"grouped\"]\n").as_ptr(), &mut csv);
            assert_eq!(status, PeekschedStatus::Ok);
            let text = CStr::from_ptr(csv).to_str().unwrap().to_string();
            peeksched_string_free(csv);
            assert_eq!(text.lines().count(), 3);

            assert_eq!(peeksched_run_config(c("trials = 0\n").as_ptr(), &mut csv), PeekschedStatus::ConfigError);
            assert!(csv.is_null());
            assert!(last_error().starts_with("config:1:"));
        }
    }

    #[test]
    fn version_matches_the_crate() {
        let v = unsafe { CStr::from_ptr(peeksched_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
