//! C ABI over the or-twin core.
//!
//! Handles are opaque and owned by the caller: every `*_free` must be
//! called exactly once. Strings returned through `char **` out-parameters
//! are allocated here and released with [`or_twin_string_free`]. Every
//! function returns an [`OrTwinStatus`]; on failure
//! [`or_twin_last_error`] describes the problem for the calling thread.
//! Panics never cross the boundary; they surface as `OR_TWIN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use or_twin::analysis::{what_if, WhatIfRequest};
use or_twin::io::{export_report, load_project, load_scenario, ExportFormat, Report, ScenarioBundle, TablePaths};
use or_twin::runs::{execute, RunMode, RunResult};
use or_twin::strategy::Strategy;
use or_twin::{Error, IngestError};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrTwinStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationFailed = 4,
    DomainError = 5,
    IoError = 6,
    UnsupportedFormat = 7,
    InvalidArgument = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrTwinRunMode {
    Simulate = 0,
    Prospective = 1,
    Retrospective = 2,
}

/// Which document of a result to export.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrTwinDocument {
    Kpis = 0,
    Gantt = 1,
    Report = 2,
}

/// A loaded scenario bundle.
pub struct OrTwinScenario {
    bundle: ScenarioBundle,
}

/// The outcome of one run.
pub struct OrTwinResult {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(OrTwinStatus, String);

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::Io { .. } => OrTwinStatus::IoError,
            IngestError::Invalid(_) => OrTwinStatus::ValidationFailed,
            IngestError::UnsupportedFormat(_) => OrTwinStatus::UnsupportedFormat,
            _ => OrTwinStatus::ParseError,
        };
        Failure(status, format!("{}: {e}", e.code()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidOptions(_) => OrTwinStatus::InvalidArgument,
            _ => OrTwinStatus::DomainError,
        };
        Failure(status, format!("{}: {e}", e.code()))
    }
}

/// Runs `body`, recording failures and containing panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OrTwinStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OrTwinStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {what}"));
            OrTwinStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(OrTwinStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OrTwinStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn null(name: &str) -> Failure {
    Failure(OrTwinStatus::NullArgument, format!("{name} is null"))
}

/// # Safety
/// `out` is null or valid for a pointer write.
unsafe fn give_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(value).map_err(|_| Failure(OrTwinStatus::InvalidArgument, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// # Safety
/// `out` is null or valid for a pointer write.
unsafe fn give<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn or_twin_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn or_twin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn or_twin_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a configuration file or saved bundle.
///
/// # Safety
/// `config_path` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_load(
    config_path: *const c_char,
    out: *mut *mut OrTwinScenario,
) -> OrTwinStatus {
    guard(|| {
        let path = text(config_path, "config_path")?;
        let project = load_project(Path::new(path))?;
        give(out, OrTwinScenario { bundle: project.bundle })
    })
}

/// Loads the three tables, with an optional configuration (`config_path` may be null).
///
/// # Safety
/// Paths are NUL-terminated strings (config may be null); `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_load_tables(
    rooms_path: *const c_char,
    cases_path: *const c_char,
    durations_path: *const c_char,
    config_path: *const c_char,
    out: *mut *mut OrTwinScenario,
) -> OrTwinStatus {
    guard(|| {
        let paths = TablePaths {
            rooms: text(rooms_path, "rooms_path")?.into(),
            cases: text(cases_path, "cases_path")?.into(),
            durations: text(durations_path, "durations_path")?.into(),
        };
        let config = if config_path.is_null() {
            None
        } else {
            Some(Path::new(text(config_path, "config_path")?))
        };
        let bundle = load_scenario(&paths, config)?;
        give(out, OrTwinScenario { bundle })
    })
}

/// Parses and validates a JSON bundle.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_from_json(
    json: *const c_char,
    out: *mut *mut OrTwinScenario,
) -> OrTwinStatus {
    guard(|| {
        let bundle = ScenarioBundle::from_json(text(json, "json")?, Path::new("<json>"))?;
        bundle.check()?;
        give(out, OrTwinScenario { bundle })
    })
}

/// The bundle as JSON; free with [`or_twin_string_free`].
///
/// # Safety
/// `scenario` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_to_json(
    scenario: *const OrTwinScenario,
    out: *mut *mut c_char,
) -> OrTwinStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        give_string(out, s.bundle.to_json())
    })
}

/// # Safety
/// `scenario` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_set_seed(scenario: *mut OrTwinScenario, seed: u64) -> OrTwinStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.bundle.options.base_seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_set_replications(
    scenario: *mut OrTwinScenario,
    replications: u32,
) -> OrTwinStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        if replications == 0 {
            return Err(Failure(
                OrTwinStatus::InvalidArgument,
                "replications must be >= 1".into(),
            ));
        }
        s.bundle.options.replications = replications;
        Ok(())
    })
}

/// Sets the room-selection strategy by token (`first_fit`, `best_fit`, ...).
///
/// # Safety
/// `scenario` is a live handle; `strategy` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_set_strategy(
    scenario: *mut OrTwinScenario,
    strategy: *const c_char,
) -> OrTwinStatus {
    guard(|| {
        let token = text(strategy, "strategy")?;
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.bundle.options.strategy = token
            .parse::<Strategy>()
            .map_err(|e| Failure(OrTwinStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// # Safety
/// `scenario` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn or_twin_scenario_free(scenario: *mut OrTwinScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario in `mode`.
///
/// # Safety
/// `scenario` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_run(
    scenario: *const OrTwinScenario,
    mode: OrTwinRunMode,
    out: *mut *mut OrTwinResult,
) -> OrTwinStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            OrTwinRunMode::Simulate => RunMode::Simulate,
            OrTwinRunMode::Prospective => RunMode::Prospective,
            OrTwinRunMode::Retrospective => RunMode::Retrospective,
        };
        let result = execute(&s.bundle, mode)?;
        give(out, OrTwinResult { result })
    })
}

/// Headline utilization and overtime of a result.
///
/// # Safety
/// `result` is a live handle; the out pointers are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn or_twin_result_kpis(
    result: *const OrTwinResult,
    utilization: *mut f64,
    overtime: *mut f64,
) -> OrTwinStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if utilization.is_null() || overtime.is_null() {
            return Err(null("utilization/overtime"));
        }
        let k = r.result.kpis();
        *utilization = k.utilization;
        *overtime = k.overtime;
        Ok(())
    })
}

/// Canonical export of one document of a result; `format` is `json` or `csv`.
///
/// # Safety
/// `result` is a live handle; `format` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_result_export(
    result: *const OrTwinResult,
    document: OrTwinDocument,
    format: *const c_char,
    out: *mut *mut c_char,
) -> OrTwinStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let format: ExportFormat = text(format, "format")?.parse()?;
        let report = match document {
            OrTwinDocument::Kpis => Report::Kpi(r.result.kpis()),
            OrTwinDocument::Gantt => Report::Gantt(r.result.gantt()),
            OrTwinDocument::Report => r.result.report(),
        };
        give_string(out, export_report(report, format))
    })
}

/// # Safety
/// `result` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn or_twin_result_free(result: *mut OrTwinResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Evaluates a what-if insertion given as JSON
/// (`arrival_time`, `preoperative_minutes`, `phases`, `strategy`) and
/// writes the canonical response JSON. The scenario is not modified.
///
/// # Safety
/// `scenario` is a live handle; `request_json` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn or_twin_whatif(
    scenario: *const OrTwinScenario,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> OrTwinStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let request: WhatIfRequest = serde_json::from_str(text(request_json, "request_json")?)
            .map_err(|e| Failure(OrTwinStatus::ParseError, format!("request: {e}")))?;
        let b = &s.bundle;
        let outcome = what_if(&b.scenario, &b.options, &b.targets, &request)?;
        give_string(out, export_report(Report::WhatIf(&outcome), ExportFormat::Json))
    })
}
