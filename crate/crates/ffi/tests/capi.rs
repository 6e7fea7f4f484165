use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use or_twin::io::{export_report, load_project, ExportFormat, Report};
use or_twin::runs::{execute, RunMode};
use or_twin_ffi::*;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = or_twin_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

/// Takes ownership of a library string.
fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { or_twin_string_free(p) };
    s
}

fn load(rel: &str) -> *mut OrTwinScenario {
    let mut handle = ptr::null_mut();
    let path = cstr(&fixture(rel));
    assert_eq!(
        unsafe { or_twin_scenario_load(path.as_ptr(), &mut handle) },
        OrTwinStatus::Ok
    );
    assert!(or_twin_last_error().is_null());
    handle
}

#[test]
fn simulate_matches_the_core() {
    let handle = load("overtime_day/plan.json");
    unsafe {
        assert_eq!(or_twin_scenario_set_seed(handle, 7), OrTwinStatus::Ok);
        assert_eq!(or_twin_scenario_set_replications(handle, 20), OrTwinStatus::Ok);
    }
    let mut result = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_run(handle, OrTwinRunMode::Simulate, &mut result) },
        OrTwinStatus::Ok
    );

    let mut bundle = load_project(&fixture("overtime_day/plan.json")).unwrap().bundle;
    bundle.options.base_seed = 7;
    bundle.options.replications = 20;
    let direct = execute(&bundle, RunMode::Simulate).unwrap();

    let (mut u, mut o) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { or_twin_result_kpis(result, &mut u, &mut o) }, OrTwinStatus::Ok);
    assert_eq!((u, o), (direct.kpis().utilization, direct.kpis().overtime));

    for (doc, report) in [
        (OrTwinDocument::Kpis, Report::Kpi(direct.kpis())),
        (OrTwinDocument::Gantt, Report::Gantt(direct.gantt())),
        (OrTwinDocument::Report, direct.report()),
    ] {
        for (format, token) in [(ExportFormat::Json, "json"), (ExportFormat::Csv, "csv")] {
            let token = CString::new(token).unwrap();
            let mut out = ptr::null_mut();
            assert_eq!(
                unsafe { or_twin_result_export(result, doc, token.as_ptr(), &mut out) },
                OrTwinStatus::Ok
            );
            assert_eq!(take(out), export_report(report, format));
        }
    }
    unsafe {
        or_twin_result_free(result);
        or_twin_scenario_free(handle);
    }
}

#[test]
fn bundle_json_round_trips_through_handles() {
    let a = load("overtime_day/config.json");
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { or_twin_scenario_to_json(a, &mut json) }, OrTwinStatus::Ok);
    let text = take(json);

    let mut b = ptr::null_mut();
    let c = CString::new(text.clone()).unwrap();
    assert_eq!(
        unsafe { or_twin_scenario_from_json(c.as_ptr(), &mut b) },
        OrTwinStatus::Ok
    );
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { or_twin_scenario_to_json(b, &mut again) }, OrTwinStatus::Ok);
    assert_eq!(take(again), text);

    let mut result = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_run(b, OrTwinRunMode::Retrospective, &mut result) },
        OrTwinStatus::Ok
    );
    unsafe {
        or_twin_result_free(result);
        or_twin_scenario_free(a);
        or_twin_scenario_free(b);
    }
}

#[test]
fn tables_load_with_and_without_config() {
    let dir = fixture("open_slot");
    let (rooms, cases, durations) = (
        cstr(&dir.join("rooms.csv")),
        cstr(&dir.join("cases.csv")),
        cstr(&dir.join("durations.csv")),
    );
    let config = cstr(&dir.join("config.json"));
    for cfg in [config.as_ptr(), ptr::null()] {
        let mut handle = ptr::null_mut();
        let status = unsafe {
            or_twin_scenario_load_tables(rooms.as_ptr(), cases.as_ptr(), durations.as_ptr(), cfg, &mut handle)
        };
        assert_eq!(status, OrTwinStatus::Ok);
        unsafe { or_twin_scenario_free(handle) };
    }
}

#[test]
fn whatif_returns_the_canonical_outcome() {
    let handle = load("overtime_day/plan.json");
    let body = serde_json::json!({
        "arrival_time": "16:30",
        "preoperative_minutes": 60.0,
        "phases": {
            "setup_with_anesth": {"kind": "deterministic", "p1": 10.0},
            "setup_without_anesth": {"kind": "deterministic", "p1": 5.0},
            "procedure": {"kind": "deterministic", "p1": 60.0},
            "reversal": {"kind": "deterministic", "p1": 15.0}
        },
        "strategy": "best_fit"
    });
    let run = |strategy: &str| {
        let mut req = body.clone();
        req["strategy"] = strategy.into();
        let c = CString::new(req.to_string()).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            unsafe { or_twin_whatif(handle, c.as_ptr(), &mut out) },
            OrTwinStatus::Ok
        );
        take(out)
    };
    let best = run("best_fit");
    let doc: serde_json::Value = serde_json::from_str(&best).unwrap();
    assert_eq!(doc["case_id"], "WHATIF-1");
    assert_eq!(best, run("worst_fit"));
    assert_eq!(best, run("best_fit"));

    let bad = CString::new(body.to_string().replace("16:30", "16h30")).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_whatif(handle, bad.as_ptr(), &mut out) },
        OrTwinStatus::ParseError
    );
    assert!(out.is_null());
    unsafe { or_twin_scenario_free(handle) };
}

#[test]
fn failures_report_status_and_message() {
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_scenario_load(ptr::null(), &mut handle) },
        OrTwinStatus::NullArgument
    );
    assert!(last_error().contains("config_path"));

    let missing = CString::new("/nonexistent/config.json").unwrap();
    assert_eq!(
        unsafe { or_twin_scenario_load(missing.as_ptr(), &mut handle) },
        OrTwinStatus::IoError
    );
    assert!(handle.is_null());

    let junk = CString::new("{ not json").unwrap();
    assert_eq!(
        unsafe { or_twin_scenario_from_json(junk.as_ptr(), &mut handle) },
        OrTwinStatus::ParseError
    );

    let bytes = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { or_twin_scenario_from_json(bytes.as_ptr().cast(), &mut handle) },
        OrTwinStatus::InvalidUtf8
    );

    let plan = load("overtime_day/plan.json");
    let unknown = CString::new("random_fit").unwrap();
    assert_eq!(
        unsafe { or_twin_scenario_set_strategy(plan, unknown.as_ptr()) },
        OrTwinStatus::InvalidArgument
    );
    let ff = CString::new("first_fit").unwrap();
    assert_eq!(
        unsafe { or_twin_scenario_set_strategy(plan, ff.as_ptr()) },
        OrTwinStatus::Ok
    );
    assert!(or_twin_last_error().is_null());
    assert_eq!(
        unsafe { or_twin_scenario_set_replications(plan, 0) },
        OrTwinStatus::InvalidArgument
    );

    // plan.json is provisional; the retrospective needs a performed day.
    let mut result = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_run(plan, OrTwinRunMode::Retrospective, &mut result) },
        OrTwinStatus::DomainError
    );
    assert!(last_error().starts_with("PRECONDITION_FAILED"));
    assert!(result.is_null());
    assert_eq!(
        unsafe { or_twin_run(plan, OrTwinRunMode::Simulate, ptr::null_mut()) },
        OrTwinStatus::NullArgument
    );
    assert_eq!(
        unsafe { or_twin_run(ptr::null(), OrTwinRunMode::Simulate, &mut result) },
        OrTwinStatus::NullArgument
    );

    let xml = CString::new("xml").unwrap();
    assert_eq!(
        unsafe { or_twin_run(plan, OrTwinRunMode::Simulate, &mut result) },
        OrTwinStatus::Ok
    );
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_result_export(result, OrTwinDocument::Kpis, xml.as_ptr(), &mut out) },
        OrTwinStatus::UnsupportedFormat
    );
    unsafe {
        or_twin_result_free(result);
        or_twin_scenario_free(plan);
        or_twin_scenario_free(ptr::null_mut());
        or_twin_result_free(ptr::null_mut());
        or_twin_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { or_twin_scenario_load(ptr::null(), &mut handle) },
        OrTwinStatus::NullArgument
    );
    std::thread::spawn(|| assert!(or_twin_last_error().is_null()))
        .join()
        .unwrap();
    assert!(!or_twin_last_error().is_null());
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(or_twin_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/or_twin.h")
}

fn have(tool: &str) -> bool {
    Command::new(tool)
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have("cc") {
        eprintln!("no C compiler on PATH; header check skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        "#include \"or_twin.h\"\nint main(void) { return or_twin_last_error() != 0; }\n",
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let c = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-pedantic", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    if have("c++") {
        let cpp = Command::new("c++")
            .args(["-Wall", "-Werror", "-fsyntax-only", "-x", "c++", "-I"])
            .arg(&include)
            .arg(&src)
            .output()
            .unwrap();
        assert!(cpp.status.success(), "{}", String::from_utf8_lossy(&cpp.stderr));
    }
}

const PROGRAM: &str = r#"#include <stdio.h>
#include "or_twin.h"

int main(int argc, char **argv) {
    OrTwinScenario *s = NULL;
    OrTwinResult *r = NULL;
    char *kpis = NULL;
    double u = 0, o = 0;
    if (argc != 2) return 10;
    if (or_twin_scenario_load(argv[1], &s) != OR_TWIN_STATUS_OK) {
        fprintf(stderr, "%s\n", or_twin_last_error());
        return 11;
    }
    if (or_twin_scenario_set_replications(s, 3) != OR_TWIN_STATUS_OK) return 12;
    if (or_twin_run(s, OR_TWIN_RUN_MODE_SIMULATE, &r) != OR_TWIN_STATUS_OK) return 13;
    if (or_twin_result_kpis(r, &u, &o) != OR_TWIN_STATUS_OK) return 14;
    if (or_twin_result_export(r, OR_TWIN_DOCUMENT_KPIS, "json", &kpis) != OR_TWIN_STATUS_OK) return 15;
    if (or_twin_run(s, OR_TWIN_RUN_MODE_RETROSPECTIVE, &r) != OR_TWIN_STATUS_DOMAIN_ERROR) return 16;
    printf("%.6f %.6f\n%s\n", u, o, kpis);
    or_twin_string_free(kpis);
    or_twin_result_free(r);
    or_twin_scenario_free(s);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).unwrap().join("libor_twin_ffi.a");
    if !have("cc") || !lib.exists() {
        eprintln!("no C compiler or static library; link check skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let built = Command::new("cc")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));

    let plan = fixture("overtime_day/plan.json");
    let ran = Command::new(&bin).arg(&plan).output().unwrap();
    assert!(
        ran.status.success(),
        "exit {:?}: {}",
        ran.status.code(),
        String::from_utf8_lossy(&ran.stderr)
    );
    let stdout = String::from_utf8(ran.stdout).unwrap();

    let mut bundle = load_project(&plan).unwrap().bundle;
    bundle.options.replications = 3;
    let direct = execute(&bundle, RunMode::Simulate).unwrap();
    let k = direct.kpis();
    let expected = format!(
        "{:.6} {:.6}\n{}\n",
        k.utilization,
        k.overtime,
        export_report(Report::Kpi(k), ExportFormat::Json)
    );
    assert_eq!(stdout, expected);
}
