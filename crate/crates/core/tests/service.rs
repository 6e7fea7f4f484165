mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use or_twin::io::{export_report, ExportFormat, Report, ScenarioBundle};
use or_twin::runs::{execute, RunMode};
use or_twin::service::{effective_config, router, AppState, RunRecord, RunStatus, DATA_DIR_ENV, LISTEN_ENV};
use or_twin::sim::{simulate, SimOptions};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    etag: Option<String>,
    body: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<String>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let etag = resp
        .headers()
        .get(header::ETAG)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        etag,
        body: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

fn plan() -> ScenarioBundle {
    common::project("overtime_day", "plan.json").bundle
}

fn performed() -> ScenarioBundle {
    common::project("overtime_day", "config.json").bundle
}

async fn with_scenario(bundle: &ScenarioBundle) -> (tempfile::TempDir, Arc<AppState>) {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::open(dir.path()).unwrap();
    let reply = call(&state, "POST", "/scenarios", Some(bundle.to_json())).await;
    assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.body);
    (dir, state)
}

async fn finished_run(state: &Arc<AppState>, scenario: &str, request: Value) -> RunRecord {
    let reply = call(
        state,
        "POST",
        &format!("/scenarios/{scenario}/runs"),
        Some(request.to_string()),
    )
    .await;
    assert_eq!(reply.status, StatusCode::ACCEPTED, "{}", reply.body);
    let run_id = reply.json()["run_id"].as_str().unwrap().to_string();
    for _ in 0..600 {
        let reply = call(state, "GET", &format!("/runs/{run_id}"), None).await;
        assert_eq!(reply.status, StatusCode::OK);
        let record: RunRecord = serde_json::from_str(&reply.body).unwrap();
        if matches!(record.status, RunStatus::Done | RunStatus::Failed) {
            return record;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run {run_id} did not finish");
}

#[tokio::test]
async fn scenarios_are_created_once_and_read_back() {
    let bundle = plan();
    let id = bundle.scenario.scenario_id.clone();
    let (_dir, state) = with_scenario(&bundle).await;

    let again = call(&state, "POST", "/scenarios", Some(bundle.to_json())).await;
    assert_eq!(again.status, StatusCode::CONFLICT);

    let got = call(&state, "GET", &format!("/scenarios/{id}"), None).await;
    assert_eq!(got.status, StatusCode::OK);
    assert_eq!(got.etag.as_deref(), Some("\"1\""));
    assert_eq!(serde_json::from_str::<ScenarioBundle>(&got.body).unwrap(), bundle);

    assert_eq!(
        call(&state, "GET", "/scenarios/nope", None).await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&state, "GET", "/scenarios/..%2Fetc", None).await.status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn invalid_and_malformed_bundles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::open(dir.path()).unwrap();

    let malformed = call(&state, "POST", "/scenarios", Some("{\"format_version\":".into())).await;
    assert_eq!(malformed.status, StatusCode::BAD_REQUEST);

    let mut bundle = plan();
    bundle.scenario.cases[1].sequence_index = Some(7);
    let invalid = call(&state, "POST", "/scenarios", Some(bundle.to_json())).await;
    assert_eq!(invalid.status, StatusCode::UNPROCESSABLE_ENTITY);
    let body = invalid.json();
    assert_eq!(body["code"], "VALIDATION_FAILED");
    assert!(!body["violations"].as_array().unwrap().is_empty());
    assert_eq!(body["violations"][0]["kind"], "SEQUENCE_GAP");
}

#[tokio::test]
async fn simulate_runs_are_reproducible() {
    let bundle = plan();
    let id = bundle.scenario.scenario_id.clone();
    let (_dir, state) = with_scenario(&bundle).await;

    let request = json!({"mode": "simulate", "seed": 7, "replications": 5, "duration_mode": "stochastic"});
    let a = finished_run(&state, &id, request.clone()).await;
    let b = finished_run(&state, &id, request).await;
    assert_eq!(a.status, RunStatus::Done);
    assert_eq!(a.options.base_seed, 7);
    assert_ne!(a.run_id, b.run_id);

    let kpis_a = call(&state, "GET", &format!("/runs/{}/kpis", a.run_id), None).await;
    let kpis_b = call(&state, "GET", &format!("/runs/{}/kpis", b.run_id), None).await;
    assert_eq!(kpis_a.status, StatusCode::OK);
    assert_eq!(kpis_a.body, kpis_b.body);

    let mut direct = bundle.clone();
    direct.options = a.options.clone();
    let expected = execute(&direct, RunMode::Simulate).unwrap();
    assert_eq!(
        kpis_a.body,
        export_report(Report::Kpi(expected.kpis()), ExportFormat::Json)
    );

    let gantt = call(&state, "GET", &format!("/runs/{}/gantt", a.run_id), None).await;
    assert_eq!(
        gantt.body,
        export_report(Report::Gantt(expected.gantt()), ExportFormat::Json)
    );
    let csv = call(&state, "GET", &format!("/runs/{}/gantt?format=csv", a.run_id), None).await;
    assert!(csv
        .body
        .starts_with("room_id,state,start,end,case_id,non_elective_flag\n"));
    let report = call(&state, "GET", &format!("/runs/{}/report", a.run_id), None).await;
    assert_eq!(report.json()["n"], 5);
    let bad = call(&state, "GET", &format!("/runs/{}/report?format=xml", a.run_id), None).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pipeline_runs_complete() {
    let plan = plan();
    let (_dir, state) = with_scenario(&plan).await;
    let run = finished_run(
        &state,
        &plan.scenario.scenario_id,
        json!({"mode": "prospective", "replications": 20}),
    )
    .await;
    assert_eq!(run.status, RunStatus::Done, "{:?}", run.error);
    let report = call(&state, "GET", &format!("/runs/{}/report", run.run_id), None)
        .await
        .json();
    assert_eq!(report["step3"]["n"], 20);
    assert!(report["verdicts"]["feasible"].as_bool().unwrap());

    let done = performed();
    let reply = call(&state, "POST", "/scenarios", Some(done.to_json())).await;
    assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.body);
    let run = finished_run(&state, &done.scenario.scenario_id, json!({"mode": "retrospective"})).await;
    assert_eq!(run.status, RunStatus::Done, "{:?}", run.error);
    let report = call(&state, "GET", &format!("/runs/{}/report", run.run_id), None)
        .await
        .json();
    let changes: Vec<&str> = report["step3"]["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["change"].as_str().unwrap())
        .collect();
    assert_eq!(changes, ["ADDED", "ADDED"]);
}

#[tokio::test]
async fn failing_pending_and_unknown_runs() {
    let plan = plan();
    let id = plan.scenario.scenario_id.clone();
    let (_dir, state) = with_scenario(&plan).await;

    assert_eq!(
        call(&state, "GET", "/runs/run-999999", None).await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&state, "GET", "/runs/run-999999/kpis", None).await.status,
        StatusCode::NOT_FOUND
    );
    let unknown = call(
        &state,
        "POST",
        "/scenarios/nope/runs",
        Some(json!({"mode": "simulate"}).to_string()),
    )
    .await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);
    let bad_mode = call(
        &state,
        "POST",
        &format!("/scenarios/{id}/runs"),
        Some(json!({"mode": "replay"}).to_string()),
    )
    .await;
    assert_eq!(bad_mode.status, StatusCode::BAD_REQUEST);
    let zero = call(
        &state,
        "POST",
        &format!("/scenarios/{id}/runs"),
        Some(json!({"mode": "simulate", "replications": 0}).to_string()),
    )
    .await;
    assert_eq!(zero.status, StatusCode::UNPROCESSABLE_ENTITY);

    let failed = finished_run(&state, &id, json!({"mode": "retrospective"})).await;
    assert_eq!(failed.status, RunStatus::Failed);
    assert!(failed.error.as_deref().unwrap().starts_with("PRECONDITION_FAILED"));
    let doc = call(&state, "GET", &format!("/runs/{}/kpis", failed.run_id), None).await;
    assert_eq!(doc.status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut pending = failed.clone();
    pending.run_id = "run-000500".into();
    pending.status = RunStatus::Pending;
    pending.error = None;
    state.store().put_run(&pending).unwrap();
    let doc = call(&state, "GET", "/runs/run-000500/report", None).await;
    assert_eq!(doc.status, StatusCode::CONFLICT);

    // A restart fails interrupted runs and numbers new ones after them.
    let reopened = AppState::open(state.store().root()).unwrap();
    let record: RunRecord = serde_json::from_str(&call(&reopened, "GET", "/runs/run-000500", None).await.body).unwrap();
    assert_eq!(record.status, RunStatus::Failed);
    let next = call(
        &reopened,
        "POST",
        &format!("/scenarios/{id}/runs"),
        Some(json!({"mode": "simulate"}).to_string()),
    )
    .await;
    assert_eq!(next.json()["run_id"], "run-000501");
}

fn whatif_body(arrival: &str, preop: f64, strategy: &str) -> String {
    json!({
        "arrival_time": arrival,
        "preoperative_minutes": preop,
        "phases": {
            "setup_with_anesth": {"kind": "deterministic", "p1": 10.0},
            "setup_without_anesth": {"kind": "deterministic", "p1": 5.0},
            "procedure": {"kind": "deterministic", "p1": 60.0},
            "reversal": {"kind": "deterministic", "p1": 15.0}
        },
        "strategy": strategy
    })
    .to_string()
}

#[tokio::test]
async fn whatif_first_fit_takes_the_lowest_idle_room() {
    let plan = plan();
    let id = plan.scenario.scenario_id.clone();
    let (_dir, state) = with_scenario(&plan).await;

    let trace = simulate(&plan.scenario, &SimOptions::provisional(), 0).unwrap();
    let ready = 14.0 * 60.0 + 45.0;
    let idle = plan
        .scenario
        .rooms
        .iter()
        .find(|room| {
            trace
                .outcomes
                .iter()
                .filter(|o| o.room_id == room.room_id)
                .all(|o| o.end_time.minutes() <= ready)
        })
        .unwrap();

    let reply = call(
        &state,
        "POST",
        &format!("/scenarios/{id}/whatif"),
        Some(whatif_body("14:15", 30.0, "first_fit")),
    )
    .await;
    assert_eq!(reply.status, StatusCode::OK, "{}", reply.body);
    let body = reply.json();
    assert_eq!(body["chosen_room"], idle.room_id.as_str());
    assert_eq!(body["start_time"], "14:45");
    assert!(body["gantt_after"].as_array().unwrap().len() > body["kpi_after"]["per_room"].as_array().unwrap().len());
}

#[tokio::test]
async fn whatif_best_fit_matches_worst_fit_without_slack() {
    let plan = plan();
    let id = plan.scenario.scenario_id.clone();
    let (_dir, state) = with_scenario(&plan).await;
    let uri = format!("/scenarios/{id}/whatif");
    let best = call(&state, "POST", &uri, Some(whatif_body("16:30", 60.0, "best_fit"))).await;
    let worst = call(&state, "POST", &uri, Some(whatif_body("16:30", 60.0, "worst_fit"))).await;
    assert_eq!(best.status, StatusCode::OK, "{}", best.body);
    assert_eq!(best.body, worst.body);
    let again = call(&state, "POST", &uri, Some(whatif_body("16:30", 60.0, "best_fit"))).await;
    assert_eq!(again.body, best.body);

    // Stateless: the stored scenario is unchanged.
    let got = call(&state, "GET", &format!("/scenarios/{id}"), None).await;
    assert_eq!(got.etag.as_deref(), Some("\"1\""));

    let bad = call(&state, "POST", &uri, Some(whatif_body("16:30", -5.0, "best_fit"))).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    let malformed = call(&state, "POST", &uri, Some(whatif_body("16h30", 5.0, "best_fit"))).await;
    assert_eq!(malformed.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn commit_appends_the_case_last_in_its_room() {
    let plan = plan();
    let id = plan.scenario.scenario_id.clone();
    let (_dir, state) = with_scenario(&plan).await;
    let uri = format!("/scenarios/{id}/whatif/commit");
    let mut body: Value = serde_json::from_str(&whatif_body("11:00", 20.0, "first_fit")).unwrap();
    body["expected_version"] = json!(1);

    let reply = call(&state, "POST", &uri, Some(body.to_string())).await;
    assert_eq!(reply.status, StatusCode::OK, "{}", reply.body);
    let committed = reply.json();
    assert_eq!(committed["version"], 2);
    assert_eq!(reply.etag.as_deref(), Some("\"2\""));
    let case_id = committed["case_id"].as_str().unwrap().to_string();
    let room = committed["chosen_room"].as_str().unwrap().to_string();

    let stale = call(&state, "POST", &uri, Some(body.to_string())).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);

    let stored: ScenarioBundle =
        serde_json::from_str(&call(&state, "GET", &format!("/scenarios/{id}"), None).await.body).unwrap();
    assert_eq!(stored.scenario.cases.len(), plan.scenario.cases.len() + 1);
    assert_eq!(stored.scenario.cases.last().unwrap().case_id, case_id);

    let mut options = stored.options.clone();
    options.strategy = or_twin::strategy::Strategy::FirstFit;
    let trace = simulate(
        &stored.scenario,
        &SimOptions {
            replications: 1,
            ..options
        },
        0,
    )
    .unwrap();
    let placed = trace.outcome(&case_id).unwrap();
    assert_eq!(placed.room_id, room);
    let last = trace
        .outcomes
        .iter()
        .filter(|o| o.room_id == room)
        .map(|o| o.start_time)
        .fold(placed.start_time, or_twin::TimePoint::max);
    assert_eq!(placed.start_time, last);

    body["expected_version"] = json!(2);
    let second = call(&state, "POST", &uri, Some(body.to_string())).await;
    assert_eq!(second.json()["version"], 3);
    assert_ne!(second.json()["case_id"], case_id.as_str());
}

#[test]
fn environment_overrides_the_listen_address() {
    let base = or_twin::io::ServiceConfig::default();
    std::env::set_var(LISTEN_ENV, "0.0.0.0:9999");
    std::env::set_var(DATA_DIR_ENV, "/srv/or");
    let eff = effective_config(&base);
    std::env::remove_var(LISTEN_ENV);
    std::env::remove_var(DATA_DIR_ENV);
    assert_eq!(eff.listen, "0.0.0.0:9999");
    assert_eq!(eff.data_dir, std::path::PathBuf::from("/srv/or"));
    assert_eq!(effective_config(&base), base);
}
