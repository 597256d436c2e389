// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use trainer_cli::server::{router, AppState};
use trainer_core::analytics::CohortReport;
use trainer_core::canonical;
use trainer_core::scenario::fixture::{verano, VERANO_ID};
use trainer_core::session::scripted_run;
use trainer_core::{Attempt, HintConfig, Mode, SessionRecord, Store};

struct Harness {
    _dir: tempfile::TempDir,
    store: Arc<Store>,
    app: Router,
}

fn harness(token: Option<&str>) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let app = router(AppState::new(Arc::clone(&store), token.map(str::to_owned)), None);
    Harness { _dir: dir, store, app }
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<String>,
    token: Option<&str>,
) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn record(id: &str, student: &str, group: &str, failing: &[&str]) -> SessionRecord {
    let failing: BTreeSet<String> = failing.iter().map(|s| s.to_string()).collect();
    let s = scripted_run(id, Arc::new(verano()), Mode::Examination, HintConfig::NONE, &failing).unwrap();
    SessionRecord::from_session(&s, Some(student.into()), Some(group.into())).unwrap()
}

#[tokio::test]
async fn ingest_fetch_duplicate_tamper() {
    let h = harness(None);
    let text = record("s-1", "alice", "VR", &[]).to_canonical_string();
    let (st, body) = call(&h.app, Method::POST, "/v1/sessions", Some(text.clone()), None).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["session_id"], "s-1");
    assert_eq!(v["score"], 100.0);

    let (st, body) = call(&h.app, Method::GET, "/v1/sessions/s-1", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["score_report"]["score"], 100.0);

    let (st, _) = call(&h.app, Method::POST, "/v1/sessions", Some(text), None).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let mut tampered = record("s-2", "bob", "VR", &["S3"]);
    assert_eq!(tampered.report.score, 97.0);
    tampered.report.score = 100.0;
    let (st, _) = call(&h.app, Method::POST, "/v1/sessions", Some(tampered.to_canonical_string()), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let (st, _) = call(&h.app, Method::POST, "/v1/sessions", Some("{not json".into()), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&h.app, Method::GET, "/v1/sessions/nope", None, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(h.store.len(), 1);
}

#[tokio::test]
async fn bearer_token_guards_teacher_endpoints() {
    let h = harness(Some("s3cret"));
    let text = record("s-1", "alice", "VR", &[]).to_canonical_string();
    let (st, _) = call(&h.app, Method::POST, "/v1/sessions", Some(text.clone()), None).await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);
    let (st, _) = call(&h.app, Method::POST, "/v1/sessions", Some(text.clone()), Some("wrong")).await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);
    let (st, _) = call(&h.app, Method::GET, "/v1/cohorts/VR/report", None, None).await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);
    let (st, _) = call(&h.app, Method::POST, "/v1/sessions", Some(text), Some("s3cret")).await;
    assert_eq!(st, StatusCode::CREATED);
    // scenario delivery stays open
    let (st, _) = call(&h.app, Method::GET, "/v1/scenarios", None, None).await;
    assert_eq!(st, StatusCode::OK);
}

#[tokio::test]
async fn cohort_report_matches_analytics() {
    let h = harness(None);
    for (i, failing) in [&[][..], &["S3"], &["S3", "S7"]].iter().enumerate() {
        let text = record(&format!("vr-{i}"), &format!("st-{i}"), "VR", failing).to_canonical_string();
        assert_eq!(call(&h.app, Method::POST, "/v1/sessions", Some(text), None).await.0, StatusCode::CREATED);
    }
    let uri = format!("/v1/cohorts/VR/report?scenario={VERANO_ID}");
    let (st, body) = call(&h.app, Method::GET, &uri, None, None).await;
    assert_eq!(st, StatusCode::OK);
    let expected = CohortReport::build(&h.store.query_cohort("VR", VERANO_ID).unwrap());
    assert_eq!(body, canonical::to_string(&expected).unwrap());
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["stage_correctness"][2]["rate"], 33.33);
    assert_eq!(v["size"], 3);

    let (_, again) = call(&h.app, Method::GET, &uri, None, None).await;
    assert_eq!(again, body);

    let (st, body) = call(&h.app, Method::GET, "/v1/cohorts/Nobody/report", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["size"], 0);

    let (st, text) = call(&h.app, Method::GET, "/v1/cohorts/VR/report?format=text", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(text.contains("Stage correctness rate"));
}

#[tokio::test]
async fn scenarios_are_served() {
    let h = harness(None);
    let (st, body) = call(&h.app, Method::GET, "/v1/scenarios", None, None).await;
    assert_eq!(st, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v[0]["id"], VERANO_ID);
    assert_eq!(v[0]["steps"], 15);
    let (st, body) = call(&h.app, Method::GET, &format!("/v1/scenarios/{VERANO_ID}"), None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body, trainer_core::scenario::fixture::VERANO_JSON);
    assert_eq!(call(&h.app, Method::GET, "/v1/scenarios/x", None, None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn live_training_session_shows_hints() {
    let h = harness(None);
    let start = json!({"session_id": "live-t", "mode": "training", "hints": "T3"}).to_string();
    let (st, body) = call(&h.app, Method::POST, "/v1/live", Some(start), None).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["hints"].as_array().unwrap().len(), 4);
    assert_eq!(v["candidates"], json!(["s1-disconnect-battery", "s1-drain-oil"]));

    let (_, body) = call(&h.app, Method::GET, "/v1/live/live-t/state", None, None).await;
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["progress"]["completed"], 0);

    let first = Attempt::correct_for(verano().step("s1-disconnect-battery").unwrap());
    let (st, body) =
        call(&h.app, Method::POST, "/v1/live/live-t/attempt", Some(serde_json::to_string(&first).unwrap()), None).await;
    assert_eq!(st, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["accepted"], true);
    assert_eq!(v["state"]["hints"][0]["step"], "s1-drain-oil");

    let dup = json!({"session_id": "live-t"}).to_string();
    assert_eq!(call(&h.app, Method::POST, "/v1/live", Some(dup), None).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&h.app, Method::GET, "/v1/live/none/state", None, None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn live_exam_session_is_silent_and_stored_on_finish() {
    let h = harness(None);
    let start = json!({"session_id": "live-e", "mode": "exam", "hints": "T3", "student_id": "carol", "group": "VR"});
    let (st, body) = call(&h.app, Method::POST, "/v1/live", Some(start.to_string()), None).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["hints"], json!([]));
    assert!(v.get("candidates").is_none());

    let sc = verano();
    for (i, step) in sc.steps.iter().enumerate() {
        let a = Attempt::correct_for(step).at(1000 * i as u64);
        let (st, body) =
            call(&h.app, Method::POST, "/v1/live/live-e/attempt", Some(serde_json::to_string(&a).unwrap()), None).await;
        assert_eq!(st, StatusCode::OK);
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["state"]["hints"], json!([]));
    }
    let (_, body) = call(&h.app, Method::GET, "/v1/live/live-e/state", None, None).await;
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["status"], "completed");
    assert_eq!(v["stored"], true);
    assert_eq!(v["report"]["score"], 100.0);

    let stored = h.store.get("live-e").unwrap().unwrap();
    assert_eq!(stored.student_id.as_deref(), Some("carol"));
    assert_eq!(h.store.query_cohort("VR", VERANO_ID).unwrap().len(), 1);

    let a = Attempt::correct_for(&sc.steps[0]);
    let (st, _) =
        call(&h.app, Method::POST, "/v1/live/live-e/attempt", Some(serde_json::to_string(&a).unwrap()), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
}

#[tokio::test]
async fn live_abandon_scores_zero() {
    let h = harness(None);
    let (st, _) = call(
        &h.app,
        Method::POST,
        "/v1/live",
        Some(json!({"session_id": "ab", "mode": "examination"}).to_string()),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::CREATED);
    let (st, body) = call(&h.app, Method::POST, "/v1/live/ab/abandon", None, None).await;
    assert_eq!(st, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["report"]["score"], 0.0);
    assert_eq!(v["stored"], true);
    assert_eq!(call(&h.app, Method::POST, "/v1/live/ab/abandon", None, None).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn static_ui_is_served() {
    let dir = tempfile::tempdir().unwrap();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<h1>trainer</h1>").unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let app = router(AppState::new(store, None), Some(ui.path().to_owned()));
    let (st, body) = call(&app, Method::GET, "/index.html", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(body.contains("trainer"));
}
