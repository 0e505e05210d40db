use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use ckb_core::journal::JournalStore;
use ckb_core::seed::seed_kb;
use ckb_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    let state = AppState::open(seed_kb().unwrap(), JournalStore::open(dir).unwrap()).unwrap();
    router(Arc::new(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, json)
}

async fn start(app: &Router, goal: &str, id: &str) {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({"goal": goal, "session_id": id}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["session_id"], id);
}

async fn answer(app: &Router, id: &str, q: &str, v: Value) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/answers"), Some(json!({"question_id": q, "value": v}))).await
}

#[tokio::test]
async fn health_reports_kb_hash() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = call(&app(dir.path()), "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["kb_hash"], seed_kb().unwrap().fingerprint());
}

#[tokio::test]
async fn dpo_interview_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    start(&app, "art39.training_required", "dpo").await;

    let mut asked = Vec::new();
    loop {
        let (status, step) = call(&app, "GET", "/sessions/dpo/next", None).await;
        assert_eq!(status, StatusCode::OK);
        if step["status"] == "concluded" {
            assert_eq!(step["verdict"]["value"], "fails");
            break;
        }
        let q = step["question"]["id"].as_str().unwrap().to_string();
        let (status, _) = answer(&app, "dpo", &q, json!(false)).await;
        assert_eq!(status, StatusCode::OK);
        asked.push(q);
    }
    assert_eq!(asked.len(), 3);
    assert!(asked.iter().all(|q| q.starts_with("dpo.")), "{asked:?}");

    let (status, verdict) = call(&app, "GET", "/sessions/dpo/verdict", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(verdict["goal"], "art39.training_required");

    let (status, trace) = call(&app, "GET", "/sessions/dpo/explanation?level=full", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(trace["level"], "full");
    assert!(trace["steps"].as_array().unwrap().len() >= 2);

    let (status, redacted) = call(&app, "GET", "/sessions/dpo/explanation?level=redacted", None).await;
    assert_eq!(status, StatusCode::OK);
    let text = redacted.to_string();
    assert!(!text.contains("dpo.public_authority"), "{text}");

    let (status, doc) = call(&app, "GET", "/sessions/dpo/explanation?pattern=art39.training", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["legal_claim"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn answer_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    start(&app, "art39.training_required", "s1").await;

    let (status, body) = answer(&app, "s1", "dpo.public_authority", json!("maybe")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "type_mismatch");

    let (status, _) = answer(&app, "s1", "no.such_question", json!(true)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = answer(&app, "nope", "dpo.public_authority", json!(true)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = answer(&app, "s1", "sec.encryption", json!(true)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = answer(&app, "s1", "dpo.public_authority", json!(true)).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = answer(&app, "s1", "dpo.public_authority", json!(false)).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // No rule is determined before the first answer.
    start(&app, "dpo.required", "s2").await;
    let (status, _) = call(&app, "GET", "/sessions/s2/explanation", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "GET", "/sessions/s2/explanation?level=secret", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"goal": "no.such_goal"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{body}");
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"goal": "dpo.required", "session_id": "s2"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) =
        call(&app, "POST", "/sessions", Some(json!({"goal": "dpo.required", "session_id": "../x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"target": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid_request");
}

#[tokio::test]
async fn concluded_session_rejects_answers() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    start(&app, "dpo.required", "c").await;
    let (_, status) = answer(&app, "c", "dpo.public_authority", json!(true)).await;
    assert_eq!(status["status"], "concluded");
    let (status, _) = answer(&app, "c", "dpo.large_scale_monitoring", json!(true)).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn exceptions_do_not_change_answers() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    start(&app, "art39.training_compliant", "x").await;
    answer(&app, "x", "org.eu_business", json!(true)).await;
    answer(&app, "x", "dpo.public_authority", json!(false)).await;

    let req = json!({"pattern_id": "art39.training", "exception_id": "dpo_not_required"});
    let (status, result) = call(&app, "POST", "/sessions/x/exceptions", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result["outcome"], "undetermined");

    let (_, verdict) = call(&app, "GET", "/sessions/x/verdict", None).await;
    assert_eq!(verdict["value"], "unknown");
    let (_, step) = call(&app, "GET", "/sessions/x/next", None).await;
    assert_eq!(step["question"]["id"], "dpo.large_scale_monitoring");

    let bad = json!({"pattern_id": "art39.training", "exception_id": "nope"});
    let (status, _) = call(&app, "POST", "/sessions/x/exceptions", Some(bad)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let before = {
        let app = app(dir.path());
        start(&app, "art39.training_required", "r").await;
        answer(&app, "r", "dpo.public_authority", json!(false)).await;
        let req = json!({"pattern_id": "art39.training", "exception_id": "dpo_not_required"});
        call(&app, "POST", "/sessions/r/exceptions", Some(req)).await;
        answer(&app, "r", "dpo.large_scale_monitoring", json!(false)).await;
        call(&app, "GET", "/sessions/r/verdict", None).await.1
    };
    let app = app(dir.path());
    let (status, after) = call(&app, "GET", "/sessions/r/verdict", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, before);
    let (_, step) = call(&app, "GET", "/sessions/r/next", None).await;
    assert_eq!(step["question"]["id"], "dpo.special_category_processing");
}

#[tokio::test]
async fn journal_for_another_kb_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    {
        let app = app(dir.path());
        start(&app, "dpo.required", "old").await;
    }
    let other = ckb_core::parse_kb("ckb 1\nquestion a: boolean\n  text \"A?\"\nrule r: if a\ngoal r\n").unwrap();
    let state = AppState::open(other, JournalStore::open(dir.path()).unwrap()).unwrap();
    let app = router(Arc::new(state));
    let (status, body) = call(&app, "GET", "/sessions/old/verdict", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["message"].as_str().unwrap().contains("migrate"), "{body}");
}

#[tokio::test]
async fn validate_endpoint_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, report) =
        call(&app, "POST", "/kb/validate", Some(json!({"source": ckb_core::seed::SEED_KB_TEXT}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["diagnostics"], json!([]));

    let broken = "ckb 1\nrule r: if a\n";
    let (status, report) = call(&app, "POST", "/kb/validate", Some(json!({"source": broken, "file": "b.ckb"}))).await;
    assert_eq!(status, StatusCode::OK);
    let diags = report["diagnostics"].as_array().unwrap();
    assert!(!diags.is_empty());
    assert!(diags.iter().all(|d| d["severity"] == "error"));
}

#[tokio::test]
async fn breach_assessment_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let case = json!({
        "case_id": "B-1",
        "awareness_time": "2018-05-25T00:00:00Z",
        "now": "2018-05-26T00:00:00Z",
        "facts": {
            "breach.personal_data": true,
            "breach.destruction": false,
            "breach.loss": false,
            "breach.alteration": false,
            "breach.disclosure": true,
            "breach.access": true,
            "breach.cause": "unlawful",
            "breach.encrypted": false,
            "breach.special_category": true,
            "breach.subject_count": 1200
        }
    });
    let (status, a) = call(&app, "POST", "/breach-assessments", Some(case.clone())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    assert_eq!(a["outcome"], "decided");
    assert_eq!(a["notify_required"], true);
    assert_eq!(a["deadline"], "2018-05-28T00:00:00Z");
    assert_eq!(a["late_reasons_required"], false);

    let mut partial = case.clone();
    partial["facts"].as_object_mut().unwrap().remove("breach.subject_count");
    partial["facts"]["breach.special_category"] = json!(false);
    let (status, a) = call(&app, "POST", "/breach-assessments", Some(partial)).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    assert_eq!(a["outcome"], "needs_more_facts");

    let mut bad = case.clone();
    bad["facts"]["breach.subject_count"] = json!("many");
    let (status, _) = call(&app, "POST", "/breach-assessments", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut missing = case;
    missing["facts"].as_object_mut().unwrap().remove("breach.cause");
    let (status, body) = call(&app, "POST", "/breach-assessments", Some(missing)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["message"].as_str().unwrap().contains("breach.cause"));
}

#[tokio::test]
async fn disclosure_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let meta = json!({
        "model_name": "Credit screen",
        "data_sources": ["application form"],
        "method": "weighted rules",
        "feature_count": 5,
        "decisions_made": ["refer application for manual review"],
        "false_positive_consequence": "a sound applicant waits longer",
        "omission_consequence": "a risky loan is granted",
        "benefits": ["faster decisions"],
        "downsides": ["manual review takes longer"]
    });
    let (status, doc) = call(&app, "POST", "/disclosures", Some(meta.clone())).await;
    assert_eq!(status, StatusCode::OK, "{doc}");
    assert_eq!(doc["model_name"], "Credit screen");
    assert_eq!(doc["technical_description"]["feature_count"], 5);

    let mut incomplete = meta;
    incomplete.as_object_mut().unwrap().remove("method");
    let (status, _) = call(&app, "POST", "/disclosures", Some(incomplete)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
