use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use wiener_service::{router, AppState};

fn app() -> Router {
    router(Arc::new(AppState::default()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn config() -> Value {
    json!({
        "schema_version": 1,
        "seed": 5,
        "replications": 2,
        "samples": 60,
        "scenario": { "example": "example2" },
        "estimator": { "gain_exponent": 0.85, "hessian_scale": 10.0 },
        "predictor": { "paths": 8 },
        "initialization": { "policy": "uniform", "spread": 0.5 }
    })
}

#[tokio::test]
async fn health_reports_ok() {
    let (status, body) = call(&app(), Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn experiment_returns_reports_and_summary() {
    let (status, body) = call(&app(), Method::POST, "/v1/experiments", Some(json!({ "config": config() }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let reports = body["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["rows"].as_array().unwrap().len(), 60);
    assert_eq!(body["summary"]["replications"], 2);
    assert_eq!(body["summary"]["parameters"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn overrides_change_the_run() {
    let req = json!({ "config": config(), "overrides": { "replications": 1, "baseline": true, "seed": 9 } });
    let (status, body) = call(&app(), Method::POST, "/v1/experiments", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["reports"].as_array().unwrap().len(), 1);
    assert_eq!(body["reports"][0]["param_names"], json!(["a", "b", "c", "alpha"]));
}

#[tokio::test]
async fn config_problems_are_config_errors() {
    let mut bad = config();
    bad["surprise"] = json!(1);
    let (status, body) = call(&app(), Method::POST, "/v1/experiments", Some(json!({ "config": bad }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["kind"], "config");

    let mut bad = config();
    bad["schema_version"] = json!(99);
    let (status, body) = call(&app(), Method::POST, "/v1/experiments", Some(json!({ "config": bad }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["kind"], "config");

    let (status, body) = call(&app(), Method::POST, "/v1/experiments", None).await;
    assert!(status.is_client_error());
    assert_eq!(body["kind"], "input");
}

#[tokio::test]
async fn summarize_round_trips_reports() {
    let app = app();
    let (_, run) = call(&app, Method::POST, "/v1/experiments", Some(json!({ "config": config() }))).await;
    let (status, summary) =
        call(&app, Method::POST, "/v1/summarize", Some(json!({ "reports": run["reports"] }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary, run["summary"]);
    let (status, body) = call(&app, Method::POST, "/v1/summarize", Some(json!({ "reports": [] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["kind"], "input");
}

#[tokio::test]
async fn oracle_cost_checks_dimension_and_feasibility() {
    let app = app();
    let req = json!({ "config": config(), "theta": [1.2, 0.27, 1.0, 0.1, 1.7] });
    let (status, body) = call(&app, Method::POST, "/v1/oracle/cost", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["cost"].as_f64().unwrap() > 0.0);
    assert_eq!(body["estimating_vector"].as_array().unwrap().len(), 5);
    assert_eq!(body["samples"], 60);

    let req = json!({ "config": config(), "theta": [1.2, 0.27, 1.0] });
    let (status, _) = call(&app, Method::POST, "/v1/oracle/cost", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let req = json!({ "config": config(), "theta": [-1.2, 0.27, 1.0, 0.1, 1.7] });
    let (status, body) = call(&app, Method::POST, "/v1/oracle/cost", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["kind"], "input");
}

#[tokio::test]
async fn datasets_are_reproducible() {
    let app = app();
    let req = json!({ "scenario": { "example": "example2", "disturbance": { "case": "case3" } }, "samples": 20, "seed": 4 });
    let (status, a) = call(&app, Method::POST, "/v1/datasets", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let (_, b) = call(&app, Method::POST, "/v1/datasets", Some(req)).await;
    assert_eq!(a, b);
    let records = a["records"].as_array().unwrap();
    assert_eq!(records.len(), 20);
    assert_eq!(records[0]["t_k"], 0.5);
}

#[tokio::test]
async fn session_lifecycle() {
    let app = app();
    let create = json!({ "config": config(), "theta0": [1.0, 0.3, 1.1, 0.1, 1.5] });
    let (status, info) = call(&app, Method::POST, "/v1/sessions", Some(create)).await;
    assert_eq!(status, StatusCode::CREATED, "{info}");
    let id = info["id"].as_str().unwrap().to_string();
    assert_eq!(info["samples_seen"], 0);

    let samples: Vec<Value> =
        (1..=5).map(|k| json!({ "t": 0.5 * k as f64, "u": if k % 2 == 0 { 5.0 } else { -5.0 }, "y": 0.3 })).collect();
    let (status, pushed) =
        call(&app, Method::POST, &format!("/v1/sessions/{id}/samples"), Some(json!({ "samples": samples }))).await;
    assert_eq!(status, StatusCode::OK, "{pushed}");
    assert_eq!(pushed["rows"].as_array().unwrap().len(), 5);
    assert_eq!(pushed["session"]["samples_seen"], 5);

    let stale = json!({ "samples": [{ "t": 1.0, "u": 0.0, "y": 0.0 }] });
    let (status, body) = call(&app, Method::POST, &format!("/v1/sessions/{id}/samples"), Some(stale)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");

    let (status, got) = call(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got["theta"], pushed["session"]["theta"]);

    let (status, _) = call(&app, Method::DELETE, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = call(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["kind"], "not_found");
}

#[tokio::test]
async fn session_streaming_matches_batch_identification() {
    let app = app();
    let mut cfg = config();
    cfg["replications"] = json!(1);
    let (_, run) = call(&app, Method::POST, "/v1/experiments", Some(json!({ "config": cfg.clone() }))).await;
    let (_, data) = call(
        &app,
        Method::POST,
        "/v1/datasets",
        Some(json!({ "scenario": { "example": "example2" }, "samples": 60, "seed": run["reports"][0]["seed"] })),
    )
    .await;
    let (_, info) = call(&app, Method::POST, "/v1/sessions", Some(json!({ "config": cfg }))).await;
    assert_eq!(info["theta0"], run["reports"][0]["theta0"]);
    let samples: Vec<Value> = data["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| json!({ "t": r["t_k"], "u": r["u_k"], "y": r["y_k"] }))
        .collect();
    let id = info["id"].as_str().unwrap();
    let (_, pushed) = call(&app, Method::POST, &format!("/v1/sessions/{id}/samples"), Some(json!({ "samples": samples }))).await;
    assert_eq!(pushed["rows"], run["reports"][0]["rows"]);
}
