use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ifm_core::analysis::{Edit, Verdict, DEFAULT_MAX_PATHS};
use ifm_core::casestudy::load_recruitment_model;
use ifm_core::reporting::{
    build_report, build_whatif, export_json, model_document, to_json, ErrorDocument, WhatIfDocument,
};
use ifm_server::{router, AppState};
use tower::ServiceExt;

fn app() -> axum::Router {
    router(AppState::new(
        load_recruitment_model().unwrap(),
        DEFAULT_MAX_PATHS,
    ))
}

async fn call(req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app().oneshot(req).await.unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(uri: &str) -> (StatusCode, Vec<u8>) {
    call(Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    call(
        Request::post(uri)
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap(),
    )
    .await
}

#[tokio::test]
async fn health() {
    let (status, body) = get("/api/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, br#"{"status":"ok"}"#);
}

#[tokio::test]
async fn model_matches_renderer() {
    let m = load_recruitment_model().unwrap();
    let (status, body) = get("/api/v1/model").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, to_json(&model_document(&m)));
}

#[tokio::test]
async fn assessments_match_renderer() {
    let m = load_recruitment_model().unwrap();
    let (status, body) = get("/api/v1/assessments").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        export_json(&build_report(&m, None, DEFAULT_MAX_PATHS).unwrap())
    );
    let (status, body) = get("/api/v1/assessments?config=R0%3Dabsent").await;
    assert_eq!(status, StatusCode::OK);
    let one = build_report(&m, Some("R0=absent"), DEFAULT_MAX_PATHS).unwrap();
    assert_eq!(body, export_json(&one));
    let (status, body) = get("/api/v1/assessments?config=all").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        export_json(&build_report(&m, None, DEFAULT_MAX_PATHS).unwrap())
    );
}

#[tokio::test]
async fn unknown_configuration_is_404() {
    let (status, body) = get("/api/v1/assessments?config=R0%3Dmaybe").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let doc: ErrorDocument = serde_json::from_slice(&body).unwrap();
    assert!(doc.error.contains("R0=maybe"));
}

#[tokio::test]
async fn whatif_flips_o1_semantic() {
    let body = r#"{"edits":["disable-mitigation:b1.normalize","disable-mitigation:b2.normalize"]}"#;
    let (status, bytes) = post("/api/v1/whatif", body).await;
    assert_eq!(status, StatusCode::OK);
    let doc: WhatIfDocument = serde_json::from_slice(&bytes).unwrap();
    let flipped: Vec<&str> = doc.delta.flipped_outcomes().into_iter().collect();
    assert_eq!(flipped, ["O1_semantic"]);
    for c in doc.delta.changes.iter().filter(|c| c.verdict_changed()) {
        assert_eq!(c.before, Some(Verdict::Conditional));
        assert_eq!(c.after, Some(Verdict::Open));
    }
    let m = load_recruitment_model().unwrap();
    let edits: Vec<Edit> = [
        "disable-mitigation:b1.normalize",
        "disable-mitigation:b2.normalize",
    ]
    .iter()
    .map(|e| e.parse().unwrap())
    .collect();
    assert_eq!(
        bytes,
        to_json(&build_whatif(&m, &edits, DEFAULT_MAX_PATHS).unwrap())
    );
}

#[tokio::test]
async fn empty_edits_give_empty_delta() {
    let (status, bytes) = post("/api/v1/whatif", r#"{"edits":[]}"#).await;
    assert_eq!(status, StatusCode::OK);
    let doc: WhatIfDocument = serde_json::from_slice(&bytes).unwrap();
    assert!(doc.delta.is_empty());
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    for body in ["", "{", r#"{"edit":[]}"#, r#"{"edits":"x"}"#] {
        let (status, bytes) = post("/api/v1/whatif", body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        let doc: ErrorDocument = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(doc.diagnostics.len(), 1);
    }
    let (status, bytes) = post(
        "/api/v1/whatif",
        r#"{"edits":["explode:b1","disable-channel:zz"]}"#,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let doc: ErrorDocument = serde_json::from_slice(&bytes).unwrap();
    assert!(!doc.diagnostics.is_empty());
}

#[tokio::test]
async fn unknown_route_is_404_json() {
    let (status, body) = get("/api/v2/model").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    serde_json::from_slice::<ErrorDocument>(&body).unwrap();
}
