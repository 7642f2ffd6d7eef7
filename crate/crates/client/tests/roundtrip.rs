use ifm_client::{ClientError, IfmClient};
use ifm_core::analysis::DEFAULT_MAX_PATHS;
use ifm_core::casestudy::load_recruitment_model;
use ifm_core::reporting::{build_report, export_json, model_document, to_json};
use ifm_server::{serve, AppState};
use tokio::net::TcpListener;

async fn start() -> IfmClient {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(load_recruitment_model().unwrap(), DEFAULT_MAX_PATHS);
    tokio::spawn(serve(listener, state));
    IfmClient::new(&format!("http://{addr}/"))
}

#[tokio::test]
async fn relays_service_bytes() {
    let client = start().await;
    let m = load_recruitment_model().unwrap();
    assert_eq!(client.health().await.unwrap(), br#"{"status":"ok"}"#);
    assert_eq!(client.model().await.unwrap(), to_json(&model_document(&m)));
    let report = build_report(&m, Some("R0=with_r0"), DEFAULT_MAX_PATHS).unwrap();
    assert_eq!(
        client.assessments(Some("R0=with_r0")).await.unwrap(),
        export_json(&report)
    );
}

#[tokio::test]
async fn service_errors_carry_diagnostics() {
    let client = start().await;
    let err = client.whatif(&["bogus".to_string()]).await.unwrap_err();
    let ClientError::Status { status, .. } = &err else {
        panic!("{err}");
    };
    assert_eq!(status.as_u16(), 400);
    let diags = err.diagnostics();
    assert_eq!(diags[0], "invalid edits");
    assert!(diags.len() > 1);
}

#[tokio::test]
async fn unreachable_service() {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = IfmClient::new(&format!("http://{addr}"))
        .health()
        .await
        .unwrap_err();
    assert!(matches!(err, ClientError::Transport { .. }));
}
