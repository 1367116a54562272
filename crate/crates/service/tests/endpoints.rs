use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures::StreamExt;
use http_body_util::BodyExt;
use ric_core::campaign::{FeedLine, LiveSession, Trained};
use ric_core::netsim::Simulator;
use ric_core::orchestrator::{hrl_episode, parse_intent, HrlMode, Orchestrator, ScheduledIntent};
use ric_core::xapps::XAppSuite;
use ric_core::ScenarioConfig;
use ric_service::{router, spawn_session, ErrorBody, IntentAccepted, LoopOptions, SessionHandle, StatusSnapshot};
use serde_json::json;
use tower::ServiceExt;

const SEED: u64 = 7;

fn small_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.ue_count = 20;
    cfg
}

fn untrained(cfg: &ScenarioConfig) -> Trained {
    let sim = Simulator::new(cfg, SEED, 0).unwrap();
    Trained { suite: XAppSuite::new(cfg, &sim, SEED).unwrap(), orchestrator: Orchestrator::new(cfg, SEED).unwrap() }
}

fn start(slots_per_second: f64, start_paused: bool) -> (SessionHandle, Router) {
    let cfg = small_config();
    let session = LiveSession::new(&cfg, SEED, untrained(&cfg)).unwrap();
    let (handle, _join) = spawn_session(session, LoopOptions { slots_per_second, start_paused, feed_capacity: 1 << 16 });
    let app = router(handle.clone());
    (handle, app)
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn status(app: &Router) -> StatusSnapshot {
    let (code, body) = send(app, "GET", "/status", None).await;
    assert_eq!(code, StatusCode::OK);
    serde_json::from_slice(&body).unwrap()
}

async fn wait_for_slot(app: &Router, slot: u64) {
    for _ in 0..2000 {
        if status(app).await.status.slot >= slot {
            return;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("session never reached slot {slot}");
}

#[tokio::test]
async fn accepted_intent_shows_up_in_next_status() {
    let (_h, app) = start(2000.0, false);
    wait_for_slot(&app, 60).await;
    let (code, body) = send(&app, "POST", "/intent", Some(json!({"text": "increase throughput by 5%"}))).await;
    assert_eq!(code, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let accepted: IntentAccepted = serde_json::from_slice(&body).unwrap();
    assert_eq!(accepted.intent_id, 1);

    let st = status(&app).await;
    let goal = st.status.goal.expect("goal visible after acceptance");
    assert_eq!(goal.intent_id, 1);
    assert!((goal.target_value - goal.baseline_value * 1.05).abs() <= 1e-12 * goal.target_value);
    assert_eq!(st.status.intent.as_deref(), Some("increase throughput by 5%"));
}

#[tokio::test]
async fn malformed_intent_is_rejected_at_first_token() {
    let (_h, app) = start(2000.0, false);
    let (code, body) = send(&app, "POST", "/intent", Some(json!({"text": "make it faster"}))).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    let err: ErrorBody = serde_json::from_slice(&body).unwrap();
    assert_eq!(err.token, Some(1));
    assert_eq!(err.offset, Some(0));
    assert!(err.hint.unwrap().contains("increase|decrease"));
}

#[tokio::test]
async fn unsupported_direction_is_a_bad_request() {
    let (_h, app) = start(2000.0, false);
    wait_for_slot(&app, 60).await;
    let (code, _) = send(&app, "POST", "/intent", Some(json!({"text": "decrease throughput by 5%"}))).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn intent_before_warmup_conflicts() {
    // 20 slots/s leaves seconds before the 50-slot baseline window fills.
    let (_h, app) = start(20.0, false);
    let (code, body) = send(&app, "POST", "/intent", Some(json!({"text": "increase throughput by 5%"}))).await;
    assert_eq!(code, StatusCode::CONFLICT);
    let err: ErrorBody = serde_json::from_slice(&body).unwrap();
    assert!(err.error.contains("KPI history"), "{}", err.error);
    assert!(status(&app).await.status.goal.is_none());
}

#[tokio::test]
async fn intent_while_paused_conflicts_and_resume_recovers() {
    let (_h, app) = start(2000.0, false);
    wait_for_slot(&app, 60).await;
    let (code, body) = send(&app, "POST", "/control/pause", None).await;
    assert_eq!(code, StatusCode::OK);
    let st: StatusSnapshot = serde_json::from_slice(&body).unwrap();
    assert!(st.paused);

    let (code, _) = send(&app, "POST", "/intent", Some(json!({"text": "increase energy efficiency by 10%"}))).await;
    assert_eq!(code, StatusCode::CONFLICT);
    let frozen = status(&app).await.status.slot;
    tokio::time::sleep(Duration::from_millis(50)).await;
    assert_eq!(status(&app).await.status.slot, frozen);

    send(&app, "POST", "/control/resume", None).await;
    let (code, _) = send(&app, "POST", "/intent", Some(json!({"text": "increase energy efficiency by 10%"}))).await;
    assert_eq!(code, StatusCode::OK);
    wait_for_slot(&app, frozen + 5).await;
}

#[tokio::test]
async fn reset_restarts_the_clock_in_a_new_epoch() {
    let (_h, app) = start(2000.0, false);
    wait_for_slot(&app, 60).await;
    send(&app, "POST", "/intent", Some(json!({"text": "increase throughput by 5%"}))).await;
    send(&app, "POST", "/control/pause", None).await;
    let (code, body) = send(&app, "POST", "/control/reset", None).await;
    assert_eq!(code, StatusCode::OK);
    let st: StatusSnapshot = serde_json::from_slice(&body).unwrap();
    assert_eq!(st.epoch, 1);
    assert_eq!(st.status.slot, 0);
    assert!(st.status.goal.is_none());
}

#[tokio::test]
async fn unknown_control_is_not_found() {
    let (_h, app) = start(2000.0, true);
    let (code, _) = send(&app, "POST", "/control/explode", None).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
}

async fn read_lines(app: &Router, n: usize) -> Vec<FeedLine> {
    let req = Request::builder().uri("/kpis/stream").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "application/x-ndjson");
    let mut stream = resp.into_body().into_data_stream();
    let mut buf = Vec::new();
    let mut lines = Vec::new();
    while lines.len() < n {
        let chunk = stream.next().await.expect("stream open").unwrap();
        buf.extend_from_slice(&chunk);
        while let Some(pos) = buf.iter().position(|b| *b == b'\n') {
            let line: Vec<u8> = buf.drain(..=pos).collect();
            lines.push(serde_json::from_slice(&line[..line.len() - 1]).unwrap());
        }
    }
    lines.truncate(n);
    lines
}

#[tokio::test]
async fn stream_emits_one_line_per_slot_in_order() {
    let (_h, app) = start(0.0, true);
    let reader = {
        let app = app.clone();
        tokio::spawn(async move { read_lines(&app, 120).await })
    };
    // Let the subscriber attach before any slot runs.
    tokio::time::sleep(Duration::from_millis(50)).await;
    send(&app, "POST", "/control/resume", None).await;
    let lines = reader.await.unwrap();
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l.slot, i as u64 + 1);
        assert_eq!(l.kpis.slot, l.slot);
        assert_eq!(l.epoch, 0);
    }
}

#[tokio::test]
async fn live_log_matches_batch_episode_with_same_timeline() {
    let (_h, app) = start(0.0, true);
    let reader = {
        let app = app.clone();
        tokio::spawn(async move { read_lines(&app, 200).await })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    send(&app, "POST", "/control/resume", None).await;
    wait_for_slot(&app, 70).await;
    let (code, _) = send(&app, "POST", "/intent", Some(json!({"text": "increase throughput by 5%"}))).await;
    assert_eq!(code, StatusCode::OK);
    let issued = status(&app).await.status.goal.unwrap().issued_slot;
    let live = reader.await.unwrap();

    let cfg = small_config();
    let trained = untrained(&cfg);
    let mut sim = Simulator::new(&cfg, SEED, 0).unwrap();
    sim.reset(ric_core::campaign::EVAL_EPISODE);
    let (mut suite, mut orch) = (trained.suite.clone(), trained.orchestrator.clone());
    let intents = [ScheduledIntent { slot: issued, intent: parse_intent("increase throughput by 5%", issued).unwrap() }];
    let batch = hrl_episode(&mut sim, &mut suite, &mut orch, &intents, live.len(), HrlMode::evaluate()).unwrap();
    let live_rows: Vec<_> = live.iter().map(FeedLine::log_row).collect();
    assert_eq!(live_rows.len(), batch.kpis.len());
    if let Some(i) = (0..live_rows.len()).find(|&i| live_rows[i] != batch.kpis[i]) {
        panic!("first divergence at row {i} (intent at slot {issued}):\nlive  {:?}\nbatch {:?}", live_rows[i], batch.kpis[i]);
    }
}
