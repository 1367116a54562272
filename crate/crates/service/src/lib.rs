//! Live control endpoint over a [`LiveSession`].
//!
//! The session runs on its own thread. HTTP handlers reach it through a
//! command queue and only ever read published snapshots.

use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ric_core::campaign::{FeedLine, LiveSession};
use ric_core::orchestrator::{OrchestratorStatus, GRAMMAR_HINT};
use ric_core::Error;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, oneshot, watch};

/// Published after every slot and every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSnapshot {
    pub epoch: u64,
    pub paused: bool,
    #[serde(flatten)]
    pub status: OrchestratorStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentAccepted {
    pub intent_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Pause,
    Resume,
    Reset,
}

#[derive(Debug)]
pub enum IntentRejection {
    Paused,
    Rejected(Error),
}

enum Command {
    Intent { text: String, reply: oneshot::Sender<Result<u64, IntentRejection>> },
    Control { control: Control, reply: oneshot::Sender<()> },
}

/// Cloneable access to a running session loop.
#[derive(Clone)]
pub struct SessionHandle {
    commands: mpsc::Sender<Command>,
    feed: broadcast::Sender<Arc<FeedLine>>,
    status: watch::Receiver<StatusSnapshot>,
}

impl SessionHandle {
    pub async fn submit_intent(&self, text: String) -> Result<u64, IntentRejection> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Intent { text, reply })
            .map_err(|_| IntentRejection::Rejected(Error::Domain("session stopped".into())))?;
        rx.await.unwrap_or(Err(IntentRejection::Rejected(Error::Domain("session stopped".into()))))
    }

    pub async fn control(&self, control: Control) -> bool {
        let (reply, rx) = oneshot::channel();
        self.commands.send(Command::Control { control, reply }).is_ok() && rx.await.is_ok()
    }

    pub fn status(&self) -> StatusSnapshot {
        self.status.borrow().clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<FeedLine>> {
        self.feed.subscribe()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoopOptions {
    /// 0 runs unthrottled.
    pub slots_per_second: f64,
    /// Start paused (slot 0, nothing simulated).
    pub start_paused: bool,
    pub feed_capacity: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self { slots_per_second: 20.0, start_paused: false, feed_capacity: 4096 }
    }
}

fn snapshot(session: &LiveSession, paused: bool) -> StatusSnapshot {
    StatusSnapshot { epoch: session.epoch(), paused, status: session.status() }
}

/// Starts the simulation thread. It exits once every handle is dropped or a
/// slot fails.
pub fn spawn_session(mut session: LiveSession, opts: LoopOptions) -> (SessionHandle, JoinHandle<ric_core::Result<()>>) {
    let (cmd_tx, cmd_rx) = mpsc::channel::<Command>();
    let (feed_tx, _) = broadcast::channel(opts.feed_capacity.max(1));
    let (status_tx, status_rx) = watch::channel(snapshot(&session, opts.start_paused));
    let handle = SessionHandle { commands: cmd_tx, feed: feed_tx.clone(), status: status_rx };
    let period = (opts.slots_per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / opts.slots_per_second));

    let join = std::thread::spawn(move || {
        let mut paused = opts.start_paused;
        let mut next_due = Instant::now();
        loop {
            let cmd = if paused {
                match cmd_rx.recv() {
                    Ok(c) => Some(c),
                    Err(_) => return Ok(()),
                }
            } else {
                let wait = period.map(|_| next_due.saturating_duration_since(Instant::now())).unwrap_or_default();
                match cmd_rx.recv_timeout(wait) {
                    Ok(c) => Some(c),
                    Err(mpsc::RecvTimeoutError::Timeout) => None,
                    Err(mpsc::RecvTimeoutError::Disconnected) => return Ok(()),
                }
            };
            if let Some(cmd) = cmd {
                match cmd {
                    Command::Intent { text, reply } => {
                        let r = if paused {
                            Err(IntentRejection::Paused)
                        } else {
                            session.submit(&text).map_err(IntentRejection::Rejected)
                        };
                        status_tx.send_replace(snapshot(&session, paused));
                        let _ = reply.send(r);
                    }
                    Command::Control { control, reply } => {
                        match control {
                            Control::Pause => paused = true,
                            Control::Resume => {
                                paused = false;
                                next_due = Instant::now();
                            }
                            Control::Reset => session.reset(),
                        }
                        status_tx.send_replace(snapshot(&session, paused));
                        let _ = reply.send(());
                    }
                }
                continue;
            }
            if let Some(p) = period {
                // No catch-up bursts after a stall.
                next_due = (next_due + p).max(Instant::now());
            }
            let line = session.step()?;
            status_tx.send_replace(snapshot(&session, paused));
            let _ = feed_tx.send(Arc::new(line));
        }
    });
    (handle, join)
}

fn error_response(status: StatusCode, err: &Error) -> Response {
    let body = match err {
        Error::IntentParse { token, offset, message } => ErrorBody {
            error: message.clone(),
            token: Some(*token),
            offset: Some(*offset),
            hint: Some(GRAMMAR_HINT.to_string()),
        },
        other => ErrorBody { error: other.to_string(), token: None, offset: None, hint: Some(GRAMMAR_HINT.to_string()) },
    };
    (status, Json(body)).into_response()
}

async fn post_intent(State(h): State<SessionHandle>, Json(req): Json<IntentRequest>) -> Response {
    match h.submit_intent(req.text).await {
        Ok(intent_id) => Json(IntentAccepted { intent_id }).into_response(),
        Err(IntentRejection::Paused) => (
            StatusCode::CONFLICT,
            Json(ErrorBody { error: "simulation paused".into(), token: None, offset: None, hint: None }),
        )
            .into_response(),
        Err(IntentRejection::Rejected(e @ Error::NoKpiHistory { .. })) => error_response(StatusCode::CONFLICT, &e),
        Err(IntentRejection::Rejected(e @ (Error::IntentParse { .. } | Error::Domain(_)))) => {
            error_response(StatusCode::BAD_REQUEST, &e)
        }
        Err(IntentRejection::Rejected(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e),
    }
}

async fn get_status(State(h): State<SessionHandle>) -> Json<StatusSnapshot> {
    Json(h.status())
}

async fn post_control(State(h): State<SessionHandle>, Path(action): Path<String>) -> Response {
    let control = match action.as_str() {
        "pause" => Control::Pause,
        "resume" => Control::Resume,
        "reset" => Control::Reset,
        _ => return (StatusCode::NOT_FOUND, format!("unknown control '{action}'")).into_response(),
    };
    if h.control(control).await {
        Json(h.status()).into_response()
    } else {
        (StatusCode::SERVICE_UNAVAILABLE, "session stopped").into_response()
    }
}

async fn get_stream(State(h): State<SessionHandle>) -> Response {
    let rx = h.subscribe();
    let lines = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(line) => {
                    let mut s = serde_json::to_string(&*line).expect("feed line serializes");
                    s.push('\n');
                    return Some((Ok::<_, std::convert::Infallible>(s), rx));
                }
                // A slow reader skips ahead rather than stalling the loop.
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    ([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(lines)).into_response()
}

pub fn router(handle: SessionHandle) -> Router {
    Router::new()
        .route("/intent", post(post_intent))
        .route("/status", get(get_status))
        .route("/kpis/stream", get(get_stream))
        .route("/control/{action}", post(post_control))
        .with_state(handle)
}
