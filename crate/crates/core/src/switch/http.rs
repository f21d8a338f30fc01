//! JSON mirror of the terminal protocol for browser kiosks. Each endpoint
//! builds the corresponding request message and runs it through the same
//! [`Switch::dispatch`] as the binary listener.
//!
//! Status mapping: 2xx for `Approved`; 400 for `Malformed` or an unparsable
//! body; 404 for a token the switch never issued; 409 with `{"code": ...}` for
//! every other response code.

use std::path::Path;
use std::sync::Arc;

use axum::Router;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use serde::Deserialize;
use serde_json::{Value, json};

use crate::minutiae::{FingerprintTemplate, Minutia, MinutiaKind, parse_template};
use crate::wire::{Message, ResponseCode, Token, TxnType, encode_pin_block};

use super::{SAMPLES_DIR, Switch};

pub fn router(switch: Arc<Switch>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{token}/biometric", post(biometric))
        .route("/api/session/{token}/txn", post(transaction))
        .route("/api/session/{token}", delete(end_session))
        .route("/api/samples", get(samples))
        .with_state(switch)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Login {
    pan: String,
    pin: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Biometric {
    minutiae: Option<Vec<JsonMinutia>>,
    sample_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMinutia {
    x: u16,
    y: u16,
    angle: u16,
    /// `E`/`B`, or `RidgeEnding`/`Bifurcation`.
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Txn {
    #[serde(rename = "type")]
    txn_type: String,
    #[serde(default)]
    amount: u64,
}

fn reply(status: StatusCode, body: Value) -> Response {
    (status, axum::Json(body)).into_response()
}

fn bad_request(error: impl std::fmt::Display) -> Response {
    reply(
        StatusCode::BAD_REQUEST,
        json!({ "code": ResponseCode::Malformed.name(), "error": error.to_string() }),
    )
}

fn unknown_session() -> Response {
    reply(StatusCode::NOT_FOUND, json!({ "error": "unknown session" }))
}

fn parse_token(s: &str) -> Option<Token> {
    Token::from_hex(s).filter(|t| !t.is_zero())
}

/// Runs a request on the blocking pool. Returns `None` if the request named
/// an unknown token.
async fn dispatch(switch: Arc<Switch>, msg: Message) -> Option<Message> {
    let d = tokio::task::spawn_blocking(move || switch.dispatch(&msg))
        .await
        .expect("dispatch does not panic");
    d.session_found.then_some(d.response)
}

/// Maps a non-approved response code to its status and body.
fn refused(code: ResponseCode, mut body: Value) -> Response {
    body["code"] = json!(code.name());
    let status = if code == ResponseCode::Malformed {
        StatusCode::BAD_REQUEST
    } else {
        StatusCode::CONFLICT
    };
    reply(status, body)
}

async fn create_session(State(switch): State<Arc<Switch>>, body: Bytes) -> Response {
    let login: Login = match serde_json::from_slice(&body) {
        Ok(l) => l,
        Err(e) => return bad_request(e),
    };
    let pin_block = match encode_pin_block(&login.pin, &login.pan) {
        Ok(b) => b,
        Err(e) => return bad_request(e),
    };
    if login.pan.is_empty() || login.pan.len() > 19 {
        return bad_request("card number must be 1 to 19 digits");
    }
    let msg = Message::AuthCardReq {
        pan: login.pan,
        pin_block,
    };
    match dispatch(switch, msg).await {
        Some(Message::AuthCardResp {
            code: ResponseCode::Approved,
            token,
            retries_remaining,
        }) => reply(
            StatusCode::OK,
            json!({ "token": token.to_hex(), "retries_remaining": retries_remaining }),
        ),
        Some(Message::AuthCardResp {
            code,
            retries_remaining,
            ..
        }) => refused(code, json!({ "retries_remaining": retries_remaining })),
        other => unexpected(other),
    }
}

async fn biometric(
    State(switch): State<Arc<Switch>>,
    UrlPath(token): UrlPath<String>,
    body: Bytes,
) -> Response {
    let Some(token) = parse_token(&token) else {
        return unknown_session();
    };
    let req: Biometric = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return bad_request(e),
    };
    let sample = match (req.minutiae, req.sample_id) {
        (Some(points), None) => template_from_json(points),
        (None, Some(id)) => load_sample(&switch.config().data_dir, &id),
        _ => Err("give exactly one of `minutiae` and `sample_id`".to_owned()),
    };
    let sample = match sample {
        Ok(s) => s,
        Err(e) => return bad_request(e),
    };
    match dispatch(switch, Message::BioVerifyReq { token, sample }).await {
        None => unknown_session(),
        Some(Message::BioVerifyResp { code, score_milli }) => {
            let score = f64::from(score_milli) / 1000.0;
            let body = json!({ "score": score, "score_milli": score_milli });
            if code == ResponseCode::Approved {
                reply(StatusCode::OK, body)
            } else {
                refused(code, body)
            }
        }
        other => unexpected(other),
    }
}

async fn transaction(
    State(switch): State<Arc<Switch>>,
    UrlPath(token): UrlPath<String>,
    body: Bytes,
) -> Response {
    let Some(token) = parse_token(&token) else {
        return unknown_session();
    };
    let req: Txn = match serde_json::from_slice(&body) {
        Ok(t) => t,
        Err(e) => return bad_request(e),
    };
    let Ok(txn_type) = req.txn_type.parse::<TxnType>() else {
        return bad_request(format!("unknown transaction type {:?}", req.txn_type));
    };
    let msg = Message::TxnReq {
        token,
        txn_type,
        amount: req.amount,
    };
    match dispatch(switch, msg).await {
        None => unknown_session(),
        Some(Message::TxnResp {
            code,
            balance,
            records,
        }) => {
            let mut body = json!({ "balance": balance });
            if code != ResponseCode::Approved {
                return refused(code, body);
            }
            if txn_type == TxnType::Statement {
                body["records"] = json!(records);
            }
            reply(StatusCode::OK, body)
        }
        other => unexpected(other),
    }
}

async fn end_session(
    State(switch): State<Arc<Switch>>,
    UrlPath(token): UrlPath<String>,
) -> Response {
    let Some(token) = parse_token(&token) else {
        return unknown_session();
    };
    match dispatch(switch, Message::EndSession { token }).await {
        None => unknown_session(),
        Some(Message::EndSession { .. }) => StatusCode::NO_CONTENT.into_response(),
        Some(Message::Err { code }) => refused(code, json!({})),
        other => unexpected(other),
    }
}

/// Ids of the demo live samples, for the kiosk's scanner picker.
async fn samples(State(switch): State<Arc<Switch>>) -> Response {
    let dir = switch.config().data_dir.join(SAMPLES_DIR);
    let mut ids: Vec<String> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| {
            let path = e.ok()?.path();
            (path.extension()? == "min").then(|| path.file_stem()?.to_str().map(str::to_owned))?
        })
        .collect();
    ids.sort();
    reply(StatusCode::OK, json!(ids))
}

fn unexpected(msg: Option<Message>) -> Response {
    tracing::error!("switch gave an unexpected response: {msg:?}");
    reply(
        StatusCode::INTERNAL_SERVER_ERROR,
        json!({ "error": "internal error" }),
    )
}

fn template_from_json(points: Vec<JsonMinutia>) -> Result<FingerprintTemplate, String> {
    let minutiae = points
        .into_iter()
        .map(|p| {
            let kind = match p.kind.as_str() {
                "RidgeEnding" => Some(MinutiaKind::RidgeEnding),
                "Bifurcation" => Some(MinutiaKind::Bifurcation),
                letter => MinutiaKind::from_letter(letter),
            }
            .ok_or_else(|| format!("unknown minutia kind {:?}", p.kind))?;
            Minutia::new(p.x, p.y, p.angle, kind).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, String>>()?;
    FingerprintTemplate::new(minutiae).map_err(|e| e.to_string())
}

fn load_sample(data_dir: &Path, id: &str) -> Result<FingerprintTemplate, String> {
    let safe = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if !safe {
        return Err(format!("bad sample id {id:?}"));
    }
    let path = data_dir.join(SAMPLES_DIR).join(format!("{id}.min"));
    let text = std::fs::read_to_string(&path).map_err(|_| format!("unknown sample {id:?}"))?;
    parse_template(&text).map_err(|e| format!("sample {id:?}: {e}"))
}
