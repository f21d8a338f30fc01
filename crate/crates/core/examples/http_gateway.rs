// The JSON gateway that browser kiosks use, exercised in-process.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use bioatm::minutiae::{SyntheticConfig, synthesize_population};
use bioatm::switch::{Switch, SwitchConfig, http::router};
use bioatm::vault::Vault;
use serde_json::{Value, json};
use tower::ServiceExt;

async fn call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Value,
) -> Result<Value, Box<dyn std::error::Error>> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await?;
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status} {value}");
    Ok(value)
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let subject = synthesize_population(&SyntheticConfig {
        n_subjects: 2,
        samples_per_subject: 1,
        ..SyntheticConfig::default()
    })?
    .remove(0);
    let vault = Arc::new(Vault::in_memory());
    vault.enroll_cardholder("79927398713", "2468", subject.base.clone(), 10_000)?;
    let app = router(Arc::new(Switch::new(
        vault,
        SwitchConfig {
            dispense_multiple: 1000,
            ..SwitchConfig::default()
        },
    )));

    let minutiae: Vec<Value> = subject.samples[0]
        .minutiae()
        .iter()
        .map(|m| json!({ "x": m.x(), "y": m.y(), "angle": m.angle(), "kind": m.kind().letter().to_string() }))
        .collect();

    tokio::runtime::Runtime::new()?.block_on(async {
        call(
            &app,
            "POST",
            "/api/session",
            json!({ "pan": "79927398713", "pin": "0000" }),
        )
        .await?;
        let login = call(
            &app,
            "POST",
            "/api/session",
            json!({ "pan": "79927398713", "pin": "2468" }),
        )
        .await?;
        let token = login["token"].as_str().ok_or("no token")?.to_owned();
        call(
            &app,
            "POST",
            &format!("/api/session/{token}/biometric"),
            json!({ "minutiae": minutiae }),
        )
        .await?;
        let txn = format!("/api/session/{token}/txn");
        call(
            &app,
            "POST",
            &txn,
            json!({ "type": "Withdraw", "amount": 2500 }),
        )
        .await?;
        call(
            &app,
            "POST",
            &txn,
            json!({ "type": "Withdraw", "amount": 3000 }),
        )
        .await?;
        call(&app, "POST", &txn, json!({ "type": "Statement" })).await?;
        call(
            &app,
            "DELETE",
            &format!("/api/session/{token}"),
            Value::Null,
        )
        .await?;
        call(&app, "POST", &txn, json!({ "type": "Balance" })).await?;
        Ok(())
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
