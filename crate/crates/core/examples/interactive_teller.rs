// The text-mode ATM with its keyboard replaced by canned answers: a
// mistyped PIN, the right one, a fingerprint, two withdrawals, a statement.

use std::sync::Arc;

use bioatm::minutiae::{SyntheticConfig, serialize_template, synthesize_population};
use bioatm::switch::{Switch, SwitchConfig, serve_tcp};
use bioatm::teller::{ScriptedPrompter, Terminal, run_interactive};
use bioatm::vault::Vault;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let subject = synthesize_population(&SyntheticConfig {
        n_subjects: 2,
        samples_per_subject: 1,
        ..SyntheticConfig::default()
    })?
    .remove(0);
    let finger = dir.path().join("scan.min");
    std::fs::write(&finger, serialize_template(&subject.samples[0]))?;

    let vault = Arc::new(Vault::in_memory());
    vault.enroll_cardholder("79927398713", "2468", subject.base, 10_000)?;
    let switch = Arc::new(Switch::new(
        vault,
        SwitchConfig {
            dispense_multiple: 1000,
            ..SwitchConfig::default()
        },
    ));
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
                .await
                .expect("bind");
            tx.send(listener.local_addr().expect("address"))
                .expect("send");
            let _ = serve_tcp(switch, listener).await;
        });
    });
    let addr = rx.recv()?;

    let mut keyboard = ScriptedPrompter::new([
        "79927398713",
        "1111",
        "2468",
        finger.to_str().ok_or("path")?,
        "1",
        "3000",
        "1",
        "2500",
        "4",
        "5",
    ]);
    let mut terminal = Terminal::connect(&addr.to_string())?;
    let mut screen = Vec::new();
    let code = run_interactive(&mut terminal, &mut keyboard, &mut screen);
    print!("{}", String::from_utf8_lossy(&screen));
    println!("exit code {code}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
