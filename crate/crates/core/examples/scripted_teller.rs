// A seeded demo bank, a switch on a local port, and a session script run
// against it, as `atm teller run` would.

use std::sync::Arc;

use bioatm::enroll::{SeedOptions, format_roster, seed};
use bioatm::switch::{Switch, SwitchConfig, serve_tcp};
use bioatm::teller::{Script, Terminal, run_script};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let roster = seed(
        dir.path(),
        &SeedOptions {
            subjects: 3,
            opening_balance: 10_000,
            ..SeedOptions::default()
        },
    )?;
    print!("{}", format_roster(&roster));

    let switch = Arc::new(Switch::open(SwitchConfig {
        data_dir: dir.path().to_owned(),
        dispense_multiple: 1000,
        ..SwitchConfig::default()
    })?);
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

    let me = &roster[0];
    let impostor = &roster[1];
    let script = Script::parse(&format!(
        "CARD {pan}\n\
         PIN 0000 EXPECT InvalidPin\n\
         PIN {pin} EXPECT Approved\n\
         FINGERPRINT samples/{sample}.min EXPECT Approved\n\
         WITHDRAW 3000 EXPECT Approved\n\
         WITHDRAW 2500 EXPECT NotDispensable\n\
         STATEMENT EXPECT Approved\n\
         END\n\
         CARD {pan}\n\
         PIN {pin} EXPECT Approved\n\
         FINGERPRINT samples/{other}.min EXPECT BiometricMismatch\n\
         BALANCE EXPECT InvalidSession\n",
        pan = me.pan,
        pin = me.pin,
        sample = me.samples[0],
        other = impostor.samples[0],
    ))?;
    let mut terminal = Terminal::connect(&addr.to_string())?;
    let mut transcript = Vec::new();
    let outcome = run_script(&mut terminal, &script, dir.path(), &mut transcript);
    print!("{}", String::from_utf8_lossy(&transcript));
    outcome?;
    println!("every expectation met");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
