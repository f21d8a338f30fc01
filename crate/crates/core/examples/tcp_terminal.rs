// A switch on a local port and a terminal talking to it over TCP.

use std::net::SocketAddr;
use std::sync::Arc;

use bioatm::minutiae::{SyntheticConfig, synthesize_population};
use bioatm::switch::{Switch, SwitchConfig, serve_tcp};
use bioatm::teller::{Terminal, describe};
use bioatm::vault::Vault;
use bioatm::wire::TxnType;

fn start(switch: Arc<Switch>) -> SocketAddr {
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
    rx.recv().expect("switch thread started")
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
    let addr = start(Arc::new(Switch::new(
        vault,
        SwitchConfig {
            dispense_multiple: 1000,
            ..SwitchConfig::default()
        },
    )));

    let mut t = Terminal::connect(&addr.to_string())?;
    t.authenticate("79927398713", "2468")?;
    t.verify_fingerprint(subject.samples[0].clone())?;
    t.transact(TxnType::Withdraw, 3000)?;
    let statement = t.transact(TxnType::Statement, 0)?;
    t.end()?;
    for line in t.take_transcript() {
        println!("{line}");
    }
    println!("last statement: {}", describe(&statement));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
