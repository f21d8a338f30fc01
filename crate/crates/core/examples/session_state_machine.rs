// Drive the switch directly with protocol messages: a wrong PIN, the right
// one, a fingerprint, a transaction, and the audit trail it leaves.

use bioatm::minutiae::{SyntheticConfig, synthesize_population};
use bioatm::switch::{Switch, SwitchConfig};
use bioatm::vault::Vault;
use bioatm::wire::{Message, Token, TxnType, encode_pin_block};
use std::sync::Arc;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let people = synthesize_population(&SyntheticConfig {
        n_subjects: 2,
        samples_per_subject: 2,
        ..SyntheticConfig::default()
    })?;
    let (pan, pin) = ("79927398713", "2468");
    let vault = Arc::new(Vault::in_memory());
    vault.enroll_cardholder(pan, pin, people[0].base.clone(), 10_000)?;
    let switch = Switch::new(
        vault,
        SwitchConfig {
            dispense_multiple: 1000,
            ..SwitchConfig::default()
        },
    );

    let login = |pin: &str| -> Result<Message, Box<dyn std::error::Error>> {
        Ok(switch.handle(&Message::AuthCardReq {
            pan: pan.into(),
            pin_block: encode_pin_block(pin, pan)?,
        }))
    };
    println!("{:?}", login("0000")?);
    let Message::AuthCardResp { token, .. } = login(pin)? else {
        return Err("no token".into());
    };
    let steps = [
        Message::TxnReq {
            token,
            txn_type: TxnType::Balance,
            amount: 0,
        },
        Message::BioVerifyReq {
            token,
            sample: people[0].samples[0].clone(),
        },
        Message::TxnReq {
            token,
            txn_type: TxnType::Withdraw,
            amount: 3000,
        },
        Message::EndSession { token },
        Message::TxnReq {
            token,
            txn_type: TxnType::Balance,
            amount: 0,
        },
        Message::EndSession {
            token: Token([9; 8]),
        },
    ];
    for msg in &steps {
        println!("{:?}", switch.handle(msg));
    }

    println!("\naudit trail:");
    for e in switch.audit_events() {
        println!("  {e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
