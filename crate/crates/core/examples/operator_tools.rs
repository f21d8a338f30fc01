// Offline operator work on a data directory: enroll a cardholder from a
// template file, block and unblock the card, list the directory.

use bioatm::enroll::{add, list, load_template, set_blocked};
use bioatm::minutiae::{SyntheticConfig, serialize_template, synthesize_population};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("bank");
    let template_file = dir.path().join("alice.min");
    let subject = synthesize_population(&SyntheticConfig {
        n_subjects: 2,
        samples_per_subject: 1,
        ..SyntheticConfig::default()
    })?
    .remove(0);
    std::fs::write(&template_file, serialize_template(&subject.base))?;

    let template = load_template(&template_file)?;
    match add(&data, "79927398714", "2468", template.clone(), 0) {
        Err(e) => println!("refused: {e} (exit code {})", e.exit_code()),
        Ok(_) => println!("accepted a bad card number?"),
    }
    let (card, account) = add(&data, "79927398713", "2468", template.clone(), 25_000)?;
    println!(
        "enrolled account {} with balance {}",
        card.account_id.0, account.balance
    );
    if let Err(e) = add(&data, "79927398713", "1357", template, 0) {
        println!("second enrollment: {e} (exit code {})", e.exit_code());
    }

    set_blocked(&data, "79927398713", true)?;
    print!("{}", list(&data)?);
    set_blocked(&data, "79927398713", false)?;
    print!("{}", list(&data)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
