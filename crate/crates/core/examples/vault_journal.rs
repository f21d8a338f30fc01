// The vault on disk: enroll, move money, read a statement, then tear the
// last journal line as a crash would and reopen.

use bioatm::minutiae::{SyntheticConfig, synthesize_population};
use bioatm::vault::{JOURNAL_FILE, PinOutcome, Vault};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let template = synthesize_population(&SyntheticConfig {
        n_subjects: 2,
        samples_per_subject: 1,
        ..SyntheticConfig::default()
    })?
    .remove(0)
    .base;

    let pan = "79927398713";
    let account = {
        let vault = Vault::open(dir.path())?;
        let (_, account) = vault.enroll_cardholder(pan, "2468", template, 10_000)?;
        let id = account.account_id;
        println!("PIN 1111: {:?}", vault.verify_pin(pan, "1111", 3)?);
        assert_eq!(vault.verify_pin(pan, "2468", 3)?, PinOutcome::Ok);
        vault.withdraw(id, 3000, 1000)?;
        vault.deposit(id, 250)?;
        if let Err(e) = vault.withdraw(id, 50_000, 1000) {
            println!("refused: {e}");
        }
        for r in vault.statement(id, 10)? {
            println!(
                "#{} {:?} {} -> {}",
                r.seq, r.kind, r.amount, r.resulting_balance
            );
        }
        id
    };

    let path = dir.path().join(JOURNAL_FILE);
    let journal = std::fs::read_to_string(&path)?;
    print!("journal:\n{journal}");
    // Cut the last line in half.
    let keep = journal.len() - journal.lines().last().unwrap_or_default().len() / 2 - 1;
    std::fs::write(&path, &journal[..keep])?;

    let vault = Vault::open(dir.path())?;
    println!(
        "after a torn write the balance is {} (the deposit was never complete)",
        vault.balance(account)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
