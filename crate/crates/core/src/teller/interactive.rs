use std::collections::VecDeque;
use std::io::{self, BufRead, Read, Write};
use std::path::PathBuf;

use crate::wire::{Message, ResponseCode, TxnType};

use super::script::load_fingerprint;
use super::terminal::Terminal;
use super::{EXIT_LOST, EXIT_OK, TellerError};

/// Source of keyboard input. `None` means the operator closed the input.
pub trait Prompter {
    fn line(&mut self, prompt: &str) -> Option<String>;
    /// Input that must not be echoed.
    fn secret(&mut self, prompt: &str) -> Option<String>;
}

/// Reads from the controlling terminal; secrets are read without echo.
pub struct TtyPrompter;

impl Prompter for TtyPrompter {
    fn line(&mut self, prompt: &str) -> Option<String> {
        print!("{prompt}");
        io::stdout().flush().ok()?;
        let mut s = String::new();
        match io::stdin().lock().read_line(&mut s) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(s.trim().to_owned()),
        }
    }

    fn secret(&mut self, prompt: &str) -> Option<String> {
        rpassword::prompt_password(prompt)
            .ok()
            .map(|s| s.trim().to_owned())
    }
}

/// Canned answers, in order; for tests and demos.
pub struct ScriptedPrompter(pub VecDeque<String>);

impl ScriptedPrompter {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(answers: I) -> Self {
        ScriptedPrompter(answers.into_iter().map(Into::into).collect())
    }
}

impl Prompter for ScriptedPrompter {
    fn line(&mut self, _prompt: &str) -> Option<String> {
        self.0.pop_front()
    }

    fn secret(&mut self, _prompt: &str) -> Option<String> {
        self.0.pop_front()
    }
}

const MENU: &str = "1) Withdraw  2) Deposit  3) Balance  4) Statement  5) Exit\nSelect: ";

/// Text-mode ATM: card and PIN, fingerprint, then the transaction menu.
/// Returns the process exit code.
pub fn run_interactive<S: Read + Write>(
    terminal: &mut Terminal<S>,
    input: &mut dyn Prompter,
    out: &mut dyn Write,
) -> i32 {
    match session(terminal, input, out) {
        Ok(()) => EXIT_OK,
        Err(TellerError::Lost(reason)) => {
            let _ = writeln!(out, "Connection to the bank was lost ({reason}).");
            EXIT_LOST
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
            e.exit_code()
        }
    }
}

fn session<S: Read + Write>(
    terminal: &mut Terminal<S>,
    input: &mut dyn Prompter,
    out: &mut dyn Write,
) -> Result<(), TellerError> {
    let _ = writeln!(out, "Welcome. Please insert your card.");
    if !login(terminal, input, out)? {
        return Ok(());
    }
    if !fingerprint(terminal, input, out)? {
        return Ok(());
    }
    menu(terminal, input, out)
}

/// Card and PIN loop. `Ok(false)` when the session cannot continue.
fn login<S: Read + Write>(
    terminal: &mut Terminal<S>,
    input: &mut dyn Prompter,
    out: &mut dyn Write,
) -> Result<bool, TellerError> {
    'card: loop {
        let Some(pan) = input.line("Card number: ") else {
            return Ok(false);
        };
        if pan.is_empty() || pan.len() > 19 || !pan.bytes().all(|b| b.is_ascii_digit()) {
            let _ = writeln!(out, "Invalid card number. Please re-enter.");
            continue;
        }
        loop {
            let Some(pin) = input.secret("PIN: ") else {
                return Ok(false);
            };
            if !(4..=6).contains(&pin.len()) || !pin.bytes().all(|b| b.is_ascii_digit()) {
                let _ = writeln!(out, "A PIN is 4 to 6 digits. Please re-enter.");
                continue;
            }
            let Message::AuthCardResp {
                code,
                retries_remaining,
                ..
            } = terminal.authenticate(&pan, &pin)?
            else {
                return Err(TellerError::Lost("unexpected reply to card and PIN".into()));
            };
            match code {
                ResponseCode::Approved => return Ok(true),
                ResponseCode::InvalidCard => {
                    let _ = writeln!(out, "Invalid card number. Please re-enter.");
                    continue 'card;
                }
                ResponseCode::InvalidPin => {
                    let _ = writeln!(
                        out,
                        "Invalid PIN. Please enter a valid PIN ({retries_remaining} tries remaining)."
                    );
                }
                ResponseCode::Malformed => {
                    let _ = writeln!(out, "The PIN could not be read. Please re-enter.");
                }
                ResponseCode::PinTriesExceeded => {
                    let _ = writeln!(out, "Too many wrong PINs. Your card has been blocked.");
                    return Ok(false);
                }
                ResponseCode::CardBlocked => {
                    let _ = writeln!(out, "This card is blocked. Please contact your bank.");
                    return Ok(false);
                }
                other => {
                    let _ = writeln!(out, "Request declined ({other}).");
                    return Ok(false);
                }
            }
        }
    }
}

fn fingerprint<S: Read + Write>(
    terminal: &mut Terminal<S>,
    input: &mut dyn Prompter,
    out: &mut dyn Write,
) -> Result<bool, TellerError> {
    loop {
        let Some(path) = input.line("Place your finger on the reader (minutiae file): ") else {
            terminal.end()?;
            return Ok(false);
        };
        let sample = match load_fingerprint(&PathBuf::from(&path)) {
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(out, "Could not read the fingerprint: {e}");
                continue;
            }
        };
        let Message::BioVerifyResp { code, .. } = terminal.verify_fingerprint(sample)? else {
            return Err(TellerError::Lost("unexpected reply to fingerprint".into()));
        };
        return Ok(match code {
            ResponseCode::Approved => {
                let _ = writeln!(out, "Fingerprint verified.");
                true
            }
            ResponseCode::BiometricMismatch => {
                let _ = writeln!(
                    out,
                    "ACCESS DENIED: fingerprint does not match. Logging off."
                );
                false
            }
            other => {
                let _ = writeln!(out, "Session ended ({other}).");
                false
            }
        });
    }
}

fn menu<S: Read + Write>(
    terminal: &mut Terminal<S>,
    input: &mut dyn Prompter,
    out: &mut dyn Write,
) -> Result<(), TellerError> {
    loop {
        let Some(choice) = input.line(MENU) else {
            terminal.end()?;
            return Ok(());
        };
        let (txn_type, amount) = match choice.as_str() {
            "1" => match amount(input, out, "Amount to withdraw: ") {
                Some(a) => (TxnType::Withdraw, a),
                None => continue,
            },
            "2" => match amount(input, out, "Amount to deposit: ") {
                Some(a) => (TxnType::Deposit, a),
                None => continue,
            },
            "3" => (TxnType::Balance, 0),
            "4" => (TxnType::Statement, 0),
            "5" => {
                terminal.end()?;
                let _ = writeln!(out, "Thank you for banking with us.");
                return Ok(());
            }
            _ => {
                let _ = writeln!(out, "Please choose 1 to 5.");
                continue;
            }
        };
        let Message::TxnResp {
            code,
            balance,
            records,
        } = terminal.transact(txn_type, amount)?
        else {
            return Err(TellerError::Lost("unexpected reply to transaction".into()));
        };
        match code {
            ResponseCode::Approved => match txn_type {
                TxnType::Withdraw => {
                    let _ = writeln!(
                        out,
                        "Please take your cash: {amount}. New balance: {balance}."
                    );
                }
                TxnType::Deposit => {
                    let _ = writeln!(out, "Deposited {amount}. New balance: {balance}.");
                }
                TxnType::Balance => {
                    let _ = writeln!(out, "Balance: {balance}.");
                }
                TxnType::Statement => {
                    let _ = writeln!(out, "Statement (most recent last):");
                    for r in &records {
                        let _ = writeln!(
                            out,
                            "  #{:<6} {:<10} {:>12} -> {:>12}",
                            r.seq, r.kind, r.amount, r.resulting_balance
                        );
                    }
                    let _ = writeln!(out, "Balance: {balance}.");
                }
            },
            ResponseCode::InsufficientFunds => {
                let _ = writeln!(out, "Insufficient funds. Balance: {balance}.");
            }
            ResponseCode::NotDispensable => {
                let _ = writeln!(out, "This machine cannot dispense that amount.");
            }
            ResponseCode::Malformed => {
                let _ = writeln!(out, "Invalid amount.");
            }
            other => {
                let _ = writeln!(out, "Session ended ({other}).");
                return Ok(());
            }
        }
    }
}

fn amount(input: &mut dyn Prompter, out: &mut dyn Write, prompt: &str) -> Option<u64> {
    let text = input.line(prompt)?;
    match text.parse::<u64>() {
        Ok(a) if a > 0 => Some(a),
        _ => {
            let _ = writeln!(out, "Enter a positive whole amount.");
            None
        }
    }
}
