//! Scripted terminal sessions.
//!
//! One action per line, `ACTION [arg] [EXPECT code]`; `#` starts a comment.
//!
//! ```text
//! CARD 5061000000000005
//! PIN 1234 EXPECT Approved
//! FINGERPRINT samples/S000-1.min EXPECT Approved
//! WITHDRAW 3000 EXPECT Approved
//! BALANCE
//! STATEMENT 5
//! END
//! ```
//!
//! `CARD` only selects the card; it goes on the wire together with the next
//! `PIN`. Fingerprint paths are relative to the script's directory.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::minutiae::{FingerprintTemplate, parse_template};
use crate::wire::{Message, ResponseCode, TxnType, encode_pin_block};

use super::TellerError;
use super::terminal::{Terminal, describe};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Card(String),
    Pin(String),
    Fingerprint(PathBuf),
    Withdraw(u64),
    Deposit(u64),
    Balance,
    /// Shows at most this many of the records the switch returns.
    Statement(usize),
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub action: Action,
    pub expect: Option<ResponseCode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub steps: Vec<Step>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, TellerError> {
        let mut steps = Vec::new();
        let mut card: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: String| TellerError::Script { line, reason };
            let content = raw.split('#').next().unwrap_or_default();
            let mut words: Vec<&str> = content.split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            let mut expect = None;
            if let Some(pos) = words.iter().position(|w| w.eq_ignore_ascii_case("EXPECT")) {
                if pos + 2 != words.len() {
                    return Err(err(
                        "EXPECT takes exactly one response code, at the end".into()
                    ));
                }
                expect = Some(words[pos + 1].parse::<ResponseCode>().map_err(err)?);
                words.truncate(pos);
            }
            if words.is_empty() {
                return Err(err("EXPECT without an action".into()));
            }
            let verb = words[0].to_ascii_uppercase();
            let args = &words[1..];
            let one_arg = || match args {
                [a] => Ok(*a),
                _ => Err(err(format!("{verb} takes exactly one argument"))),
            };
            let no_arg = || {
                if args.is_empty() {
                    Ok(())
                } else {
                    Err(err(format!("{verb} takes no argument")))
                }
            };
            let amount = || {
                one_arg()?
                    .parse::<u64>()
                    .map_err(|_| err(format!("{verb} amount must be a non-negative integer")))
            };
            let action = match verb.as_str() {
                "CARD" => {
                    let pan = one_arg()?;
                    if pan.is_empty() || pan.len() > 19 || !pan.bytes().all(|b| b.is_ascii_digit())
                    {
                        return Err(err("card number must be 1 to 19 digits".into()));
                    }
                    if expect.is_some() {
                        return Err(err("CARD sends nothing, so it cannot EXPECT".into()));
                    }
                    card = Some(pan.to_owned());
                    Action::Card(pan.to_owned())
                }
                "PIN" => {
                    let pin = one_arg()?;
                    let pan = card
                        .as_deref()
                        .ok_or_else(|| err("PIN before any CARD".into()))?;
                    encode_pin_block(pin, pan).map_err(|e| err(e.to_string()))?;
                    Action::Pin(pin.to_owned())
                }
                "FINGERPRINT" => Action::Fingerprint(PathBuf::from(one_arg()?)),
                "WITHDRAW" => Action::Withdraw(amount()?),
                "DEPOSIT" => Action::Deposit(amount()?),
                "BALANCE" => {
                    no_arg()?;
                    Action::Balance
                }
                "STATEMENT" => match args {
                    [] => Action::Statement(usize::MAX),
                    [n] => match n.parse::<usize>() {
                        Ok(n) if n > 0 => Action::Statement(n),
                        _ => return Err(err("STATEMENT count must be a positive integer".into())),
                    },
                    _ => return Err(err("STATEMENT takes at most one argument".into())),
                },
                "END" => {
                    no_arg()?;
                    Action::End
                }
                other => return Err(err(format!("unknown action {other:?}"))),
            };
            steps.push(Step {
                line,
                action,
                expect,
            });
        }
        Ok(Script { steps })
    }

    pub fn from_file(path: &Path) -> Result<Script, TellerError> {
        let text = std::fs::read_to_string(path).map_err(|e| TellerError::Script {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Script::parse(&text)
    }
}

/// Loads a fingerprint sample in the text template format.
pub fn load_fingerprint(path: &Path) -> Result<FingerprintTemplate, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_template(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs the steps in order, writing each request/response pair to
/// `transcript`. Stops at the first unmet expectation.
pub fn run_script<S: Read + Write>(
    terminal: &mut Terminal<S>,
    script: &Script,
    base_dir: &Path,
    transcript: &mut dyn Write,
) -> Result<(), TellerError> {
    let mut pan = String::new();
    for step in &script.steps {
        let resp = match &step.action {
            Action::Card(p) => {
                pan.clone_from(p);
                continue;
            }
            Action::Pin(pin) => terminal.authenticate(&pan, pin),
            Action::Fingerprint(path) => {
                let sample = load_fingerprint(&base_dir.join(path)).map_err(|reason| {
                    TellerError::Script {
                        line: step.line,
                        reason,
                    }
                })?;
                terminal.verify_fingerprint(sample)
            }
            Action::Withdraw(n) => terminal.transact(TxnType::Withdraw, *n),
            Action::Deposit(n) => terminal.transact(TxnType::Deposit, *n),
            Action::Balance => terminal.transact(TxnType::Balance, 0),
            Action::Statement(n) => terminal.transact(TxnType::Statement, 0).map(|mut resp| {
                if let Message::TxnResp { records, .. } = &mut resp {
                    let skip = records.len().saturating_sub(*n);
                    records.drain(..skip);
                }
                resp
            }),
            Action::End => terminal.end(),
        };
        let mut lines = terminal.take_transcript();
        if let (Action::Statement(_), Ok(resp), Some(last)) =
            (&step.action, &resp, lines.last_mut())
        {
            // Show only the records that were asked for.
            *last = format!("< {}", describe(resp));
        }
        for line in lines {
            let _ = writeln!(transcript, "{line}");
        }
        let code = response_code(&resp?);
        if let Some(expected) = step.expect
            && expected != code
        {
            let _ = writeln!(
                transcript,
                "! line {}: expected {expected}, got {code}",
                step.line
            );
            return Err(TellerError::Mismatch {
                line: step.line,
                expected,
                actual: code,
            });
        }
    }
    Ok(())
}

/// The outcome a response reports; an echoed END_SESSION is an approval.
pub fn response_code(resp: &Message) -> ResponseCode {
    match resp {
        Message::EndSession { .. } => ResponseCode::Approved,
        other => other.response_code().unwrap_or(ResponseCode::Malformed),
    }
}
