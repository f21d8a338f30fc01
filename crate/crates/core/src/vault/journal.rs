//! Journal line codec and replay.
//!
//! ```text
//! <seq>|<unix_ms>|<kind>|<field>|...|<crc16 hex>
//! ```
//!
//! The CRC covers everything before the final pipe. A crash can leave at most
//! the last line torn or unverifiable; anything wrong earlier is corruption.

use crate::minutiae::FingerprintTemplate;
use crate::wire::{crc16, decode_minutiae, encode_minutiae};

use super::{AccountId, PinDigest, TemplateId, VaultError, VaultState};

#[derive(Debug, Clone, PartialEq)]
pub enum JournalEntry {
    Enroll {
        pan: String,
        account_id: AccountId,
        template_id: TemplateId,
        opening_balance: u64,
        pin: PinDigest,
        template: FingerprintTemplate,
    },
    Block {
        pan: String,
    },
    Unblock {
        pan: String,
    },
    Deposit {
        account_id: AccountId,
        amount: u64,
        resulting_balance: u64,
    },
    Withdrawal {
        account_id: AccountId,
        amount: u64,
        resulting_balance: u64,
    },
}

impl JournalEntry {
    pub fn kind(&self) -> &'static str {
        match self {
            JournalEntry::Enroll { .. } => "ENROLL",
            JournalEntry::Block { .. } => "BLOCK",
            JournalEntry::Unblock { .. } => "UNBLOCK",
            JournalEntry::Deposit { .. } => "DEP",
            JournalEntry::Withdrawal { .. } => "WDR",
        }
    }

    fn fields(&self) -> Vec<String> {
        match self {
            JournalEntry::Enroll {
                pan,
                account_id,
                template_id,
                opening_balance,
                pin,
                template,
            } => vec![
                pan.clone(),
                account_id.0.to_string(),
                template_id.0.to_string(),
                opening_balance.to_string(),
                hex::encode(pin.salt),
                pin.iterations.to_string(),
                hex::encode(pin.digest),
                hex::encode(encode_minutiae(template)),
            ],
            JournalEntry::Block { pan } | JournalEntry::Unblock { pan } => vec![pan.clone()],
            JournalEntry::Deposit {
                account_id,
                amount,
                resulting_balance,
            }
            | JournalEntry::Withdrawal {
                account_id,
                amount,
                resulting_balance,
            } => vec![
                account_id.0.to_string(),
                amount.to_string(),
                resulting_balance.to_string(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalLine {
    pub seq: u64,
    pub timestamp: u64,
    pub entry: JournalEntry,
}

impl JournalLine {
    /// Full line including the trailing LF.
    pub fn encode(&self) -> String {
        let mut body = format!("{}|{}|{}", self.seq, self.timestamp, self.entry.kind());
        for field in self.entry.fields() {
            body.push('|');
            body.push_str(&field);
        }
        let crc = crc16(body.as_bytes());
        format!("{body}|{crc:04X}\n")
    }

    /// Parses one line without its LF.
    pub fn decode(line: &str) -> Result<JournalLine, String> {
        let (body, crc) = line.rsplit_once('|').ok_or("missing crc field")?;
        let crc = u16::from_str_radix(crc, 16).map_err(|_| format!("bad crc field {crc:?}"))?;
        if crc16(body.as_bytes()) != crc {
            return Err("crc mismatch".into());
        }
        let parts: Vec<&str> = body.split('|').collect();
        if parts.len() < 3 {
            return Err("too few fields".into());
        }
        let seq = num(parts[0], "seq")?;
        let timestamp = num(parts[1], "timestamp")?;
        let f = &parts[3..];
        let arity = |n: usize| {
            if f.len() == n {
                Ok(())
            } else {
                Err(format!("{} expects {n} fields, got {}", parts[2], f.len()))
            }
        };
        let entry = match parts[2] {
            "ENROLL" => {
                arity(8)?;
                let template = hex::decode(f[7])
                    .map_err(|e| e.to_string())
                    .and_then(|b| decode_minutiae(&b).map_err(|e| e.to_string()))?;
                JournalEntry::Enroll {
                    pan: f[0].to_owned(),
                    account_id: AccountId(num(f[1], "account id")?),
                    template_id: TemplateId(num(f[2], "template id")?),
                    opening_balance: num(f[3], "opening balance")?,
                    pin: PinDigest {
                        salt: hex_array(f[4], "salt")?,
                        iterations: num(f[5], "iterations")?,
                        digest: hex_array(f[6], "digest")?,
                    },
                    template,
                }
            }
            "BLOCK" => {
                arity(1)?;
                JournalEntry::Block {
                    pan: f[0].to_owned(),
                }
            }
            "UNBLOCK" => {
                arity(1)?;
                JournalEntry::Unblock {
                    pan: f[0].to_owned(),
                }
            }
            kind @ ("DEP" | "WDR") => {
                arity(3)?;
                let account_id = AccountId(num(f[0], "account id")?);
                let amount = num(f[1], "amount")?;
                let resulting_balance = num(f[2], "resulting balance")?;
                if kind == "DEP" {
                    JournalEntry::Deposit {
                        account_id,
                        amount,
                        resulting_balance,
                    }
                } else {
                    JournalEntry::Withdrawal {
                        account_id,
                        amount,
                        resulting_balance,
                    }
                }
            }
            other => return Err(format!("unknown kind {other:?}")),
        };
        Ok(JournalLine {
            seq,
            timestamp,
            entry,
        })
    }
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad {what} {s:?}"));
    }
    s.parse().map_err(|_| format!("bad {what} {s:?}"))
}

fn hex_array<const N: usize>(s: &str, what: &str) -> Result<[u8; N], String> {
    hex::decode(s)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| format!("bad {what}"))
}

/// Result of replaying a journal image.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub state: VaultState,
    /// Length of the prefix holding intact lines; anything after it is a torn
    /// tail to be discarded before appending.
    pub valid_len: usize,
    /// Whether a torn or unverifiable final line was dropped.
    pub dropped_tail: bool,
}

/// Rebuilds vault state from journal bytes.
pub fn replay(bytes: &[u8]) -> Result<Replayed, VaultError> {
    let mut state = VaultState::default();
    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            // Unterminated final line: a torn write.
            return Ok(Replayed {
                state,
                valid_len: offset,
                dropped_tail: true,
            });
        };
        let is_last = offset + nl + 1 == bytes.len();
        let parsed = std::str::from_utf8(&rest[..nl])
            .map_err(|_| "non-ascii bytes".to_owned())
            .and_then(JournalLine::decode);
        let line = match parsed {
            Ok(line) => line,
            Err(_) if is_last => {
                return Ok(Replayed {
                    state,
                    valid_len: offset,
                    dropped_tail: true,
                });
            }
            Err(reason) => {
                return Err(VaultError::CorruptJournal {
                    line: line_no,
                    reason,
                });
            }
        };
        state
            .apply(&line)
            .map_err(|reason| VaultError::CorruptJournal {
                line: line_no,
                reason,
            })?;
        offset += nl + 1;
    }
    Ok(Replayed {
        state,
        valid_len: offset,
        dropped_tail: false,
    })
}
